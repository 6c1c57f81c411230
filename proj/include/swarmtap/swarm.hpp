#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <unordered_set>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "swarmtap/btwire.hpp"
#include "swarmtap/config.hpp"
#include "swarmtap/overlay.hpp"
#include "swarmtap/rng.hpp"

namespace swarmtap::swarm {

using btwire::InfoHash;
using btwire::PeerId;

enum class UsageMode { TrackerOnlyViaTor, ContentAndTrackerViaTor, PeersOnlyViaTor, NoTor };
const char* to_string(UsageMode m);

bool tracker_via_tor(UsageMode m);
bool peers_via_tor(UsageMode m);

// ---- tracker ----

class Tracker {
 public:
  Tracker(Rng& rng, int peers_per_response, int64_t interval_s, int64_t member_ttl_s);

  // Registers (src.ip, req.port), prunes expired members, then returns up to
  // K other members in uniformly shuffled order.
  btwire::AnnounceResponse handle_announce(const btwire::AnnounceRequest& req, const Endpoint& src,
                                           int64_t now);

  // Pre-registered member that never expires (ambient swarm population).
  void seed_member(const InfoHash& ih, const Endpoint& ep);

  size_t member_count(const InfoHash& ih, int64_t now);
  size_t torrent_count() const { return torrents_.size(); }

 private:
  struct Member {
    Endpoint ep;
    int64_t expires;
  };
  struct TorrentState {
    std::vector<Member> members;
    std::map<Endpoint, size_t> index;
    int64_t min_expiry = INT64_MAX;
    int64_t last_prune = INT64_MIN;
  };

  void prune(TorrentState& t, int64_t now, bool force = false);

  Rng& rng_;
  int k_;
  int64_t interval_;
  int64_t ttl_;
  std::map<InfoHash, TorrentState> torrents_;
};

// ---- DHT ----

class DhtService {
 public:
  DhtService(Rng& rng, int node_count, int peers_per_response);

  const std::vector<btwire::NodeInfo>& nodes() const { return infos_; }
  btwire::NodeInfo responsible(const InfoHash& ih);

  // KRPC endpoint: one datagram in, at most one out. announce_peer stores the
  // caller's source address with the announced port.
  std::optional<Bytes> handle_udp(const Endpoint& node_addr, const Endpoint& src,
                                  const Bytes& payload);

  void seed_peer(const InfoHash& ih, const Endpoint& ep);

  // One get_peers worth of endpoints: uniform sample of at most K_dht.
  std::vector<Endpoint> sample_peers(const InfoHash& ih);

  // Exhaustive store view (what a complete crawl would recover).
  const std::vector<Endpoint>* stored(const InfoHash& ih) const;

 private:
  struct Node {
    btwire::NodeId id{};
    Endpoint ep;
    std::map<InfoHash, std::vector<Endpoint>> store;
    std::map<InfoHash, std::set<Endpoint>> dedupe;
  };

  Node& node_for(const InfoHash& ih);

  Rng& rng_;
  int k_;
  std::vector<Node> nodes_;
  std::vector<btwire::NodeInfo> infos_;
  std::map<Endpoint, size_t> by_endpoint_;
  std::map<InfoHash, size_t> responsible_cache_;
};

// Repeated get_peers sampling until the discovered set is stable for
// `stable_rounds` consecutive rounds; a round issues 2*ceil(|seen|/K) queries
// so completeness stays scale-free in the torrent size.
using GetPeersFn = std::function<std::vector<Endpoint>(const InfoHash&)>;
std::set<Endpoint> dht_crawl(const InfoHash& ih, const GetPeersFn& get_peers, int stable_rounds,
                             int peers_per_response);

// One draw from the configured torrent-size distribution (discrete log-normal
// clamped to [1, size_max]).
int sample_torrent_size(const ScenarioConfig& cfg, Rng& rng);

// ---- peers ----

struct PeerAgent {
  overlay::ClientId id = 0;
  Endpoint endpoint;  // real IPv4 + listening port, fixed for life
  IpAddr ip6;
  PeerId peer_id;
  UsageMode mode = UsageMode::TrackerOnlyViaTor;
  int profile = 0;
  std::string group;
  std::vector<uint32_t> torrents;
  std::vector<size_t> http_sites;

  // runtime state
  bool online = false;
  uint32_t epoch = 0;  // invalidates stale tick/browse events across sessions
  std::vector<int64_t> next_announce;
  std::vector<std::map<Endpoint, int64_t>> contacted;
};

struct BackgroundMember {
  Endpoint ep;
  PeerId peer_id;
  std::string group;
};

struct HttpSite {
  Endpoint ep;
  std::string category;
};

using HostHandler =
    std::function<std::vector<Bytes>(const Endpoint& src, const Bytes& payload, int64_t now)>;

// The BitTorrent world: builds the population deterministically from the
// scenario config, wires routing into the overlay, and steps every agent
// through one single-threaded event queue.
class World {
 public:
  explicit World(const ScenarioConfig& cfg);

  overlay::Network& network() { return net_; }
  const overlay::GroundTruthLedger& ledger() const { return ledger_; }
  Rng& rng() { return rng_; }

  const std::vector<PeerAgent>& agents() const { return agents_; }
  const std::vector<BackgroundMember>& background() const { return background_; }
  const std::vector<HttpSite>& http_sites() const { return http_sites_; }
  const std::vector<InfoHash>& torrent_hashes() const { return torrent_hashes_; }
  const std::vector<int>& torrent_target_sizes() const { return torrent_sizes_; }
  Tracker& tracker() { return tracker_; }
  DhtService& dht() { return dht_; }

  Endpoint tracker_endpoint() const { return tracker_ep_; }
  Endpoint attacker_listener() const { return listener_ep_; }
  std::vector<overlay::RelayId> tapped_exits() const;
  std::set<IpAddr> exit_ips() const { return net_.exit_ips(); }

  // Public knowledge analogous to a geo/AS database: address -> group label.
  const std::map<IpAddr, std::string>& ip_groups() const { return ip_groups_; }
  // Destination -> category labels for the browsing profile analysis.
  std::map<Endpoint, std::string> http_category_map() const;

  void set_observation_sink(overlay::ObservationSink sink);
  void add_exit_tap(overlay::RelayId exit, overlay::Tap* tap) { net_.add_tap(exit, tap); }
  void set_listener_handler(HostHandler h) { listener_handler_ = std::move(h); }

  void run();

 private:
  enum class EventKind { SessionStart, SessionEnd, Tick, Browse };
  struct Event {
    int64_t t;
    uint64_t seq;
    EventKind kind;
    uint32_t agent;
    uint32_t epoch;
    bool operator>(const Event& o) const {
      return t != o.t ? t > o.t : seq > o.seq;
    }
  };

  void build_population();
  void schedule(int64_t t, EventKind kind, uint32_t agent, uint32_t epoch);
  void on_session_start(PeerAgent& a);
  void on_session_end(PeerAgent& a);
  void on_tick(PeerAgent& a);
  void on_browse(PeerAgent& a);

  void do_announce(PeerAgent& a, size_t ti);
  void dht_announce(PeerAgent& a, size_t ti);
  void connect_to_peer(PeerAgent& a, size_t ti, const Endpoint& ep);
  void do_browse_request(PeerAgent& a);

  std::vector<Bytes> tcp_deliver(const Endpoint& dst, const Endpoint& src, const Bytes& payload);
  std::optional<Bytes> udp_deliver(const Endpoint& dst, const Endpoint& src, const Bytes& payload);
  std::vector<Bytes> peer_respond(const PeerId& peer_id, uint16_t listen_port, const Bytes& payload);

  Bytes make_ip_field(const PeerAgent& a, bool announce);

  ScenarioConfig cfg_;
  Rng rng_;
  overlay::GroundTruthLedger ledger_;
  overlay::Network net_;
  Tracker tracker_;
  DhtService dht_;

  std::vector<PeerAgent> agents_;
  std::vector<BackgroundMember> background_;
  std::vector<HttpSite> http_sites_;
  std::vector<InfoHash> torrent_hashes_;
  std::vector<int> torrent_sizes_;
  std::map<IpAddr, std::string> ip_groups_;

  Endpoint tracker_ep_;
  Endpoint listener_ep_;
  HostHandler listener_handler_;

  enum class HostKind : uint8_t { Agent, Background, Http };
  std::unordered_map<Endpoint, std::pair<HostKind, uint32_t>, EndpointHash> hosts_;
  std::unordered_map<Endpoint, size_t, EndpointHash> dht_hosts_;
  std::map<InfoHash, Endpoint> dht_routing_;  // responsible node per infohash

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  uint64_t seq_ = 0;
  int64_t now_ = 0;
  std::vector<IpAddr> exit_ip_list_;
};

}  // namespace swarmtap::swarm
