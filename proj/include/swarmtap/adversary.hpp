#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "swarmtap/btwire.hpp"
#include "swarmtap/overlay.hpp"
#include "swarmtap/swarm.hpp"

namespace swarmtap::adversary {

using overlay::CircuitId;
using overlay::ExitObservation;
using overlay::StreamId;

enum class Method {
  InspectionAnnounce,
  InspectionExtHandshake,
  Hijack,
  DhtMatch,
  DominoIntra,
  DominoInter,
};
const char* to_string(Method m);

// One de-anonymization claim. Inspection claims are unverified: nobody
// checked the embedded address's authenticity. Hijack and DhtMatch are
// verified by connect-back / unique port match.
struct DeanonRecord {
  IpAddr claimed_ip;
  Method method = Method::InspectionAnnounce;
  bool verified = false;
  std::set<StreamId> supporting_streams;
  std::set<btwire::PeerId> peer_ids_seen;
  int64_t time = 0;
  bool piece_confirmed = false;
};

// Everything the monitor could extract from one stream's observed payloads.
// peer_ids holds only source-side identities (to-destination messages); the
// remote peer's id would link the wrong party.
struct StreamDigest {
  StreamId id = 0;
  CircuitId circuit = 0;
  overlay::RelayId exit_relay = 0;
  int64_t first_seen = 0;
  Endpoint destination;
  bool encrypted = false;
  bool saw_announce = false;
  bool has_infohash = false;
  btwire::InfoHash infohash;
  std::optional<uint16_t> leaked_port;
  bool is_http = false;
  std::set<btwire::PeerId> peer_ids;

  // tracker-list entries (younger than T) that contained this destination
  struct ListCandidate {
    int64_t entry_time = 0;
    StreamId entry_stream = 0;
  };
  std::vector<ListCandidate> list_candidates;
};

struct HijackConnection {
  int64_t time = 0;
  bool from_exit = false;  // true: the victim also tunnels peer traffic
  btwire::PeerId peer_id;
  IpAddr src_ip;
  bool piece_confirmed = false;
};

// Announce / extended-handshake ip-field taxonomy, one counter per class.
struct IpClassTally {
  std::array<uint64_t, 5> announce{};
  std::array<uint64_t, 5> ext{};
};

struct DominoResult {
  struct Attribution {
    IpAddr ip;
    Method method = Method::DominoIntra;
  };
  std::map<StreamId, Attribution> by_stream;

  struct Conflict {
    StreamId stream = 0;
    IpAddr kept;
    Method kept_method = Method::DominoIntra;
    IpAddr rejected;
    Method rejected_method = Method::DominoIntra;
  };
  // Surfaced, never resolved: the earliest claim stays in by_stream so a
  // direct attack's attribution is never displaced (monotonicity).
  std::vector<Conflict> conflicts;
};

struct MonitorConfig {
  std::set<IpAddr> exit_ips;
  Endpoint listener;
  bool inspect = true;
  bool hijack = true;
  bool dht_match = true;
  bool domino = true;
  int64_t hijack_pending_ttl_s = 3600;
  int64_t inter_domino_window_s = 300;
  std::set<uint16_t> port_exclusions;
  int crawl_stable_rounds = 5;
  int dht_peers_per_response = 8;
  int64_t crawl_cache_ttl_s = 7200;
};

// The malicious exit instrumentation. Consumes exit observations, its own
// listener's connections, and public DHT queries; there is no path from here
// to the ground-truth ledger.
class ExitMonitor : public overlay::Tap {
 public:
  ExitMonitor(MonitorConfig cfg, swarm::GetPeersFn dht_query);

  void on_to_destination(const ExitObservation& obs) override;
  void on_to_client(ExitObservation& obs) override;

  // Listener host handler: accepts hijack connect-backs.
  std::vector<Bytes> on_listener_connect(const Endpoint& src, const Bytes& payload, int64_t now);

  // Post-run: spread attributions along circuits (intra), peer ids and
  // remembered tracker lists (inter), to a fixpoint.
  DominoResult domino_link() const;

  const std::vector<DeanonRecord>& records() const { return records_; }
  const std::map<StreamId, StreamDigest>& digests() const { return digests_; }
  const std::vector<HijackConnection>& hijack_connections() const { return hijack_conns_; }
  const IpClassTally& tally() const { return tally_; }
  uint64_t crawls_performed() const { return crawls_; }

 private:
  StreamDigest& digest(const ExitObservation& obs);
  void inspect_announce(const btwire::AnnounceRequest& req, const StreamDigest& d, int64_t now);
  void inspect_ext(const btwire::ExtendedHandshake& eh, const StreamDigest& d, int64_t now);
  void maybe_dht_match(StreamDigest& d, int64_t now);
  const std::set<Endpoint>& crawl_cached(const btwire::InfoHash& ih, int64_t now);
  void remember_list(const StreamDigest& d, int64_t now, const std::vector<Endpoint>& eps);
  void capture_list_candidates(StreamDigest& d, int64_t now);

  MonitorConfig cfg_;
  swarm::GetPeersFn dht_query_;
  btwire::PeerId self_id_;

  std::map<StreamId, StreamDigest> digests_;
  std::vector<DeanonRecord> records_;
  std::vector<HijackConnection> hijack_conns_;
  IpClassTally tally_;

  // hijack state: (infohash, announce peer id) -> rewritten-response stream
  struct Pending {
    StreamId stream = 0;
    int64_t time = 0;
  };
  std::map<std::pair<btwire::InfoHash, btwire::PeerId>, Pending> pending_;
  std::map<Endpoint, size_t> last_conn_record_;  // src -> records_ index (piece confirm)

  // rolling tracker-list memory, keyed by listed endpoint; entries older
  // than the window are skipped on lookup and swept out periodically
  struct ListEntry {
    int64_t time = 0;
    StreamId stream = 0;
    CircuitId circuit = 0;
    overlay::RelayId exit_relay = 0;
  };
  std::unordered_map<Endpoint, std::vector<ListEntry>, EndpointHash> list_index_;
  int64_t last_list_sweep_ = 0;

  // dht-match memo and crawl cache
  struct MatchAttempt {
    int64_t time = 0;
    bool claimed = false;
  };
  std::map<std::pair<btwire::InfoHash, uint16_t>, MatchAttempt> match_attempts_;
  struct CachedCrawl {
    int64_t time = 0;
    std::set<Endpoint> endpoints;
  };
  std::map<btwire::InfoHash, CachedCrawl> crawl_cache_;
  uint64_t crawls_ = 0;
};

// Ground-truth evaluation: the single component allowed to read the ledger.
class Evaluator {
 public:
  explicit Evaluator(const overlay::GroundTruthLedger& ledger) : ledger_(ledger) {}

  bool ip_matches_stream(StreamId id, const IpAddr& claimed) const;
  std::optional<IpAddr> stream_ip4(StreamId id) const;
  std::optional<overlay::ClientId> stream_client(StreamId id) const;
  size_t ledger_stream_count() const;

  struct MethodStats {
    size_t attributions = 0;
    size_t correct = 0;
    std::optional<double> precision;  // empty: no attributions (N/A)
    double recall = 0.0;              // correct / ledger streams
  };
  struct Evaluation {
    std::map<Method, MethodStats> per_stream_method;
    MethodStats overall;
    std::map<Method, MethodStats> per_record_method;
    size_t ledger_streams = 0;
    size_t conflicts = 0;
    size_t intra_count = 0;
    size_t inter_count = 0;
    std::optional<double> intra_share;  // among domino-attributed streams
  };
  Evaluation evaluate(const DominoResult& domino, const std::vector<DeanonRecord>& records) const;

 private:
  const overlay::GroundTruthLedger& ledger_;
};

}  // namespace swarmtap::adversary
