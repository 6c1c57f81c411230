#include "swarmtap/swarm.hpp"

#include <algorithm>
#include <cmath>

#include "swarmtap/error.hpp"

namespace swarmtap::swarm {

using namespace btwire;

const char* to_string(UsageMode m) {
  switch (m) {
    case UsageMode::TrackerOnlyViaTor: return "tracker_only";
    case UsageMode::ContentAndTrackerViaTor: return "content_and_tracker";
    case UsageMode::PeersOnlyViaTor: return "peers_only";
    case UsageMode::NoTor: return "no_tor";
  }
  return "?";
}

bool tracker_via_tor(UsageMode m) {
  return m == UsageMode::TrackerOnlyViaTor || m == UsageMode::ContentAndTrackerViaTor;
}

bool peers_via_tor(UsageMode m) {
  return m == UsageMode::ContentAndTrackerViaTor || m == UsageMode::PeersOnlyViaTor;
}

// ---- Tracker ----

Tracker::Tracker(Rng& rng, int peers_per_response, int64_t interval_s, int64_t member_ttl_s)
    : rng_(rng), k_(peers_per_response), interval_(interval_s), ttl_(member_ttl_s) {}

void Tracker::prune(TorrentState& t, int64_t now, bool force) {
  if (now < t.min_expiry) return;
  // rebuilding the index is O(n log n); a short stale window is acceptable
  if (!force && now - t.last_prune < interval_ / 2) return;
  t.last_prune = now;
  std::vector<Member> keep;
  keep.reserve(t.members.size());
  int64_t min_exp = INT64_MAX;
  for (const Member& m : t.members) {
    if (m.expires > now) {
      keep.push_back(m);
      min_exp = std::min(min_exp, m.expires);
    }
  }
  t.members = std::move(keep);
  t.index.clear();
  for (size_t i = 0; i < t.members.size(); ++i) t.index.emplace(t.members[i].ep, i);
  t.min_expiry = min_exp;
}

btwire::AnnounceResponse Tracker::handle_announce(const btwire::AnnounceRequest& req,
                                                  const Endpoint& src, int64_t now) {
  TorrentState& t = torrents_[req.infohash];
  prune(t, now);

  Endpoint member{src.ip, req.port};
  int64_t expires = now + ttl_;
  auto it = t.index.find(member);
  if (it != t.index.end()) {
    t.members[it->second].expires = expires;
  } else {
    t.index.emplace(member, t.members.size());
    t.members.push_back({member, expires});
  }
  t.min_expiry = std::min(t.min_expiry, expires);

  AnnounceResponse resp;
  resp.interval = interval_;
  size_t n = t.members.size();
  // one extra sample absorbs the requester's own entry
  auto picks = rng_.sample_indices(n, std::min<size_t>(n, static_cast<size_t>(k_) + 1));
  for (size_t idx : picks) {
    if (t.members[idx].ep == member) continue;
    if (resp.peers.size() >= static_cast<size_t>(k_)) break;
    resp.peers.push_back(t.members[idx].ep);
  }
  rng_.shuffle(resp.peers);
  return resp;
}

void Tracker::seed_member(const InfoHash& ih, const Endpoint& ep) {
  TorrentState& t = torrents_[ih];
  if (t.index.count(ep)) return;
  t.index.emplace(ep, t.members.size());
  t.members.push_back({ep, INT64_MAX});
}

size_t Tracker::member_count(const InfoHash& ih, int64_t now) {
  auto it = torrents_.find(ih);
  if (it == torrents_.end()) return 0;
  prune(it->second, now, true);
  return it->second.members.size();
}

// ---- DHT ----

DhtService::DhtService(Rng& rng, int node_count, int peers_per_response)
    : rng_(rng), k_(peers_per_response) {
  nodes_.resize(node_count);
  for (int i = 0; i < node_count; ++i) {
    Node& n = nodes_[i];
    for (auto& b : n.id) b = static_cast<uint8_t>(rng_.below(256));
    n.ep = Endpoint{IpAddr::v4(14, 0, static_cast<uint8_t>(i >> 8), static_cast<uint8_t>(i & 0xff)),
                    6881};
    infos_.push_back({n.id, n.ep});
    by_endpoint_.emplace(n.ep, i);
  }
}

DhtService::Node& DhtService::node_for(const InfoHash& ih) {
  auto it = responsible_cache_.find(ih);
  if (it != responsible_cache_.end()) return nodes_[it->second];
  size_t best = 0;
  std::array<uint8_t, 20> best_d{};
  for (size_t i = 0; i < nodes_.size(); ++i) {
    std::array<uint8_t, 20> d;
    for (int b = 0; b < 20; ++b) d[b] = nodes_[i].id[b] ^ ih.v[b];
    if (i == 0 || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  responsible_cache_.emplace(ih, best);
  return nodes_[best];
}

btwire::NodeInfo DhtService::responsible(const InfoHash& ih) {
  Node& n = node_for(ih);
  return {n.id, n.ep};
}

void DhtService::seed_peer(const InfoHash& ih, const Endpoint& ep) {
  Node& n = node_for(ih);
  if (n.dedupe[ih].insert(ep).second) n.store[ih].push_back(ep);
}

std::vector<Endpoint> DhtService::sample_peers(const InfoHash& ih) {
  Node& n = node_for(ih);
  auto it = n.store.find(ih);
  if (it == n.store.end()) return {};
  const std::vector<Endpoint>& all = it->second;
  auto picks = rng_.sample_indices(all.size(), std::min<size_t>(all.size(), static_cast<size_t>(k_)));
  std::vector<Endpoint> out;
  out.reserve(picks.size());
  for (size_t i : picks) out.push_back(all[i]);
  return out;
}

const std::vector<Endpoint>* DhtService::stored(const InfoHash& ih) const {
  for (const Node& n : nodes_) {
    auto it = n.store.find(ih);
    if (it != n.store.end()) return &it->second;
  }
  return nullptr;
}

std::optional<Bytes> DhtService::handle_udp(const Endpoint& node_addr, const Endpoint& src,
                                            const Bytes& payload) {
  auto host = by_endpoint_.find(node_addr);
  if (host == by_endpoint_.end()) return std::nullopt;
  KrpcMessage msg;
  try {
    msg = parse_krpc(payload);
  } catch (const MalformedInput&) {
    return std::nullopt;
  }

  KrpcMessage reply;
  reply.transaction_id = msg.transaction_id;
  if (const auto* fq = std::get_if<FindNodeQuery>(&msg.kind)) {
    InfoHash target;
    std::copy(fq->target.begin(), fq->target.end(), target.v.begin());
    reply.kind = FindNodeResponse{{responsible(target)}};
  } else if (const auto* gq = std::get_if<GetPeersQuery>(&msg.kind)) {
    GetPeersResponse r;
    r.token = "tk";
    r.endpoints = sample_peers(gq->infohash);
    reply.kind = std::move(r);
  } else if (const auto* aq = std::get_if<AnnouncePeerQuery>(&msg.kind)) {
    seed_peer(aq->infohash, Endpoint{src.ip, aq->port});
    return std::nullopt;  // fire and forget
  } else {
    return std::nullopt;
  }
  return encode_krpc(reply);
}

std::set<Endpoint> dht_crawl(const InfoHash& ih, const GetPeersFn& get_peers, int stable_rounds,
                             int peers_per_response) {
  std::unordered_set<Endpoint, EndpointHash> seen;
  seen.reserve(256);
  int stable = 0;
  size_t k = std::max(1, peers_per_response);
  while (stable < stable_rounds) {
    size_t before = seen.size();
    size_t queries = 2 * ((std::max<size_t>(before, 1) + k - 1) / k);
    for (size_t q = 0; q < queries; ++q) {
      for (const Endpoint& e : get_peers(ih)) seen.insert(e);
    }
    stable = (seen.size() == before) ? stable + 1 : 0;
  }
  return std::set<Endpoint>(seen.begin(), seen.end());
}

// ---- World ----

namespace {

std::vector<overlay::Relay> make_relays(const ScenarioConfig& cfg) {
  std::vector<overlay::Relay> relays;
  relays.reserve(cfg.relay_count);
  for (int i = 0; i < cfg.relay_count; ++i) {
    overlay::Relay r;
    r.id = static_cast<overlay::RelayId>(i);
    r.ip = IpAddr::v4(13, static_cast<uint8_t>(i >> 8), static_cast<uint8_t>(i & 0xff), 1);
    r.is_exit = i < cfg.exit_relay_count;
    relays.push_back(r);
  }
  return relays;
}

uint16_t gen_port(const ScenarioConfig& cfg, Rng& rng) {
  if (cfg.popular_port_mass > 0 && rng.chance(cfg.popular_port_mass))
    return cfg.popular_ports[rng.below(cfg.popular_ports.size())];
  return static_cast<uint16_t>(1024 + rng.below(65535 - 1024 + 1));
}

// Validation must run before any member consumes the values.
const ScenarioConfig& validated(const ScenarioConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

int sample_torrent_size(const ScenarioConfig& cfg, Rng& rng) {
  double draw = rng.lognormal(std::log(cfg.torrent_size_median), cfg.torrent_size_sigma);
  return std::clamp(static_cast<int>(std::lround(draw)), 1, cfg.torrent_size_max);
}

World::World(const ScenarioConfig& cfg)
    : cfg_(validated(cfg)),
      rng_(cfg.seed.value_or(0)),
      net_(make_relays(cfg), cfg.circuit_pool_size, cfg.circuit_lifetime_s, rng_, ledger_),
      tracker_(rng_, cfg.tracker_peers_per_response, cfg.announce_interval_s,
               cfg.tracker_member_ttl_s),
      dht_(rng_, cfg.dht_node_count, cfg.dht_peers_per_response) {
  tracker_ep_ = Endpoint{IpAddr::v4(15, 0, 0, 1), 6969};
  listener_ep_ = Endpoint{IpAddr::v4(16, 0, 0, 1), 51000};
  for (const IpAddr& ip : net_.exit_ips()) exit_ip_list_.push_back(ip);
  for (overlay::RelayId id : tapped_exits()) net_.mark_tapped(id);
  net_.set_tcp_deliver([this](const Endpoint& dst, const Endpoint& src, const Bytes& p) {
    return tcp_deliver(dst, src, p);
  });
  net_.set_udp_deliver([this](const Endpoint& dst, const Endpoint& src, const Bytes& p) {
    return udp_deliver(dst, src, p);
  });
  build_population();
}

std::vector<overlay::RelayId> World::tapped_exits() const {
  std::vector<overlay::RelayId> out;
  for (int i = 0; i < cfg_.tapped_exit_count; ++i) out.push_back(static_cast<overlay::RelayId>(i));
  return out;
}

void World::set_observation_sink(overlay::ObservationSink sink) {
  net_.set_observation_sink(std::move(sink));
}

std::map<Endpoint, std::string> World::http_category_map() const {
  std::map<Endpoint, std::string> out;
  for (const HttpSite& s : http_sites_) out.emplace(s.ep, s.category);
  return out;
}

void World::build_population() {
  // torrents
  torrent_hashes_.reserve(cfg_.torrent_count);
  torrent_sizes_.reserve(cfg_.torrent_count);
  for (int i = 0; i < cfg_.torrent_count; ++i) {
    InfoHash ih;
    for (auto& b : ih.v) b = static_cast<uint8_t>(rng_.below(256));
    torrent_hashes_.push_back(ih);
    int size = cfg_.torrent_sizes.empty()
                   ? sample_torrent_size(cfg_, rng_)
                   : std::clamp(cfg_.torrent_sizes[i % cfg_.torrent_sizes.size()], 1,
                                cfg_.torrent_size_max);
    torrent_sizes_.push_back(size);
  }

  // http destinations
  std::vector<double> cat_w;
  for (const auto& [_, w] : cfg_.http_categories) cat_w.push_back(w);
  for (int i = 0; i < cfg_.http_destination_count; ++i) {
    HttpSite s;
    s.ep = Endpoint{IpAddr::v4(17, static_cast<uint8_t>(i >> 8), static_cast<uint8_t>(i & 0xff), 1),
                    80};
    s.category = cfg_.http_categories[rng_.weighted(cat_w)].first;
    http_sites_.push_back(s);
    hosts_.emplace(s.ep, std::make_pair(HostKind::Http, static_cast<uint32_t>(i)));
  }
  for (size_t i = 0; i < dht_.nodes().size(); ++i)
    dht_hosts_.emplace(dht_.nodes()[i].endpoint, i);

  // agents
  std::vector<double> profile_w;
  for (const ClientProfile& p : cfg_.profiles) profile_w.push_back(p.weight);
  std::vector<double> group_w;
  for (const GroupSpec& g : cfg_.groups) group_w.push_back(g.tor_weight);
  std::vector<double> baseline_w;
  for (const GroupSpec& g : cfg_.groups) baseline_w.push_back(std::max(g.baseline_weight, 0.0));
  std::vector<double> torrent_w;
  for (int s : torrent_sizes_) torrent_w.push_back(static_cast<double>(s));

  std::set<PeerId> used_ids;
  agents_.reserve(cfg_.peer_count);
  std::vector<int> assigned(cfg_.torrent_count, 0);
  for (int i = 0; i < cfg_.peer_count; ++i) {
    PeerAgent a;
    a.id = static_cast<overlay::ClientId>(i);
    a.endpoint = Endpoint{IpAddr::v4(11, static_cast<uint8_t>((i + 1) >> 16),
                                     static_cast<uint8_t>((i + 1) >> 8),
                                     static_cast<uint8_t>((i + 1) & 0xff)),
                          gen_port(cfg_, rng_)};
    {
      IpAddr v6;
      v6.is_v6 = true;
      v6.octets = {0x20, 0x01, 0x0d, 0xb8, 0, 0, 0, 0, 0, 0, 0, 0,
                   static_cast<uint8_t>((i + 1) >> 16), static_cast<uint8_t>((i + 1) >> 8),
                   static_cast<uint8_t>((i + 1) & 0xff), 1};
      a.ip6 = v6;
    }
    a.profile = static_cast<int>(rng_.weighted(profile_w));
    const ClientProfile& prof = cfg_.profiles[a.profile];
    do {
      Bytes suffix;
      for (int b = 0; b < 20 - static_cast<int>(prof.peer_id_tag.size()); ++b)
        suffix += static_cast<char>(rng_.below(256));
      a.peer_id = PeerId::make(prof.peer_id_tag, suffix);
    } while (!used_ids.insert(a.peer_id).second);
    if (rng_.chance(cfg_.no_tor_fraction)) {
      a.mode = UsageMode::NoTor;
    } else {
      size_t m = rng_.weighted(
          {cfg_.mode_tracker_only, cfg_.mode_content_and_tracker, cfg_.mode_peers_only});
      a.mode = m == 0 ? UsageMode::TrackerOnlyViaTor
                      : (m == 1 ? UsageMode::ContentAndTrackerViaTor : UsageMode::PeersOnlyViaTor);
    }
    a.group = cfg_.groups[rng_.weighted(group_w)].label;

    int want = static_cast<int>(rng_.range(cfg_.torrents_per_agent_min, cfg_.torrents_per_agent_max));
    want = std::min(want, cfg_.torrent_count);
    std::set<uint32_t> mine;
    int guard = 0;
    while (static_cast<int>(mine.size()) < want && guard++ < 100) {
      mine.insert(static_cast<uint32_t>(rng_.weighted(torrent_w)));
    }
    a.torrents.assign(mine.begin(), mine.end());
    for (uint32_t ti : a.torrents) assigned[ti]++;
    a.next_announce.assign(a.torrents.size(), 0);
    a.contacted.resize(a.torrents.size());

    if (cfg_.http_habit_fraction > 0 && rng_.chance(cfg_.http_habit_fraction) &&
        !http_sites_.empty()) {
      int sites = static_cast<int>(
          rng_.range(cfg_.http_sites_per_agent_min, cfg_.http_sites_per_agent_max));
      sites = std::min<int>(sites, static_cast<int>(http_sites_.size()));
      a.http_sites = rng_.sample_indices(http_sites_.size(), sites);
    }

    net_.register_client(a.id, a.endpoint.ip, a.ip6, a.endpoint.port, 0);
    hosts_.emplace(a.endpoint, std::make_pair(HostKind::Agent, static_cast<uint32_t>(i)));
    ip_groups_.emplace(a.endpoint.ip, a.group);
    ip_groups_.emplace(a.ip6, a.group);
    agents_.push_back(std::move(a));
  }

  // ambient members fill each torrent to its target size
  uint32_t bg_index = 0;
  for (int ti = 0; ti < cfg_.torrent_count; ++ti) {
    int fill = std::max(0, torrent_sizes_[ti] - assigned[ti]);
    for (int f = 0; f < fill; ++f) {
      BackgroundMember m;
      uint32_t n = ++bg_index;
      m.ep = Endpoint{IpAddr::v4(12, static_cast<uint8_t>(n >> 16), static_cast<uint8_t>(n >> 8),
                                 static_cast<uint8_t>(n & 0xff)),
                      gen_port(cfg_, rng_)};
      Bytes suffix;
      for (int b = 0; b < 12; ++b) suffix += static_cast<char>(rng_.below(256));
      m.peer_id = PeerId::make("-BG1000-", suffix);
      m.group = cfg_.groups[rng_.weighted(baseline_w)].label;
      tracker_.seed_member(torrent_hashes_[ti], m.ep);
      dht_.seed_peer(torrent_hashes_[ti], m.ep);
      hosts_.emplace(m.ep, std::make_pair(HostKind::Background,
                                          static_cast<uint32_t>(background_.size())));
      ip_groups_.emplace(m.ep.ip, m.group);
      background_.push_back(std::move(m));
    }
  }

  // initial wake-ups, staggered across one announce interval
  for (const PeerAgent& a : agents_) {
    int64_t t0 = static_cast<int64_t>(
        rng_.below(static_cast<uint64_t>(std::min(cfg_.announce_interval_s, cfg_.duration_s))));
    schedule(t0, EventKind::SessionStart, a.id, 0);
  }
}

void World::schedule(int64_t t, EventKind kind, uint32_t agent, uint32_t epoch) {
  queue_.push(Event{t, seq_++, kind, agent, epoch});
}

void World::run() {
  while (!queue_.empty()) {
    Event e = queue_.top();
    queue_.pop();
    if (e.t >= cfg_.duration_s) break;
    now_ = e.t;
    PeerAgent& a = agents_[e.agent];
    switch (e.kind) {
      case EventKind::SessionStart:
        on_session_start(a);
        break;
      case EventKind::SessionEnd:
        if (e.epoch == a.epoch) on_session_end(a);
        break;
      case EventKind::Tick:
        if (a.online && e.epoch == a.epoch) on_tick(a);
        break;
      case EventKind::Browse:
        if (a.online && e.epoch == a.epoch) on_browse(a);
        break;
    }
  }
}

void World::on_session_start(PeerAgent& a) {
  a.online = true;
  ++a.epoch;
  for (int64_t& t : a.next_announce) t = now_;
  int64_t online_for =
      std::max<int64_t>(1, std::llround(rng_.exponential(static_cast<double>(cfg_.session_online_mean_s))));
  schedule(now_ + online_for, EventKind::SessionEnd, a.id, a.epoch);
  on_tick(a);
  if (!a.http_sites.empty()) {
    int64_t dt = std::max<int64_t>(
        1, std::llround(rng_.exponential(static_cast<double>(cfg_.browse_interval_mean_s))));
    schedule(now_ + dt, EventKind::Browse, a.id, a.epoch);
  }
}

void World::on_session_end(PeerAgent& a) {
  a.online = false;
  int64_t gap = std::max<int64_t>(
      1, cfg_.session_offline_mean_s > 0
             ? std::llround(rng_.exponential(static_cast<double>(cfg_.session_offline_mean_s)))
             : 1);
  schedule(now_ + gap, EventKind::SessionStart, a.id, 0);
}

void World::on_tick(PeerAgent& a) {
  for (size_t ti = 0; ti < a.torrents.size(); ++ti) {
    if (now_ >= a.next_announce[ti]) {
      do_announce(a, ti);
      a.next_announce[ti] = now_ + cfg_.announce_interval_s;
    }
  }
  schedule(now_ + cfg_.announce_interval_s, EventKind::Tick, a.id, a.epoch);
}

void World::on_browse(PeerAgent& a) {
  if (a.mode != UsageMode::NoTor) do_browse_request(a);
  int64_t dt = std::max<int64_t>(
      1, std::llround(rng_.exponential(static_cast<double>(cfg_.browse_interval_mean_s))));
  schedule(now_ + dt, EventKind::Browse, a.id, a.epoch);
}

Bytes World::make_ip_field(const PeerAgent& a, bool announce) {
  const ClientProfile& p = cfg_.profiles[a.profile];
  if (announce) {
    size_t kind = rng_.weighted({p.announce_ip_public_w, p.announce_ip_private_w, p.announce_ip_invalid_w});
    if (kind == 0) {
      if (rng_.chance(p.announce_public_v6_prob)) return a.ip6.str();
      return a.endpoint.ip.str();
    }
    if (kind == 1)
      return "192.168." + std::to_string(rng_.below(256)) + "." + std::to_string(rng_.below(256));
    return "999." + std::to_string(rng_.below(256)) + ".0." + std::to_string(rng_.below(256));
  }
  size_t kind = rng_.weighted({p.ext_ip_exit_w, p.ext_ip_public_w, p.ext_ip_private_w});
  if (kind == 0 && !exit_ip_list_.empty())
    return exit_ip_list_[rng_.below(exit_ip_list_.size())].str();
  if (kind == 1) return a.endpoint.ip.str();
  return "10." + std::to_string(rng_.below(256)) + "." + std::to_string(rng_.below(256)) + ".1";
}

void World::do_announce(PeerAgent& a, size_t ti) {
  const InfoHash& ih = torrent_hashes_[a.torrents[ti]];
  const ClientProfile& prof = cfg_.profiles[a.profile];

  if (prof.dht_enabled) dht_announce(a, ti);  // UDP path first, as a real client would

  AnnounceRequest req;
  req.infohash = ih;
  req.peer_id = a.peer_id;
  req.port = a.endpoint.port;
  if (prof.announce_ip_prob > 0 && rng_.chance(prof.announce_ip_prob))
    req.ip_field = make_ip_field(a, true);
  Bytes wire = encode_announce_request(req);

  std::vector<Bytes> replies;
  if (tracker_via_tor(a.mode)) {
    overlay::StreamId s = net_.open_stream(a.id, tracker_ep_, now_, false);
    replies = net_.send(s, wire, now_);
    net_.close_stream(s);
  } else {
    replies = tcp_deliver(tracker_ep_, a.endpoint, wire);
  }

  if (replies.empty()) return;
  AnnounceResponse resp;
  try {
    resp = parse_announce_response(replies[0]);
  } catch (const MalformedInput&) {
    return;
  }
  int connected = 0;
  auto& memory = a.contacted[ti];
  for (const Endpoint& ep : resp.peers) {
    if (connected >= cfg_.connect_cap) break;
    if (ep == a.endpoint) continue;
    auto it = memory.find(ep);
    if (it != memory.end() && now_ - it->second < cfg_.contact_memory_ttl_s) continue;
    connect_to_peer(a, ti, ep);
    ++connected;
  }
}

void World::dht_announce(PeerAgent& a, size_t ti) {
  const InfoHash& ih = torrent_hashes_[a.torrents[ti]];
  // resolve the responsible node once per infohash (a client's routing table)
  auto route = dht_routing_.find(ih);
  Endpoint target;
  if (route != dht_routing_.end()) {
    target = route->second;
  } else {
    const auto& nodes = dht_.nodes();
    const Endpoint bootstrap = nodes[ih.v[0] % nodes.size()].endpoint;
    KrpcMessage fn;
    fn.transaction_id = "fn";
    FindNodeQuery q;
    std::copy(ih.v.begin(), ih.v.end(), q.target.begin());
    fn.kind = q;
    target = bootstrap;
    if (auto reply = net_.udp_send(a.id, bootstrap, encode_krpc(fn))) {
      try {
        KrpcMessage r = parse_krpc(*reply);
        if (const auto* fr = std::get_if<FindNodeResponse>(&r.kind)) {
          if (!fr->nodes.empty()) target = fr->nodes[0].endpoint;
        }
      } catch (const MalformedInput&) {
      }
    }
    dht_routing_.emplace(ih, target);
  }
  KrpcMessage ap;
  ap.transaction_id = "ap";
  ap.kind = AnnouncePeerQuery{ih, a.endpoint.port};
  net_.udp_send(a.id, target, encode_krpc(ap));
}

void World::connect_to_peer(PeerAgent& a, size_t ti, const Endpoint& ep) {
  auto& memory = a.contacted[ti];
  memory[ep] = now_;
  if (memory.size() > 64) {
    auto oldest = memory.begin();
    for (auto it = memory.begin(); it != memory.end(); ++it) {
      if (it->second < oldest->second) oldest = it;
    }
    memory.erase(oldest);
  }

  bool via_tor = peers_via_tor(a.mode);
  // A direct connection to an ordinary peer leaves no trace anywhere this
  // model cares about: no exit observation, no store change, and the peer's
  // reply dies with the connection. Only tunneled traffic and the attacker's
  // listener have observers.
  if (!via_tor && ep != listener_ep_) return;

  const InfoHash& ih = torrent_hashes_[a.torrents[ti]];
  const ClientProfile& prof = cfg_.profiles[a.profile];

  Handshake hs{ih, a.peer_id, 1ull << 20};
  ExtendedHandshake eh;
  eh.listen_port = a.endpoint.port;
  if (prof.ext_ip_prob > 0 && rng_.chance(prof.ext_ip_prob)) eh.self_ip = make_ip_field(a, false);
  eh.client_version = prof.name;
  eh.extensions.emplace("ut_pex", bencode::BValue(int64_t{1}));
  Bytes piece = encode_piece_message("blk:" + ih.hex().substr(0, 8));

  if (via_tor) {
    overlay::StreamId s = net_.open_stream(a.id, ep, now_, prof.encrypts_peer_traffic);
    net_.send(s, encode_handshake(hs), now_);
    net_.send(s, encode_extended_handshake(eh), now_);
    net_.send(s, piece, now_);
    net_.close_stream(s);
  } else {
    tcp_deliver(ep, a.endpoint, encode_handshake(hs));
    tcp_deliver(ep, a.endpoint, encode_extended_handshake(eh));
    tcp_deliver(ep, a.endpoint, piece);
  }
}

void World::do_browse_request(PeerAgent& a) {
  const HttpSite& site = http_sites_[a.http_sites[rng_.below(a.http_sites.size())]];
  Bytes req = "GET / HTTP/1.1\r\nHost: " + site.ep.ip.str() + "\r\n\r\n";
  overlay::StreamId s = net_.open_stream(a.id, site.ep, now_, false);
  net_.send(s, req, now_);
  net_.close_stream(s);
}

std::vector<Bytes> World::peer_respond(const PeerId& peer_id, uint16_t listen_port,
                                       const Bytes& payload) {
  if (!looks_like_handshake(payload)) return {};
  Handshake in;
  try {
    in = parse_handshake(payload);
  } catch (const MalformedInput&) {
    return {};
  }
  Handshake out{in.infohash, peer_id, 1ull << 20};
  ExtendedHandshake eh;
  eh.listen_port = listen_port;
  return {encode_handshake(out), encode_extended_handshake(eh)};
}

std::vector<Bytes> World::tcp_deliver(const Endpoint& dst, const Endpoint& src,
                                      const Bytes& payload) {
  if (dst == tracker_ep_) {
    if (!looks_like_announce_request(payload)) return {};
    AnnounceRequest req;
    try {
      req = parse_announce_request(payload);
    } catch (const MalformedInput&) {
      return {};
    }
    return {encode_announce_response(tracker_.handle_announce(req, src, now_))};
  }
  if (dst == listener_ep_) {
    if (listener_handler_) return listener_handler_(src, payload, now_);
    return {};
  }
  auto it = hosts_.find(dst);
  if (it == hosts_.end()) return {};
  switch (it->second.first) {
    case HostKind::Agent: {
      const PeerAgent& b = agents_[it->second.second];
      return peer_respond(b.peer_id, b.endpoint.port, payload);
    }
    case HostKind::Background: {
      const BackgroundMember& b = background_[it->second.second];
      return peer_respond(b.peer_id, b.ep.port, payload);
    }
    case HostKind::Http:
      if (payload.starts_with("GET ")) return {Bytes("HTTP/1.1 200 OK\r\nContent-Length: 0\r\n\r\n")};
      return {};
  }
  return {};
}

std::optional<Bytes> World::udp_deliver(const Endpoint& dst, const Endpoint& src,
                                        const Bytes& payload) {
  if (dht_hosts_.count(dst)) return dht_.handle_udp(dst, src, payload);
  return std::nullopt;
}

}  // namespace swarmtap::swarm
