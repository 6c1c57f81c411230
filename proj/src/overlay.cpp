#include "swarmtap/overlay.hpp"

#include <algorithm>

#include "swarmtap/error.hpp"

namespace swarmtap::overlay {

void GroundTruthLedger::register_client(ClientId id, IpAddr ip4, std::optional<IpAddr> ip6) {
  clients_.emplace(id, ClientTruth{ip4, ip6});
}

void GroundTruthLedger::bind_stream(StreamId id, ClientId client) {
  if (id != stream_owner_.size()) throw IoFailure("ledger: stream ids must bind once, in order");
  stream_owner_.push_back(client);
}

void GroundTruthLedger::bind_circuit(CircuitId id, ClientId client) {
  if (id != circuit_owner_.size()) throw IoFailure("ledger: circuit ids must bind once, in order");
  circuit_owner_.push_back(client);
}

const GroundTruthLedger::ClientTruth* GroundTruthLedger::client_truth(ClientId id) const {
  auto it = clients_.find(id);
  return it == clients_.end() ? nullptr : &it->second;
}

std::optional<ClientId> GroundTruthLedger::stream_client(StreamId id) const {
  if (id >= stream_owner_.size()) return std::nullopt;
  return stream_owner_[id];
}

std::optional<ClientId> GroundTruthLedger::circuit_client(CircuitId id) const {
  if (id >= circuit_owner_.size()) return std::nullopt;
  return circuit_owner_[id];
}

Network::Network(std::vector<Relay> relays, int circuit_pool_size, int64_t circuit_lifetime_s,
                 Rng& rng, GroundTruthLedger& ledger)
    : relays_(std::move(relays)),
      pool_size_(circuit_pool_size),
      lifetime_(circuit_lifetime_s),
      rng_(rng),
      ledger_(ledger) {
  for (size_t i = 0; i < relays_.size(); ++i) {
    if (relays_[i].id != i) throw NoRelaysAvailable("relay ids must be dense vector positions");
    if (relays_[i].is_exit) exit_index_.push_back(i);
  }
}

void Network::add_tap(RelayId exit_relay, Tap* tap) {
  tapped_.insert(exit_relay);
  taps_[exit_relay].push_back(tap);
}

std::set<IpAddr> Network::exit_ips() const {
  std::set<IpAddr> out;
  for (size_t i : exit_index_) out.insert(relays_[i].ip);
  return out;
}

CircuitId Network::build_circuit(ClientId client, int64_t now) {
  if (exit_index_.empty()) throw NoRelaysAvailable("no exit relays in scenario");
  size_t exit = exit_index_[rng_.below(exit_index_.size())];
  size_t h1 = rng_.below(relays_.size());
  while (h1 == exit) h1 = rng_.below(relays_.size());
  size_t h2 = rng_.below(relays_.size());
  while (h2 == exit || h2 == h1) h2 = rng_.below(relays_.size());

  CircuitState c;
  c.id = next_circuit_++;
  c.client = client;
  c.hops = {relays_[h1].id, relays_[h2].id, relays_[exit].id};
  c.created_at = now;
  ledger_.bind_circuit(c.id, client);
  CircuitId id = c.id;
  circuits_.emplace(id, c);
  return id;
}

void Network::register_client(ClientId id, IpAddr ip4, std::optional<IpAddr> ip6,
                              uint16_t udp_port, int64_t now) {
  ClientState cs;
  cs.ip4 = ip4;
  cs.ip6 = ip6;
  cs.udp_port = udp_port;
  ledger_.register_client(id, ip4, ip6);
  clients_.emplace(id, std::move(cs));
  auto& ref = clients_.at(id);
  for (int i = 0; i < pool_size_; ++i) ref.pool.push_back(build_circuit(id, now));
}

StreamId Network::open_stream(ClientId client, const Endpoint& dst, int64_t now, bool encrypted) {
  ClientState& cs = clients_.at(client);

  std::vector<CircuitId> eligible;
  for (CircuitId id : cs.live) {
    const CircuitState& c = circuits_.at(id);
    if (now - c.first_stream_at < lifetime_) {
      eligible.push_back(id);
    } else {
      circuits_.erase(id);  // aged out; never eligible again
    }
  }
  cs.live = eligible;

  CircuitId cid;
  if (!eligible.empty()) {
    cid = eligible[cs.rr++ % eligible.size()];
  } else {
    if (cs.pool.empty()) cs.pool.push_back(build_circuit(client, now));
    cid = cs.pool.front();
    cs.pool.erase(cs.pool.begin());
    circuits_.at(cid).first_stream_at = now;
    cs.live.push_back(cid);
    while (static_cast<int>(cs.pool.size()) < pool_size_)
      cs.pool.push_back(build_circuit(client, now));
  }

  StreamInfo s;
  s.id = next_stream_++;
  s.circuit = cid;
  s.exit = circuits_.at(cid).hops[2];
  s.destination = dst;
  s.opened_at = now;
  s.encrypted = encrypted;
  ledger_.bind_stream(s.id, client);
  StreamId id = s.id;
  streams_.emplace(id, s);
  return id;
}

void Network::emit(ExitObservation& obs, bool to_client) {
  if (!tapped_.count(obs.exit_relay)) return;
  auto it = taps_.find(obs.exit_relay);
  if (it != taps_.end()) {
    for (Tap* tap : it->second) {
      if (to_client) {
        tap->on_to_client(obs);
      } else {
        tap->on_to_destination(obs);
      }
    }
  }
  if (sink_) sink_(obs);
}

std::vector<Bytes> Network::send(StreamId id, const Bytes& payload, int64_t now) {
  auto it = streams_.find(id);
  if (it == streams_.end()) throw StreamClosed("send on closed stream");
  const StreamInfo& s = it->second;

  const Relay& exit = relays_[s.exit];  // relay ids are vector positions
  Endpoint exit_src{exit.ip, static_cast<uint16_t>(49152 + s.id % 16384)};
  bool tapped = tapped_.count(s.exit) > 0;

  if (tapped) {
    ExitObservation out;
    out.time = now;
    out.exit_relay = s.exit;
    out.circuit_id = s.circuit;
    out.stream_id = s.id;
    out.destination = s.destination;
    out.direction = Direction::ToDestination;
    out.payload_encrypted = s.encrypted;
    out.payload = payload;
    emit(out, false);
  }

  std::vector<Bytes> replies;
  if (tcp_deliver_) replies = tcp_deliver_(s.destination, exit_src, payload);

  if (!tapped) return replies;

  std::vector<Bytes> delivered;
  delivered.reserve(replies.size());
  for (Bytes& r : replies) {
    ExitObservation back;
    back.time = now;
    back.exit_relay = s.exit;
    back.circuit_id = s.circuit;
    back.stream_id = s.id;
    back.destination = s.destination;
    back.direction = Direction::ToClient;
    back.payload_encrypted = s.encrypted;
    back.payload = std::move(r);
    emit(back, true);  // taps may rewrite; the client gets what the tap forwarded
    delivered.push_back(std::move(back.payload));
  }
  return delivered;
}

void Network::close_stream(StreamId id) { streams_.erase(id); }

std::optional<Bytes> Network::udp_send(ClientId client, const Endpoint& dst, const Bytes& payload) {
  const ClientState& cs = clients_.at(client);
  if (!udp_deliver_) return std::nullopt;
  return udp_deliver_(dst, Endpoint{cs.ip4, cs.udp_port}, payload);
}

const StreamInfo& Network::stream_info(StreamId id) const {
  auto it = streams_.find(id);
  if (it == streams_.end()) throw StreamClosed("stream_info on closed stream");
  return it->second;
}

}  // namespace swarmtap::overlay
