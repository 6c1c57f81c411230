#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "swarmtap/bytes.hpp"
#include "swarmtap/ip.hpp"
#include "swarmtap/rng.hpp"

namespace swarmtap::adversary {
class Evaluator;
}

namespace swarmtap::overlay {

using ClientId = uint32_t;
using RelayId = uint32_t;
using CircuitId = uint64_t;
using StreamId = uint64_t;

struct Relay {
  RelayId id = 0;
  IpAddr ip;
  bool is_exit = false;
};

enum class Direction { ToDestination, ToClient };

// What a tapped exit legally sees: no client identity, no client address.
// Client addresses can still appear inside application payloads; that leak is
// the adversary's whole game.
struct ExitObservation {
  int64_t time = 0;
  RelayId exit_relay = 0;
  CircuitId circuit_id = 0;
  StreamId stream_id = 0;
  Endpoint destination;
  Direction direction = Direction::ToDestination;
  bool payload_encrypted = false;
  Bytes payload;
};

// Exit-node instrumentation. to-client traffic may be rewritten in place
// (man-in-the-middle position); to-destination traffic is read-only.
class Tap {
 public:
  virtual ~Tap() = default;
  virtual void on_to_destination(const ExitObservation& obs) = 0;
  virtual void on_to_client(ExitObservation& obs) = 0;
};

// Sealed record of true stream/circuit ownership. Writing is the simulator's
// job; reading is private and granted only to the evaluator, so adversary
// code compiled against this header cannot consult it.
class GroundTruthLedger {
 public:
  void register_client(ClientId id, IpAddr ip4, std::optional<IpAddr> ip6);
  void bind_stream(StreamId id, ClientId client);    // write-once, in id order
  void bind_circuit(CircuitId id, ClientId client);  // write-once, in id order

 private:
  struct ClientTruth {
    IpAddr ip4;
    std::optional<IpAddr> ip6;
  };

  const ClientTruth* client_truth(ClientId id) const;
  std::optional<ClientId> stream_client(StreamId id) const;
  std::optional<ClientId> circuit_client(CircuitId id) const;
  size_t stream_count() const { return stream_owner_.size(); }

  std::map<ClientId, ClientTruth> clients_;
  std::vector<ClientId> stream_owner_;   // index = StreamId
  std::vector<ClientId> circuit_owner_;  // index = CircuitId

  friend class ::swarmtap::adversary::Evaluator;
};

struct StreamInfo {
  StreamId id = 0;
  CircuitId circuit = 0;
  RelayId exit = 0;
  Endpoint destination;
  int64_t opened_at = 0;
  bool encrypted = false;
};

// Delivery callbacks are installed by the world: the overlay does transport
// and observation, not application routing.
using TcpDeliverFn =
    std::function<std::vector<Bytes>(const Endpoint& dst, const Endpoint& src, const Bytes& payload)>;
using UdpDeliverFn =
    std::function<std::optional<Bytes>(const Endpoint& dst, const Endpoint& src, const Bytes& payload)>;
using ObservationSink = std::function<void(const ExitObservation&)>;

class Network {
 public:
  Network(std::vector<Relay> relays, int circuit_pool_size, int64_t circuit_lifetime_s, Rng& rng,
          GroundTruthLedger& ledger);

  void set_tcp_deliver(TcpDeliverFn fn) { tcp_deliver_ = std::move(fn); }
  void set_udp_deliver(UdpDeliverFn fn) { udp_deliver_ = std::move(fn); }
  void set_observation_sink(ObservationSink fn) { sink_ = std::move(fn); }
  // Observations exist only at tapped exits; taps additionally see (and for
  // to-client traffic may rewrite) them.
  void mark_tapped(RelayId exit_relay) { tapped_.insert(exit_relay); }
  void add_tap(RelayId exit_relay, Tap* tap);

  void register_client(ClientId id, IpAddr ip4, std::optional<IpAddr> ip6, uint16_t udp_port,
                       int64_t now);

  const std::vector<Relay>& relays() const { return relays_; }
  std::set<IpAddr> exit_ips() const;

  // Attaches to the client's current circuit while its first stream is
  // younger than the circuit lifetime; otherwise promotes a preemptively
  // built circuit. Several eligible circuits are served round-robin.
  StreamId open_stream(ClientId client, const Endpoint& dst, int64_t now, bool encrypted = false);

  // Delivers through the exit (source = exit IP + ephemeral port), feeds the
  // exit taps, and returns the destination's replies as seen by the client.
  std::vector<Bytes> send(StreamId id, const Bytes& payload, int64_t now);

  void close_stream(StreamId id);

  // Direct datagram path: bypasses every circuit, reveals the client's real
  // address to the destination, produces no observation.
  std::optional<Bytes> udp_send(ClientId client, const Endpoint& dst, const Bytes& payload);

  const StreamInfo& stream_info(StreamId id) const;  // open streams only
  uint64_t circuits_built() const { return next_circuit_; }
  uint64_t streams_opened() const { return next_stream_; }

 private:
  struct CircuitState {
    CircuitId id = 0;
    ClientId client = 0;
    std::array<RelayId, 3> hops{};
    int64_t created_at = 0;
    int64_t first_stream_at = -1;
  };
  struct ClientState {
    IpAddr ip4;
    std::optional<IpAddr> ip6;
    uint16_t udp_port = 0;
    std::vector<CircuitId> live;  // circuits carrying streams, youngest-first
    std::vector<CircuitId> pool;  // pristine, preemptively built
    uint64_t rr = 0;
  };

  CircuitId build_circuit(ClientId client, int64_t now);
  void emit(ExitObservation& obs, bool to_client);

  std::vector<Relay> relays_;
  std::vector<size_t> exit_index_;
  int pool_size_;
  int64_t lifetime_;
  Rng& rng_;
  GroundTruthLedger& ledger_;
  TcpDeliverFn tcp_deliver_;
  UdpDeliverFn udp_deliver_;
  ObservationSink sink_;
  std::set<RelayId> tapped_;
  std::map<RelayId, std::vector<Tap*>> taps_;
  std::map<ClientId, ClientState> clients_;
  std::map<CircuitId, CircuitState> circuits_;       // live + pooled only
  std::unordered_map<StreamId, StreamInfo> streams_;  // open only, id-keyed
  uint64_t next_circuit_ = 0;
  uint64_t next_stream_ = 0;
};

}  // namespace swarmtap::overlay
