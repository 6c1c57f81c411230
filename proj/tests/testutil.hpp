#pragma once

// Shared deterministic generators for the property suites.

#include <string>
#include <vector>

#include "swarmtap/bencode.hpp"
#include "swarmtap/btwire.hpp"
#include "swarmtap/rng.hpp"

namespace testutil {

using namespace swarmtap;

inline Bytes gen_bytes(Rng& rng, size_t max_len) {
  size_t n = rng.below(max_len + 1);
  Bytes out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out += static_cast<char>(rng.below(256));
  return out;
}

inline bencode::BValue gen_bvalue(Rng& rng, int depth = 0) {
  uint64_t pick = depth >= 4 ? rng.below(2) : rng.below(4);
  switch (pick) {
    case 0:
      return bencode::BValue(static_cast<int64_t>(rng.next()));
    case 1:
      return bencode::BValue(gen_bytes(rng, 24));
    case 2: {
      bencode::BList l;
      size_t n = rng.below(4);
      for (size_t i = 0; i < n; ++i) l.push_back(gen_bvalue(rng, depth + 1));
      return bencode::BValue(std::move(l));
    }
    default: {
      bencode::BDict d;
      size_t n = rng.below(4);
      for (size_t i = 0; i < n; ++i) d.emplace(gen_bytes(rng, 12), gen_bvalue(rng, depth + 1));
      return bencode::BValue(std::move(d));
    }
  }
}

inline IpAddr gen_ipv4(Rng& rng) {
  return IpAddr::v4_from_u32(static_cast<uint32_t>(rng.next()));
}

inline Endpoint gen_endpoint(Rng& rng) {
  return Endpoint{gen_ipv4(rng), static_cast<uint16_t>(rng.below(65536))};
}

inline btwire::InfoHash gen_infohash(Rng& rng) {
  btwire::InfoHash h;
  for (auto& b : h.v) b = static_cast<uint8_t>(rng.below(256));
  return h;
}

inline btwire::PeerId gen_peer_id(Rng& rng) {
  btwire::PeerId p;
  for (auto& b : p.v) b = static_cast<uint8_t>(rng.below(256));
  return p;
}

inline btwire::NodeId gen_node_id(Rng& rng) {
  btwire::NodeId id;
  for (auto& b : id) b = static_cast<uint8_t>(rng.below(256));
  return id;
}

inline btwire::AnnounceRequest gen_announce_request(Rng& rng) {
  btwire::AnnounceRequest req;
  req.infohash = gen_infohash(rng);
  req.peer_id = gen_peer_id(rng);
  req.port = static_cast<uint16_t>(rng.below(65536));
  req.uploaded = static_cast<int64_t>(rng.below(1 << 30));
  req.downloaded = static_cast<int64_t>(rng.below(1 << 30));
  req.left = static_cast<int64_t>(rng.below(1 << 30));
  req.event = static_cast<int64_t>(rng.below(4));
  if (rng.chance(0.5)) {
    switch (rng.below(4)) {
      case 0: req.ip_field = "192.168." + std::to_string(rng.below(256)) + "." + std::to_string(rng.below(256)); break;
      case 1: req.ip_field = gen_ipv4(rng).str(); break;
      case 2: req.ip_field = "999." + std::to_string(rng.below(999)) + ".1.1"; break;
      default: req.ip_field = "2001:db8::" + std::to_string(rng.below(9999) + 1); break;
    }
  }
  if (rng.chance(0.3)) req.extra.emplace_back("numwant", std::to_string(rng.below(200)));
  if (rng.chance(0.2)) req.extra.emplace_back("key", gen_bytes(rng, 8));
  return req;
}

inline btwire::Handshake gen_handshake(Rng& rng) {
  return btwire::Handshake{gen_infohash(rng), gen_peer_id(rng), rng.next()};
}

inline btwire::ExtendedHandshake gen_extended_handshake(Rng& rng) {
  btwire::ExtendedHandshake eh;
  if (rng.chance(0.8)) eh.listen_port = static_cast<uint16_t>(rng.below(65536));
  if (rng.chance(0.5)) eh.self_ip = gen_ipv4(rng).str();
  if (rng.chance(0.5)) eh.client_version = "client/" + std::to_string(rng.below(100));
  eh.extensions.emplace("ut_pex", bencode::BValue(static_cast<int64_t>(1 + rng.below(4))));
  return eh;
}

inline std::vector<Endpoint> gen_endpoints(Rng& rng, size_t max_n) {
  std::vector<Endpoint> out(rng.below(max_n + 1));
  for (auto& e : out) e = gen_endpoint(rng);
  return out;
}

inline btwire::KrpcMessage gen_krpc(Rng& rng) {
  btwire::KrpcMessage msg;
  msg.transaction_id = gen_bytes(rng, 4);
  if (msg.transaction_id.empty()) msg.transaction_id = "aa";
  switch (rng.below(6)) {
    case 0:
      msg.kind = btwire::FindNodeQuery{gen_node_id(rng)};
      break;
    case 1: {
      btwire::FindNodeResponse r;
      size_t n = rng.below(5);
      for (size_t i = 0; i < n; ++i) r.nodes.push_back({gen_node_id(rng), gen_endpoint(rng)});
      msg.kind = std::move(r);
      break;
    }
    case 2:
      msg.kind = btwire::GetPeersQuery{gen_infohash(rng)};
      break;
    case 3: {
      btwire::GetPeersResponse r;
      r.token = "tk" + std::to_string(rng.below(1000));
      if (rng.chance(0.7)) {
        r.endpoints = gen_endpoints(rng, 8);
      } else {
        size_t n = rng.below(4);
        for (size_t i = 0; i < n; ++i) r.closer_nodes.push_back({gen_node_id(rng), gen_endpoint(rng)});
      }
      msg.kind = std::move(r);
      break;
    }
    case 4:
      msg.kind = btwire::AnnouncePeerQuery{gen_infohash(rng), static_cast<uint16_t>(rng.below(65536))};
      break;
    default:
      msg.kind = btwire::KrpcError{203, "bad token"};
      break;
  }
  return msg;
}

}  // namespace testutil
