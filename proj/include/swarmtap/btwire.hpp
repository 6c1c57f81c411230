#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string_view>
#include <variant>
#include <vector>

#include "swarmtap/bencode.hpp"
#include "swarmtap/bytes.hpp"
#include "swarmtap/ip.hpp"

namespace swarmtap::btwire {

struct InfoHash {
  std::array<uint8_t, 20> v{};

  static InfoHash from_bytes(std::string_view raw);  // throws unless 20 octets
  Bytes bytes() const { return Bytes(reinterpret_cast<const char*>(v.data()), v.size()); }
  std::string hex() const;

  auto operator<=>(const InfoHash&) const = default;
};

// 20 octets: printable client tag followed by an opaque suffix.
struct PeerId {
  std::array<uint8_t, 20> v{};

  static PeerId from_bytes(std::string_view raw);
  static PeerId make(std::string_view client_tag, std::string_view suffix);
  Bytes bytes() const { return Bytes(reinterpret_cast<const char*>(v.data()), v.size()); }
  std::string client_tag() const;  // leading printable run

  auto operator<=>(const PeerId&) const = default;
};

enum class IpClass { Empty, Invalid, Private, PublicExit, PublicNonExit };
const char* to_string(IpClass c);

// Total classification of a raw textual IP field against the published exit
// set. Unspecified addresses (0.0.0.0, ::) count as Invalid.
IpClass classify_ip(std::string_view raw, const std::set<IpAddr>& exit_ips);
// Same partition, plus the parsed address for the classes that have one.
struct ClassifiedIp {
  IpClass cls = IpClass::Empty;
  std::optional<IpAddr> addr;
};
ClassifiedIp classify_ip_detail(std::string_view raw, const std::set<IpAddr>& exit_ips);

// ---- tracker announce (HTTP GET request line + bencoded response) ----

struct AnnounceRequest {
  InfoHash infohash;
  PeerId peer_id;
  uint16_t port = 0;
  Bytes ip_field;  // raw octets of the optional ip= value; empty = absent
  int64_t uploaded = 0;
  int64_t downloaded = 0;
  int64_t left = 0;
  int64_t event = 0;
  // Unknown query keys, preserved in order and re-emitted verbatim.
  std::vector<std::pair<Bytes, Bytes>> extra;

  bool operator==(const AnnounceRequest&) const = default;
};

Bytes encode_announce_request(const AnnounceRequest& req);
AnnounceRequest parse_announce_request(std::string_view line);
bool looks_like_announce_request(std::string_view payload);

struct AnnounceResponse {
  int64_t interval = 1800;
  std::vector<Endpoint> peers;  // order is meaningful

  bool operator==(const AnnounceResponse&) const = default;
};

Bytes encode_announce_response(const AnnounceResponse& resp);
AnnounceResponse parse_announce_response(std::string_view data);

// ---- compact peer list (IPv4 only, 4 + 2 octets big-endian per entry) ----

Bytes encode_compact_peers(const std::vector<Endpoint>& peers);
std::vector<Endpoint> decode_compact_peers(std::string_view data);

// ---- peer wire: handshake, extension handshake, piece token ----

struct Handshake {
  InfoHash infohash;
  PeerId peer_id;
  uint64_t extension_bits = 1ull << 20;  // extension protocol flag

  bool operator==(const Handshake&) const = default;
};

// Fixed 68-octet layout: 19, "BitTorrent protocol", 8 reserved, infohash, peer id.
Bytes encode_handshake(const Handshake& hs);
Handshake parse_handshake(std::string_view data);
bool looks_like_handshake(std::string_view payload);

struct ExtendedHandshake {
  std::optional<uint16_t> listen_port;  // "p"
  Bytes self_ip;                        // "ipv4": raw octets of the self-reported IP; empty = absent
  std::string client_version;           // "v"; empty = absent
  bencode::BDict extensions;            // "m"

  bool operator==(const ExtendedHandshake&) const = default;
};

// Framed like a peer-wire extension message: u32 length, id 20, ext id 0,
// bencoded dict.
Bytes encode_extended_handshake(const ExtendedHandshake& eh);
ExtendedHandshake parse_extended_handshake(std::string_view data);
bool looks_like_extended_handshake(std::string_view payload);

// One-token stand-in for content transfer: u32 length, id 7, token octets.
Bytes encode_piece_message(std::string_view token);
std::optional<Bytes> parse_piece_message(std::string_view data);

// ---- KRPC (bencoded DHT messages over UDP) ----

using NodeId = std::array<uint8_t, 20>;

struct NodeInfo {
  NodeId node_id{};
  Endpoint endpoint;

  bool operator==(const NodeInfo&) const = default;
};

struct FindNodeQuery {
  NodeId target{};
  bool operator==(const FindNodeQuery&) const = default;
};
struct FindNodeResponse {
  std::vector<NodeInfo> nodes;
  bool operator==(const FindNodeResponse&) const = default;
};
struct GetPeersQuery {
  InfoHash infohash;
  bool operator==(const GetPeersQuery&) const = default;
};
// Carries the standard token so responses stay distinguishable from
// find_node responses when only closer nodes are returned.
struct GetPeersResponse {
  Bytes token;
  std::vector<Endpoint> endpoints;
  std::vector<NodeInfo> closer_nodes;  // used when endpoints is empty
  bool operator==(const GetPeersResponse&) const = default;
};
struct AnnouncePeerQuery {
  InfoHash infohash;
  uint16_t port = 0;
  bool operator==(const AnnouncePeerQuery&) const = default;
};
struct KrpcError {
  int64_t code = 0;
  std::string text;
  bool operator==(const KrpcError&) const = default;
};

struct KrpcMessage {
  Bytes transaction_id;
  std::variant<FindNodeQuery, FindNodeResponse, GetPeersQuery, GetPeersResponse,
               AnnouncePeerQuery, KrpcError>
      kind;

  bool operator==(const KrpcMessage&) const = default;
};

Bytes encode_krpc(const KrpcMessage& msg);
KrpcMessage parse_krpc(std::string_view data);

}  // namespace swarmtap::btwire
