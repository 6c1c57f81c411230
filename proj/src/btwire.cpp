#include "swarmtap/btwire.hpp"

#include <algorithm>
#include <cstring>

#include "swarmtap/error.hpp"

namespace swarmtap::btwire {

namespace {

constexpr std::string_view kProtocol = "BitTorrent protocol";
constexpr char kHexUpper[] = "0123456789ABCDEF";

[[noreturn]] void fail(const char* why) { throw MalformedInput(why); }

bool unreserved(unsigned char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
         c == '-' || c == '.' || c == '_' || c == '~';
}

void url_escape(std::string_view raw, Bytes& out) {
  for (unsigned char c : raw) {
    if (unreserved(c)) {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHexUpper[c >> 4];
      out += kHexUpper[c & 0xf];
    }
  }
}

int hexv(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

Bytes url_unescape(std::string_view s) {
  Bytes out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%') {
      if (i + 2 >= s.size()) fail("announce: truncated percent escape");
      int hi = hexv(s[i + 1]);
      int lo = hexv(s[i + 2]);
      if (hi < 0 || lo < 0) fail("announce: bad percent escape");
      out += static_cast<char>((hi << 4) | lo);
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

int64_t parse_i64(std::string_view s, const char* what) {
  if (s.empty()) fail(what);
  bool neg = false;
  size_t i = 0;
  if (s[0] == '-') {
    neg = true;
    i = 1;
    if (s.size() == 1) fail(what);
  }
  uint64_t limit = neg ? static_cast<uint64_t>(INT64_MAX) + 1 : static_cast<uint64_t>(INT64_MAX);
  uint64_t n = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') fail(what);
    uint64_t d = static_cast<uint64_t>(s[i] - '0');
    if (n > (limit - d) / 10) fail(what);
    n = n * 10 + d;
  }
  return neg ? -static_cast<int64_t>(n - 1) - 1 : static_cast<int64_t>(n);
}

uint16_t parse_port(std::string_view s) {
  int64_t p = parse_i64(s, "announce: bad port");
  if (p < 0 || p > 65535) fail("announce: port out of range");
  return static_cast<uint16_t>(p);
}

void put_u16_be(uint16_t v, Bytes& out) {
  out += static_cast<char>(v >> 8);
  out += static_cast<char>(v & 0xff);
}

void put_u32_be(uint32_t v, Bytes& out) {
  out += static_cast<char>(v >> 24);
  out += static_cast<char>((v >> 16) & 0xff);
  out += static_cast<char>((v >> 8) & 0xff);
  out += static_cast<char>(v & 0xff);
}

uint32_t get_u32_be(std::string_view s, size_t off) {
  return (static_cast<uint32_t>(static_cast<unsigned char>(s[off])) << 24) |
         (static_cast<uint32_t>(static_cast<unsigned char>(s[off + 1])) << 16) |
         (static_cast<uint32_t>(static_cast<unsigned char>(s[off + 2])) << 8) |
         static_cast<uint32_t>(static_cast<unsigned char>(s[off + 3]));
}

}  // namespace

InfoHash InfoHash::from_bytes(std::string_view raw) {
  if (raw.size() != 20) fail("infohash must be 20 octets");
  InfoHash h;
  std::memcpy(h.v.data(), raw.data(), 20);
  return h;
}

std::string InfoHash::hex() const {
  return to_hex(std::string_view(reinterpret_cast<const char*>(v.data()), v.size()));
}

PeerId PeerId::from_bytes(std::string_view raw) {
  if (raw.size() != 20) fail("peer id must be 20 octets");
  PeerId p;
  std::memcpy(p.v.data(), raw.data(), 20);
  return p;
}

PeerId PeerId::make(std::string_view client_tag, std::string_view suffix) {
  if (client_tag.size() + suffix.size() != 20) fail("peer id parts must total 20 octets");
  PeerId p;
  std::memcpy(p.v.data(), client_tag.data(), client_tag.size());
  std::memcpy(p.v.data() + client_tag.size(), suffix.data(), suffix.size());
  return p;
}

std::string PeerId::client_tag() const {
  std::string out;
  for (uint8_t c : v) {
    if (c < 0x20 || c > 0x7e) break;
    out += static_cast<char>(c);
  }
  return out;
}

const char* to_string(IpClass c) {
  switch (c) {
    case IpClass::Empty: return "empty";
    case IpClass::Invalid: return "invalid";
    case IpClass::Private: return "private";
    case IpClass::PublicExit: return "public_exit";
    case IpClass::PublicNonExit: return "public";
  }
  return "?";
}

ClassifiedIp classify_ip_detail(std::string_view raw, const std::set<IpAddr>& exit_ips) {
  if (raw.empty()) return {IpClass::Empty, std::nullopt};
  auto ip = IpAddr::parse(raw);
  if (!ip || ip->is_unspecified()) return {IpClass::Invalid, std::nullopt};
  if (ip->is_private()) return {IpClass::Private, ip};
  if (exit_ips.count(*ip)) return {IpClass::PublicExit, ip};
  return {IpClass::PublicNonExit, ip};
}

IpClass classify_ip(std::string_view raw, const std::set<IpAddr>& exit_ips) {
  return classify_ip_detail(raw, exit_ips).cls;
}

// ---- announce ----

Bytes encode_announce_request(const AnnounceRequest& req) {
  Bytes out = "GET /announce?info_hash=";
  url_escape(req.infohash.bytes(), out);
  out += "&peer_id=";
  url_escape(req.peer_id.bytes(), out);
  out += "&port=" + std::to_string(req.port);
  out += "&uploaded=" + std::to_string(req.uploaded);
  out += "&downloaded=" + std::to_string(req.downloaded);
  out += "&left=" + std::to_string(req.left);
  out += "&event=" + std::to_string(req.event);
  if (!req.ip_field.empty()) {
    out += "&ip=";
    url_escape(req.ip_field, out);
  }
  for (const auto& [k, v] : req.extra) {
    out += '&';
    url_escape(k, out);
    out += '=';
    url_escape(v, out);
  }
  out += " HTTP/1.1\r\n";
  return out;
}

bool looks_like_announce_request(std::string_view payload) {
  return payload.starts_with("GET ") && payload.find("info_hash=") != std::string_view::npos;
}

AnnounceRequest parse_announce_request(std::string_view line) {
  if (!line.starts_with("GET ")) fail("announce: not a GET request line");
  constexpr std::string_view kSuffix = " HTTP/1.1\r\n";
  if (!line.ends_with(kSuffix)) fail("announce: missing HTTP version suffix");
  std::string_view target = line.substr(4, line.size() - 4 - kSuffix.size());
  size_t q = target.find('?');
  if (q == std::string_view::npos) fail("announce: missing query string");
  std::string_view query = target.substr(q + 1);

  AnnounceRequest req;
  bool saw_infohash = false, saw_peer_id = false, saw_port = false;
  while (!query.empty()) {
    size_t amp = query.find('&');
    std::string_view pair = query.substr(0, amp);
    query = (amp == std::string_view::npos) ? std::string_view{} : query.substr(amp + 1);
    size_t eq = pair.find('=');
    if (eq == std::string_view::npos) fail("announce: query pair without '='");
    Bytes key = url_unescape(pair.substr(0, eq));
    Bytes val = url_unescape(pair.substr(eq + 1));
    if (key == "info_hash") {
      if (saw_infohash) fail("announce: duplicate info_hash");
      req.infohash = InfoHash::from_bytes(val);
      saw_infohash = true;
    } else if (key == "peer_id") {
      if (saw_peer_id) fail("announce: duplicate peer_id");
      req.peer_id = PeerId::from_bytes(val);
      saw_peer_id = true;
    } else if (key == "port") {
      if (saw_port) fail("announce: duplicate port");
      req.port = parse_port(val);
      saw_port = true;
    } else if (key == "uploaded") {
      req.uploaded = parse_i64(val, "announce: bad uploaded");
    } else if (key == "downloaded") {
      req.downloaded = parse_i64(val, "announce: bad downloaded");
    } else if (key == "left") {
      req.left = parse_i64(val, "announce: bad left");
    } else if (key == "event") {
      req.event = parse_i64(val, "announce: bad event");
    } else if (key == "ip") {
      req.ip_field = val;
    } else {
      req.extra.emplace_back(std::move(key), std::move(val));
    }
  }
  if (!saw_infohash || !saw_peer_id || !saw_port) fail("announce: missing mandatory key");
  return req;
}

Bytes encode_announce_response(const AnnounceResponse& resp) {
  bencode::BDict d;
  d.emplace("interval", bencode::BValue(resp.interval));
  d.emplace("peers", bencode::BValue(encode_compact_peers(resp.peers)));
  return bencode::encode(bencode::BValue(std::move(d)));
}

AnnounceResponse parse_announce_response(std::string_view data) {
  bencode::BValue v = bencode::decode(data);
  const bencode::BValue* interval = v.find("interval");
  const bencode::BValue* peers = v.find("peers");
  if (!interval || !peers) fail("announce response: missing key");
  AnnounceResponse resp;
  resp.interval = interval->as_integer();
  if (resp.interval <= 0) fail("announce response: non-positive interval");
  resp.peers = decode_compact_peers(peers->as_bytes());
  return resp;
}

// ---- compact peers ----

Bytes encode_compact_peers(const std::vector<Endpoint>& peers) {
  Bytes out;
  out.reserve(peers.size() * 6);
  for (const Endpoint& p : peers) {
    if (p.ip.is_v6) fail("compact peers: IPv4 only");
    out.append(reinterpret_cast<const char*>(p.ip.octets.data()), 4);
    put_u16_be(p.port, out);
  }
  return out;
}

std::vector<Endpoint> decode_compact_peers(std::string_view data) {
  if (data.size() % 6 != 0) fail("compact peers: length not a multiple of 6");
  std::vector<Endpoint> out;
  out.reserve(data.size() / 6);
  for (size_t i = 0; i < data.size(); i += 6) {
    Endpoint e;
    e.ip = IpAddr::v4(static_cast<uint8_t>(data[i]), static_cast<uint8_t>(data[i + 1]),
                      static_cast<uint8_t>(data[i + 2]), static_cast<uint8_t>(data[i + 3]));
    e.port = static_cast<uint16_t>((static_cast<uint8_t>(data[i + 4]) << 8) |
                                   static_cast<uint8_t>(data[i + 5]));
    out.push_back(e);
  }
  return out;
}

// ---- peer wire ----

Bytes encode_handshake(const Handshake& hs) {
  Bytes out;
  out.reserve(68);
  out += static_cast<char>(19);
  out += kProtocol;
  for (int i = 7; i >= 0; --i) out += static_cast<char>((hs.extension_bits >> (8 * i)) & 0xff);
  out += hs.infohash.bytes();
  out += hs.peer_id.bytes();
  return out;
}

bool looks_like_handshake(std::string_view payload) {
  return payload.size() == 68 && static_cast<unsigned char>(payload[0]) == 19 &&
         payload.substr(1, 19) == kProtocol;
}

Handshake parse_handshake(std::string_view data) {
  if (data.size() != 68) fail("handshake: not 68 octets");
  if (static_cast<unsigned char>(data[0]) != 19 || data.substr(1, 19) != kProtocol)
    fail("handshake: wrong protocol string");
  Handshake hs;
  hs.extension_bits = 0;
  for (int i = 0; i < 8; ++i)
    hs.extension_bits = (hs.extension_bits << 8) | static_cast<unsigned char>(data[20 + i]);
  hs.infohash = InfoHash::from_bytes(data.substr(28, 20));
  hs.peer_id = PeerId::from_bytes(data.substr(48, 20));
  return hs;
}

Bytes encode_extended_handshake(const ExtendedHandshake& eh) {
  bencode::BDict d;
  d.emplace("m", bencode::BValue(eh.extensions));
  if (eh.listen_port) d.emplace("p", bencode::BValue(static_cast<int64_t>(*eh.listen_port)));
  if (!eh.self_ip.empty()) d.emplace("ipv4", bencode::BValue(eh.self_ip));
  if (!eh.client_version.empty()) d.emplace("v", bencode::BValue(Bytes(eh.client_version)));
  Bytes payload = bencode::encode(bencode::BValue(std::move(d)));
  Bytes out;
  put_u32_be(static_cast<uint32_t>(payload.size() + 2), out);
  out += static_cast<char>(20);
  out += static_cast<char>(0);
  out += payload;
  return out;
}

bool looks_like_extended_handshake(std::string_view payload) {
  return payload.size() >= 6 && static_cast<unsigned char>(payload[4]) == 20 &&
         static_cast<unsigned char>(payload[5]) == 0 &&
         get_u32_be(payload, 0) == payload.size() - 4;
}

ExtendedHandshake parse_extended_handshake(std::string_view data) {
  if (data.size() < 6) fail("extended handshake: truncated");
  uint32_t len = get_u32_be(data, 0);
  if (len != data.size() - 4) fail("extended handshake: bad length prefix");
  if (static_cast<unsigned char>(data[4]) != 20 || static_cast<unsigned char>(data[5]) != 0)
    fail("extended handshake: wrong message id");
  bencode::BValue v = bencode::decode(data.substr(6));
  if (!v.is_dict()) fail("extended handshake: payload is not a dict");
  ExtendedHandshake eh;
  if (const bencode::BValue* m = v.find("m")) eh.extensions = m->as_dict();
  if (const bencode::BValue* p = v.find("p")) {
    int64_t port = p->as_integer();
    if (port < 0 || port > 65535) fail("extended handshake: port out of range");
    eh.listen_port = static_cast<uint16_t>(port);
  }
  if (const bencode::BValue* ip = v.find("ipv4")) eh.self_ip = ip->as_bytes();
  if (const bencode::BValue* ver = v.find("v")) eh.client_version = ver->as_bytes();
  return eh;
}

Bytes encode_piece_message(std::string_view token) {
  Bytes out;
  put_u32_be(static_cast<uint32_t>(token.size() + 1), out);
  out += static_cast<char>(7);
  out += token;
  return out;
}

std::optional<Bytes> parse_piece_message(std::string_view data) {
  if (data.size() < 5) return std::nullopt;
  if (get_u32_be(data, 0) != data.size() - 4) return std::nullopt;
  if (static_cast<unsigned char>(data[4]) != 7) return std::nullopt;
  return Bytes(data.substr(5));
}

// ---- KRPC ----

namespace {

Bytes encode_node_id(const NodeId& id) {
  return Bytes(reinterpret_cast<const char*>(id.data()), id.size());
}

NodeId parse_node_id(std::string_view raw) {
  if (raw.size() != 20) fail("krpc: node id must be 20 octets");
  NodeId id;
  std::memcpy(id.data(), raw.data(), 20);
  return id;
}

Bytes encode_compact_nodes(const std::vector<NodeInfo>& nodes) {
  Bytes out;
  out.reserve(nodes.size() * 26);
  for (const NodeInfo& n : nodes) {
    out += encode_node_id(n.node_id);
    std::vector<Endpoint> one{n.endpoint};
    out += encode_compact_peers(one);
  }
  return out;
}

std::vector<NodeInfo> parse_compact_nodes(std::string_view raw) {
  if (raw.size() % 26 != 0) fail("krpc: compact node info length not a multiple of 26");
  std::vector<NodeInfo> out;
  out.reserve(raw.size() / 26);
  for (size_t i = 0; i < raw.size(); i += 26) {
    NodeInfo n;
    n.node_id = parse_node_id(raw.substr(i, 20));
    n.endpoint = decode_compact_peers(raw.substr(i + 20, 6)).front();
    out.push_back(n);
  }
  return out;
}

}  // namespace

Bytes encode_krpc(const KrpcMessage& msg) {
  bencode::BDict top;
  top.emplace("t", bencode::BValue(msg.transaction_id));
  if (const auto* fq = std::get_if<FindNodeQuery>(&msg.kind)) {
    bencode::BDict a;
    a.emplace("target", bencode::BValue(encode_node_id(fq->target)));
    top.emplace("a", bencode::BValue(std::move(a)));
    top.emplace("q", bencode::BValue("find_node"));
    top.emplace("y", bencode::BValue("q"));
  } else if (const auto* fr = std::get_if<FindNodeResponse>(&msg.kind)) {
    bencode::BDict r;
    r.emplace("nodes", bencode::BValue(encode_compact_nodes(fr->nodes)));
    top.emplace("r", bencode::BValue(std::move(r)));
    top.emplace("y", bencode::BValue("r"));
  } else if (const auto* gq = std::get_if<GetPeersQuery>(&msg.kind)) {
    bencode::BDict a;
    a.emplace("info_hash", bencode::BValue(gq->infohash.bytes()));
    top.emplace("a", bencode::BValue(std::move(a)));
    top.emplace("q", bencode::BValue("get_peers"));
    top.emplace("y", bencode::BValue("q"));
  } else if (const auto* gr = std::get_if<GetPeersResponse>(&msg.kind)) {
    if (!gr->endpoints.empty() && !gr->closer_nodes.empty())
      fail("krpc: get_peers response with both endpoints and closer nodes");
    bencode::BDict r;
    r.emplace("token", bencode::BValue(gr->token));
    if (!gr->closer_nodes.empty()) {
      r.emplace("nodes", bencode::BValue(encode_compact_nodes(gr->closer_nodes)));
    } else {
      bencode::BList values;
      for (const Endpoint& e : gr->endpoints) {
        std::vector<Endpoint> one{e};
        values.emplace_back(encode_compact_peers(one));
      }
      r.emplace("values", bencode::BValue(std::move(values)));
    }
    top.emplace("r", bencode::BValue(std::move(r)));
    top.emplace("y", bencode::BValue("r"));
  } else if (const auto* aq = std::get_if<AnnouncePeerQuery>(&msg.kind)) {
    bencode::BDict a;
    a.emplace("info_hash", bencode::BValue(aq->infohash.bytes()));
    a.emplace("port", bencode::BValue(static_cast<int64_t>(aq->port)));
    top.emplace("a", bencode::BValue(std::move(a)));
    top.emplace("q", bencode::BValue("announce_peer"));
    top.emplace("y", bencode::BValue("q"));
  } else {
    const auto& err = std::get<KrpcError>(msg.kind);
    bencode::BList e;
    e.emplace_back(err.code);
    e.emplace_back(Bytes(err.text));
    top.emplace("e", bencode::BValue(std::move(e)));
    top.emplace("y", bencode::BValue("e"));
  }
  return bencode::encode(bencode::BValue(std::move(top)));
}

KrpcMessage parse_krpc(std::string_view data) {
  bencode::BValue v = bencode::decode(data);
  const bencode::BValue* t = v.find("t");
  const bencode::BValue* y = v.find("y");
  if (!t || !y) fail("krpc: missing t or y");
  KrpcMessage msg;
  msg.transaction_id = t->as_bytes();
  const Bytes& kind = y->as_bytes();
  if (kind == "q") {
    const bencode::BValue* q = v.find("q");
    const bencode::BValue* a = v.find("a");
    if (!q || !a) fail("krpc: query without q/a");
    const Bytes& name = q->as_bytes();
    if (name == "find_node") {
      const bencode::BValue* target = a->find("target");
      if (!target) fail("krpc: find_node without target");
      msg.kind = FindNodeQuery{parse_node_id(target->as_bytes())};
    } else if (name == "get_peers") {
      const bencode::BValue* ih = a->find("info_hash");
      if (!ih) fail("krpc: get_peers without info_hash");
      msg.kind = GetPeersQuery{InfoHash::from_bytes(ih->as_bytes())};
    } else if (name == "announce_peer") {
      const bencode::BValue* ih = a->find("info_hash");
      const bencode::BValue* port = a->find("port");
      if (!ih || !port) fail("krpc: announce_peer without info_hash/port");
      int64_t p = port->as_integer();
      if (p < 0 || p > 65535) fail("krpc: announce_peer port out of range");
      msg.kind = AnnouncePeerQuery{InfoHash::from_bytes(ih->as_bytes()), static_cast<uint16_t>(p)};
    } else {
      fail("krpc: unknown query");
    }
  } else if (kind == "r") {
    const bencode::BValue* r = v.find("r");
    if (!r) fail("krpc: response without r");
    if (const bencode::BValue* token = r->find("token")) {
      GetPeersResponse gr;
      gr.token = token->as_bytes();
      if (const bencode::BValue* values = r->find("values")) {
        for (const bencode::BValue& e : values->as_list()) {
          const Bytes& raw = e.as_bytes();
          if (raw.size() != 6) fail("krpc: value is not one compact endpoint");
          gr.endpoints.push_back(decode_compact_peers(raw).front());
        }
      } else if (const bencode::BValue* nodes = r->find("nodes")) {
        gr.closer_nodes = parse_compact_nodes(nodes->as_bytes());
      } else {
        fail("krpc: get_peers response without values or nodes");
      }
      msg.kind = std::move(gr);
    } else {
      const bencode::BValue* nodes = r->find("nodes");
      if (!nodes) fail("krpc: find_node response without nodes");
      msg.kind = FindNodeResponse{parse_compact_nodes(nodes->as_bytes())};
    }
  } else if (kind == "e") {
    const bencode::BValue* e = v.find("e");
    if (!e) fail("krpc: error without e");
    const bencode::BList& l = e->as_list();
    if (l.size() != 2) fail("krpc: error list must be [code, text]");
    msg.kind = KrpcError{l[0].as_integer(), l[1].as_bytes()};
  } else {
    fail("krpc: unknown message kind");
  }
  return msg;
}

}  // namespace swarmtap::btwire
