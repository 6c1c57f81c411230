#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "swarmtap/btwire.hpp"
#include "swarmtap/error.hpp"
#include "swarmtap/rng.hpp"
#include "testutil.hpp"

using namespace swarmtap;
using namespace swarmtap::btwire;

namespace {
std::set<IpAddr> exits() {
  return {IpAddr::v4(13, 0, 0, 1), IpAddr::v4(13, 0, 0, 2)};
}
}  // namespace

TEST_CASE("classify_ip partitions every input") {
  auto ex = exits();
  CHECK(classify_ip("", ex) == IpClass::Empty);
  CHECK(classify_ip("10.0.0.1", ex) == IpClass::Private);
  CHECK(classify_ip("192.168.1.2", ex) == IpClass::Private);
  CHECK(classify_ip("172.16.0.9", ex) == IpClass::Private);
  CHECK(classify_ip("172.32.0.9", ex) == IpClass::PublicNonExit);
  CHECK(classify_ip("127.0.0.1", ex) == IpClass::Private);
  CHECK(classify_ip("169.254.0.3", ex) == IpClass::Private);
  CHECK(classify_ip("999.1.1.1", ex) == IpClass::Invalid);
  CHECK(classify_ip("not-an-ip", ex) == IpClass::Invalid);
  CHECK(classify_ip("0.0.0.0", ex) == IpClass::Invalid);
  CHECK(classify_ip("::", ex) == IpClass::Invalid);
  CHECK(classify_ip("13.0.0.1", ex) == IpClass::PublicExit);
  CHECK(classify_ip("8.8.8.8", ex) == IpClass::PublicNonExit);
  CHECK(classify_ip("fe80::1", ex) == IpClass::Private);
  CHECK(classify_ip("fc00::2", ex) == IpClass::Private);
  CHECK(classify_ip("::1", ex) == IpClass::Private);
  CHECK(classify_ip("2001:db8::5", ex) == IpClass::PublicNonExit);

  // Exactly one class per input, with arbitrary octet noise.
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    Bytes raw = testutil::gen_bytes(rng, 20);
    IpClass c = classify_ip(raw, ex);
    bool any = c == IpClass::Empty || c == IpClass::Invalid || c == IpClass::Private ||
               c == IpClass::PublicExit || c == IpClass::PublicNonExit;
    CHECK(any);
  }
}

TEST_CASE("compact peers golden vectors") {
  Endpoint a{IpAddr::v4(10, 0, 0, 1), 6881};
  CHECK(to_hex(encode_compact_peers({a})) == "0a0000011ae1");
  CHECK(encode_compact_peers({}).empty());

  Bytes two = from_hex("0a0000011ae1c0a80002" "0050");
  auto peers = decode_compact_peers(two);
  REQUIRE(peers.size() == 2);
  CHECK(peers[0].str() == "10.0.0.1:6881");
  CHECK(peers[1].str() == "192.168.0.2:80");

  CHECK_THROWS_AS(decode_compact_peers("12345"), MalformedInput);
  Endpoint v6{*IpAddr::parse("2001:db8::1"), 80};
  CHECK_THROWS_AS(encode_compact_peers({v6}), MalformedInput);
}

TEST_CASE("announce request encode/parse") {
  AnnounceRequest req;
  req.infohash = InfoHash::from_bytes(Bytes(20, '\x11'));
  req.peer_id = PeerId::make("-UT3530-", "abcdefghijkl");
  req.port = 6881;
  req.ip_field = "192.168.1.2";

  Bytes wire = encode_announce_request(req);
  CHECK(wire.find("&port=6881") != Bytes::npos);
  CHECK(wire.find("&ip=192.168.1.2") != Bytes::npos);
  CHECK(wire.starts_with("GET /announce?info_hash="));
  CHECK(wire.ends_with(" HTTP/1.1\r\n"));

  AnnounceRequest back = parse_announce_request(wire);
  CHECK(back == req);
  CHECK(classify_ip(back.ip_field, exits()) == IpClass::Private);

  req.ip_field.clear();
  wire = encode_announce_request(req);
  CHECK(wire.find("&ip=") == Bytes::npos);
  back = parse_announce_request(wire);
  CHECK(back.ip_field.empty());
  CHECK(classify_ip(back.ip_field, exits()) == IpClass::Empty);

  // invalid ip= value still parses; classification flags it
  Bytes crafted = wire;
  crafted.replace(crafted.find(" HTTP/1.1"), 0, "&ip=999.1.1.1");
  back = parse_announce_request(crafted);
  CHECK(classify_ip(back.ip_field, exits()) == IpClass::Invalid);
}

TEST_CASE("announce request errors") {
  CHECK_THROWS_AS(parse_announce_request("GET /announce?port=1 HTTP/1.1\r\n"), MalformedInput);
  CHECK_THROWS_AS(parse_announce_request("POST /announce?info_hash=x HTTP/1.1\r\n"), MalformedInput);
  CHECK_THROWS_AS(parse_announce_request("GET /announce HTTP/1.1\r\n"), MalformedInput);
  AnnounceRequest req;
  req.infohash = InfoHash::from_bytes(Bytes(20, 'a'));
  req.peer_id = PeerId::from_bytes(Bytes(20, 'b'));
  Bytes wire = encode_announce_request(req);
  Bytes no_port = wire;
  size_t p = no_port.find("&port=0");
  no_port.erase(p, 7);
  CHECK_THROWS_AS(parse_announce_request(no_port), MalformedInput);
}

TEST_CASE("unknown announce keys are preserved in order") {
  AnnounceRequest req;
  req.infohash = InfoHash::from_bytes(Bytes(20, 'x'));
  req.peer_id = PeerId::from_bytes(Bytes(20, 'y'));
  req.port = 1;
  req.extra = {{"numwant", "80"}, {"key", "zz"}, {"compact", "1"}};
  AnnounceRequest back = parse_announce_request(encode_announce_request(req));
  CHECK(back.extra == req.extra);
  CHECK(encode_announce_request(back) == encode_announce_request(req));
}

TEST_CASE("announce response round-trip and order") {
  AnnounceResponse resp;
  resp.interval = 600;
  resp.peers = {{IpAddr::v4(1, 2, 3, 4), 10}, {IpAddr::v4(5, 6, 7, 8), 20}};
  AnnounceResponse back = parse_announce_response(encode_announce_response(resp));
  CHECK(back == resp);

  CHECK_THROWS_AS(parse_announce_response("d8:intervali0e5:peers0:e"), MalformedInput);
  CHECK_THROWS_AS(parse_announce_response("d8:intervali600ee"), MalformedInput);
}

TEST_CASE("handshake layout and errors") {
  Handshake hs{InfoHash::from_bytes(Bytes(20, '\x22')), PeerId::from_bytes(Bytes(20, '\x33')),
               1ull << 20};
  Bytes wire = encode_handshake(hs);
  REQUIRE(wire.size() == 68);
  CHECK(static_cast<unsigned char>(wire[0]) == 19);
  CHECK(wire.substr(1, 19) == "BitTorrent protocol");
  CHECK(parse_handshake(wire) == hs);

  CHECK_THROWS_AS(parse_handshake(wire.substr(0, 67)), MalformedInput);
  Bytes bad = wire;
  bad[3] = 'x';
  CHECK_THROWS_AS(parse_handshake(bad), MalformedInput);
}

TEST_CASE("extended handshake optionality") {
  ExtendedHandshake eh;
  eh.listen_port = 51413;
  Bytes wire = encode_extended_handshake(eh);
  // frame: len, id 20, ext id 0, then the bencoded dict
  CHECK(static_cast<unsigned char>(wire[4]) == 20);
  CHECK(static_cast<unsigned char>(wire[5]) == 0);
  CHECK(wire.find("1:pi51413e") != Bytes::npos);
  CHECK(wire.find("ipv4") == Bytes::npos);

  ExtendedHandshake back = parse_extended_handshake(wire);
  CHECK(back == eh);

  CHECK_THROWS_AS(parse_extended_handshake(wire.substr(0, 5)), MalformedInput);
  Bytes nondict;
  {
    Bytes payload = bencode::encode(bencode::BValue(int64_t{1}));
    nondict += Bytes("\x00\x00\x00", 3);
    nondict += static_cast<char>(payload.size() + 2);
    nondict += static_cast<char>(20);
    nondict += static_cast<char>(0);
    nondict += payload;
  }
  CHECK_THROWS_AS(parse_extended_handshake(nondict), MalformedInput);
}

TEST_CASE("krpc round-trip preserves transaction ids") {
  KrpcMessage q;
  q.transaction_id = "t1";
  q.kind = GetPeersQuery{InfoHash::from_bytes(Bytes(20, 'q'))};
  KrpcMessage back = parse_krpc(encode_krpc(q));
  CHECK(back == q);
}

TEST_CASE("krpc malformed inputs") {
  CHECK_THROWS_AS(parse_krpc("d1:y1:qe"), MalformedInput);
  CHECK_THROWS_AS(parse_krpc("d1:t2:aa1:y1:xe"), MalformedInput);
  CHECK_THROWS_AS(parse_krpc("i42e"), MalformedInput);
  // find_node response with ragged compact node blob
  CHECK_THROWS_AS(parse_krpc("d1:rd5:nodes3:abce1:t2:aa1:y1:re"), MalformedInput);
}

TEST_CASE("codec property: lossless inverses over generated messages") {
  Rng rng(0xbee5);
  for (int i = 0; i < 3000; ++i) {
    auto req = testutil::gen_announce_request(rng);
    CHECK(parse_announce_request(encode_announce_request(req)) == req);

    auto hs = testutil::gen_handshake(rng);
    CHECK(parse_handshake(encode_handshake(hs)) == hs);

    auto eh = testutil::gen_extended_handshake(rng);
    CHECK(parse_extended_handshake(encode_extended_handshake(eh)) == eh);

    auto msg = testutil::gen_krpc(rng);
    CHECK(parse_krpc(encode_krpc(msg)) == msg);

    auto peers = testutil::gen_endpoints(rng, 50);
    CHECK(decode_compact_peers(encode_compact_peers(peers)) == peers);

    AnnounceResponse resp{static_cast<int64_t>(1 + rng.below(3600)), testutil::gen_endpoints(rng, 50)};
    CHECK(parse_announce_response(encode_announce_response(resp)) == resp);
  }
}

TEST_CASE("piece token framing") {
  Bytes wire = encode_piece_message("chunk0");
  auto tok = parse_piece_message(wire);
  REQUIRE(tok.has_value());
  CHECK(*tok == "chunk0");
  CHECK(!parse_piece_message("abc").has_value());
  CHECK(!parse_piece_message(encode_handshake(Handshake{})).has_value());
}
