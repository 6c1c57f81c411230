#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "swarmtap/btwire.hpp"
#include "swarmtap/error.hpp"
#include "swarmtap/swarm.hpp"

using namespace swarmtap;
using namespace swarmtap::swarm;
using namespace swarmtap::btwire;

namespace {

ScenarioConfig tiny_config() {
  ScenarioConfig c = ScenarioConfig::from_json(nlohmann::json::object());
  c.seed = 7;
  c.duration_s = 1900;
  c.peer_count = 6;
  c.torrent_count = 2;
  c.torrent_sizes = {12, 12};
  c.relay_count = 8;
  c.exit_relay_count = 3;
  c.tapped_exit_count = 3;
  c.session_offline_mean_s = 0;
  c.session_online_mean_s = 100000;
  c.http_habit_fraction = 0.0;
  return c;
}

InfoHash ih_of(uint8_t b) {
  InfoHash ih;
  ih.v.fill(b);
  return ih;
}

AnnounceRequest req_for(const InfoHash& ih, uint16_t port, uint8_t tag) {
  AnnounceRequest r;
  r.infohash = ih;
  r.peer_id = PeerId::from_bytes(Bytes(20, static_cast<char>(tag)));
  r.port = port;
  return r;
}

}  // namespace

TEST_CASE("tracker: first announce registers and returns empty") {
  Rng rng(1);
  Tracker tr(rng, 50, 600, 1800);
  auto resp = tr.handle_announce(req_for(ih_of(1), 1000, 1), {IpAddr::v4(9, 0, 0, 1), 5555}, 0);
  CHECK(resp.peers.empty());
  CHECK(resp.interval == 600);
  CHECK(tr.member_count(ih_of(1), 0) == 1);
}

TEST_CASE("tracker: small swarm returns everyone else, never the requester") {
  Rng rng(1);
  Tracker tr(rng, 50, 600, 1800);
  InfoHash ih = ih_of(2);
  for (int i = 0; i < 4; ++i)
    tr.handle_announce(req_for(ih, static_cast<uint16_t>(1000 + i), static_cast<uint8_t>(i)),
                       {IpAddr::v4(9, 0, 0, static_cast<uint8_t>(i + 1)), 1}, 0);
  auto resp = tr.handle_announce(req_for(ih, 1000, 0), {IpAddr::v4(9, 0, 0, 1), 1}, 10);
  CHECK(resp.peers.size() == 3);  // the 3 others
  for (const Endpoint& e : resp.peers) CHECK(e != Endpoint{IpAddr::v4(9, 0, 0, 1), 1000});
}

TEST_CASE("tracker: responses capped at K and requester excluded under churn") {
  Rng rng(3);
  Tracker tr(rng, 5, 600, 1800);
  InfoHash ih = ih_of(3);
  for (int i = 0; i < 40; ++i)
    tr.seed_member(ih, {IpAddr::v4(9, 1, 0, static_cast<uint8_t>(i + 1)), 2000});
  for (int trial = 0; trial < 50; ++trial) {
    auto resp = tr.handle_announce(req_for(ih, 700, 9), {IpAddr::v4(9, 2, 0, 1), 1}, trial);
    CHECK(resp.peers.size() <= 5);
    for (const Endpoint& e : resp.peers) CHECK(e != Endpoint{IpAddr::v4(9, 2, 0, 1), 700});
  }
}

TEST_CASE("tracker: members expire") {
  Rng rng(1);
  Tracker tr(rng, 50, 600, 1800);
  InfoHash ih = ih_of(4);
  tr.handle_announce(req_for(ih, 1000, 1), {IpAddr::v4(9, 0, 0, 1), 1}, 0);
  CHECK(tr.member_count(ih, 1799) == 1);
  CHECK(tr.member_count(ih, 1800) == 0);
}

TEST_CASE("tracker: announce arriving from an exit relay registers the exit address") {
  Rng rng(1);
  Tracker tr(rng, 50, 600, 1800);
  InfoHash ih = ih_of(5);
  Endpoint exit_src{IpAddr::v4(13, 0, 0, 1), 50001};
  tr.handle_announce(req_for(ih, 4242, 1), exit_src, 0);
  auto resp = tr.handle_announce(req_for(ih, 1, 2), {IpAddr::v4(9, 0, 0, 9), 1}, 1);
  REQUIRE(resp.peers.size() == 1);
  CHECK(resp.peers[0] == Endpoint{IpAddr::v4(13, 0, 0, 1), 4242});
}

TEST_CASE("dht: announce_peer stores the caller's source address") {
  Rng rng(2);
  DhtService dht(rng, 8, 8);
  InfoHash ih = ih_of(6);
  KrpcMessage ap;
  ap.transaction_id = "t0";
  ap.kind = AnnouncePeerQuery{ih, 7777};
  auto node = dht.responsible(ih);
  auto reply = dht.handle_udp(node.endpoint, {IpAddr::v4(9, 9, 9, 9), 1234}, encode_krpc(ap));
  CHECK(!reply.has_value());  // fire and forget
  const auto* stored = dht.stored(ih);
  REQUIRE(stored != nullptr);
  REQUIRE(stored->size() == 1);
  CHECK((*stored)[0] == Endpoint{IpAddr::v4(9, 9, 9, 9), 7777});
}

TEST_CASE("dht: get_peers over KRPC returns a bounded uniform sample") {
  Rng rng(2);
  DhtService dht(rng, 8, 8);
  InfoHash ih = ih_of(7);
  for (int i = 0; i < 30; ++i)
    dht.seed_peer(ih, {IpAddr::v4(9, 3, 0, static_cast<uint8_t>(i + 1)), 1000});
  KrpcMessage gp;
  gp.transaction_id = "t1";
  gp.kind = GetPeersQuery{ih};
  auto node = dht.responsible(ih);
  auto reply = dht.handle_udp(node.endpoint, {IpAddr::v4(9, 0, 0, 1), 1}, encode_krpc(gp));
  REQUIRE(reply.has_value());
  KrpcMessage parsed = parse_krpc(*reply);
  const auto* resp = std::get_if<GetPeersResponse>(&parsed.kind);
  REQUIRE(resp != nullptr);
  CHECK(resp->endpoints.size() == 8);
  CHECK(parsed.transaction_id == "t1");
}

TEST_CASE("dht: unknown infohash yields empty results") {
  Rng rng(2);
  DhtService dht(rng, 8, 8);
  CHECK(dht.sample_peers(ih_of(8)).empty());
  CHECK(dht_crawl(ih_of(8), [&](const InfoHash& ih) { return dht.sample_peers(ih); }, 5, 8).empty());
}

TEST_CASE("dht crawl: singleton is found in the first round") {
  Rng rng(2);
  DhtService dht(rng, 8, 8);
  InfoHash ih = ih_of(9);
  Endpoint only{IpAddr::v4(9, 4, 0, 1), 4321};
  dht.seed_peer(ih, only);
  auto found = dht_crawl(ih, [&](const InfoHash& h) { return dht.sample_peers(h); }, 5, 8);
  REQUIRE(found.size() == 1);
  CHECK(*found.begin() == only);
}

// Oracle: the DHT store itself is the ground truth; the crawl must recover it
// in at least 999 of 1,000 seeded runs at the default R=5.
TEST_CASE("dht crawl: completeness over 1000 seeded runs, n=100") {
  int complete = 0;
  for (int seed = 0; seed < 1000; ++seed) {
    Rng rng(static_cast<uint64_t>(seed) + 1);
    DhtService dht(rng, 4, 8);
    InfoHash ih = ih_of(static_cast<uint8_t>(seed % 251));
    for (int i = 0; i < 100; ++i)
      dht.seed_peer(ih, {IpAddr::v4(9, 5, static_cast<uint8_t>(i >> 8), static_cast<uint8_t>(i)),
                         static_cast<uint16_t>(1024 + i)});
    auto found = dht_crawl(ih, [&](const InfoHash& h) { return dht.sample_peers(h); }, 5, 8);
    const auto* truth = dht.stored(ih);
    REQUIRE(truth != nullptr);
    if (found.size() == truth->size()) ++complete;
  }
  CHECK(complete >= 999);
}

TEST_CASE("torrent size distribution hits the sub-1000 quantile") {
  ScenarioConfig c = ScenarioConfig::from_json(nlohmann::json::object());
  Rng rng(11);
  int n = 20000, under = 0;
  for (int i = 0; i < n; ++i) {
    int s = sample_torrent_size(c, rng);
    CHECK(s >= 1);
    CHECK(s <= c.torrent_size_max);
    if (s < 1000) ++under;
  }
  double frac = static_cast<double>(under) / n;
  CHECK(frac > 0.88);
  CHECK(frac < 0.92);
}

TEST_CASE("world: tracker-only agents register exit addresses, DHT keeps real ones") {
  ScenarioConfig c = tiny_config();
  c.mode_tracker_only = 1.0;
  c.mode_content_and_tracker = 0.0;
  ClientProfile p;
  p.name = "t";
  p.peer_id_tag = "-TT1000-";
  p.announce_ip_prob = 1.0;
  p.announce_ip_public_w = 1.0;
  p.announce_ip_private_w = 0.0;
  p.announce_ip_invalid_w = 0.0;
  p.announce_public_v6_prob = 0.0;
  c.profiles = {p};
  World w(c);
  w.run();

  auto exits = w.exit_ips();
  for (const PeerAgent& a : w.agents()) {
    for (uint32_t ti : a.torrents) {
      const InfoHash& ih = w.torrent_hashes()[ti];
      // via-Tor announces must not register the real address with the tracker
      Rng probe(1);
      Tracker& tr = w.tracker();
      (void)tr;
      const auto* stored = w.dht().stored(ih);
      REQUIRE(stored != nullptr);
      bool real_in_dht = false;
      for (const Endpoint& e : *stored) {
        if (e == a.endpoint) real_in_dht = true;
        (void)probe;
      }
      CHECK(real_in_dht);  // UDP bypasses the tunnel
    }
  }

  // every observed announce carries an ip field (announce_ip_prob = 1)
  // and the tracker never sees a client address as a member
  std::set<std::string> member_ips;
  for (const PeerAgent& a : w.agents()) {
    for (uint32_t ti : a.torrents) {
      auto resp = w.tracker().handle_announce(
          req_for(w.torrent_hashes()[ti], 9, 99), {IpAddr::v4(9, 0, 0, 99), 9}, c.duration_s - 1);
      for (const Endpoint& e : resp.peers) member_ips.insert(e.ip.str());
    }
  }
  for (const PeerAgent& a : w.agents()) CHECK(member_ips.count(a.endpoint.ip.str()) == 0);
  bool some_exit_member = false;
  for (const IpAddr& e : exits)
    if (member_ips.count(e.str())) some_exit_member = true;
  CHECK(some_exit_member);
}

TEST_CASE("world: announce_ip_prob=1 puts the ip field in every observed announce") {
  ScenarioConfig c = tiny_config();
  ClientProfile p;
  p.name = "t";
  p.peer_id_tag = "-TT1000-";
  p.announce_ip_prob = 1.0;
  c.profiles = {p};
  World w(c);
  int announces = 0, with_ip = 0;
  w.set_observation_sink([&](const overlay::ExitObservation& obs) {
    if (obs.direction != overlay::Direction::ToDestination) return;
    if (!looks_like_announce_request(obs.payload)) return;
    ++announces;
    auto req = parse_announce_request(obs.payload);
    if (!req.ip_field.empty()) ++with_ip;
  });
  w.run();
  CHECK(announces > 0);
  CHECK(announces == with_ip);
}

TEST_CASE("world: no-tor agents produce no observations at all") {
  ScenarioConfig c = tiny_config();
  c.no_tor_fraction = 1.0;
  World w(c);
  int seen = 0;
  w.set_observation_sink([&](const overlay::ExitObservation&) { ++seen; });
  w.run();
  CHECK(seen == 0);
  // their real endpoints are registered with the tracker
  size_t members = 0;
  for (const InfoHash& ih : w.torrent_hashes()) members += w.tracker().member_count(ih, 1);
  CHECK(members > 12 * 2 - 1);  // seeded background plus the agents themselves
}

TEST_CASE("world state is deterministic for a fixed seed") {
  auto fingerprint = [] {
    ScenarioConfig c = tiny_config();
    World w(c);
    std::vector<std::string> log;
    w.set_observation_sink([&](const overlay::ExitObservation& o) {
      log.push_back(std::to_string(o.time) + "|" + std::to_string(o.stream_id) + "|" +
                    o.destination.str() + "|" + to_hex(o.payload));
    });
    w.run();
    return log;
  };
  CHECK(fingerprint() == fingerprint());
}
