#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "swarmtap/config.hpp"
#include "swarmtap/error.hpp"

using namespace swarmtap;
using nlohmann::json;

TEST_CASE("defaults parse and validate with an explicit seed") {
  ScenarioConfig c = ScenarioConfig::from_json(json::object());
  CHECK_THROWS_AS(c.validate(), ConfigInvalid);  // seed missing
  c.seed = 3;
  CHECK_NOTHROW(c.validate());
  CHECK(c.mode_tracker_only == doctest::Approx(0.72));
  CHECK(c.popular_ports.size() == 6);
}

TEST_CASE("duration zero is rejected with a field path") {
  ScenarioConfig c = ScenarioConfig::from_json(json::object());
  c.seed = 1;
  c.duration_s = 0;
  try {
    c.validate();
    FAIL("expected ConfigInvalid");
  } catch (const ConfigInvalid& e) {
    CHECK(e.field_path == "duration_s");
  }
}

TEST_CASE("usage mode weights must sum to one") {
  ScenarioConfig c = ScenarioConfig::from_json(json::object());
  c.seed = 1;
  c.mode_tracker_only = 0.5;
  CHECK_THROWS_AS(c.validate(), ConfigInvalid);
}

TEST_CASE("unknown fields are named in the error") {
  json j = {{"seed", 1}, {"tracker", {{"peers_per_respnse", 10}}}};
  try {
    ScenarioConfig::from_json(j);
    FAIL("expected ConfigInvalid");
  } catch (const ConfigInvalid& e) {
    CHECK(e.field_path == "tracker.peers_per_respnse");
  }
}

TEST_CASE("bad types carry the field path") {
  json j = {{"seed", 1}, {"peers", {{"count", "many"}}}};
  try {
    ScenarioConfig::from_json(j);
    FAIL("expected ConfigInvalid");
  } catch (const ConfigInvalid& e) {
    CHECK(e.field_path == "peers.count");
  }
}

TEST_CASE("config round-trips through json") {
  ScenarioConfig c = ScenarioConfig::preset("paper-defaults");
  json j = c.to_json();
  ScenarioConfig back = ScenarioConfig::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.peer_count == 10000);
  CHECK(back.torrent_count == 500);
  CHECK(back.duration_s == 23 * 86400);
  CHECK(back.tapped_exit_count == 6);
}

TEST_CASE("presets exist and validate") {
  for (const std::string& name : ScenarioConfig::preset_names()) {
    ScenarioConfig c = ScenarioConfig::preset(name);
    CHECK_NOTHROW(c.validate());
  }
  CHECK_THROWS_AS(ScenarioConfig::preset("nope"), ConfigInvalid);
}

TEST_CASE("file overlays merge over presets") {
  json base = ScenarioConfig::preset("paper-defaults").to_json();
  json overlay = {{"duration_s", 86400}, {"peers", {{"count", 1234}}}};
  base.merge_patch(overlay);
  ScenarioConfig c = ScenarioConfig::from_json(base);
  CHECK(c.duration_s == 86400);
  CHECK(c.peer_count == 1234);
  CHECK(c.torrent_count == 500);  // untouched preset value
}
