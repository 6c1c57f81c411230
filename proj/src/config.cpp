#include "swarmtap/config.hpp"

#include <cmath>
#include <set>

#include "swarmtap/error.hpp"

namespace swarmtap {

namespace {

using nlohmann::json;

struct Reader {
  const json& j;
  std::string path;

  std::string sub(const char* k) const { return path.empty() ? k : path + "." + k; }

  const json* find(const char* k) const {
    if (!j.is_object()) throw ConfigInvalid(path, "expected an object");
    auto it = j.find(k);
    return it == j.end() ? nullptr : &*it;
  }

  template <class T>
  void read(const char* k, T& out) const {
    const json* v = find(k);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw ConfigInvalid(sub(k), std::string("bad value: ") + e.what());
    }
  }

  void read_range(const char* k, int& lo, int& hi) const {
    const json* v = find(k);
    if (!v) return;
    if (!v->is_array() || v->size() != 2)
      throw ConfigInvalid(sub(k), "expected [min, max]");
    try {
      lo = (*v)[0].get<int>();
      hi = (*v)[1].get<int>();
    } catch (const json::exception& e) {
      throw ConfigInvalid(sub(k), std::string("bad value: ") + e.what());
    }
  }

  void known_keys(std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) return;
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) {
        if (it.key() == a) ok = true;
      }
      if (!ok) throw ConfigInvalid(sub(it.key().c_str()), "unknown field");
    }
  }
};

void check_prob(double v, const char* path) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigInvalid(path, "must be in [0, 1]");
}

std::vector<ClientProfile> default_profiles() {
  ClientProfile leaky;
  leaky.name = "leaky";
  leaky.peer_id_tag = "-LK2210-";
  leaky.weight = 0.5;
  leaky.announce_ip_prob = 0.35;
  leaky.ext_ip_prob = 0.84;
  ClientProfile sealed;
  sealed.name = "sealed";
  sealed.peer_id_tag = "-SL1020-";
  sealed.weight = 0.3;
  sealed.announce_ip_prob = 0.0;
  sealed.ext_ip_prob = 0.0;
  sealed.encrypts_peer_traffic = true;
  ClientProfile nodht;
  nodht.name = "nodht";
  nodht.peer_id_tag = "-ND0940-";
  nodht.weight = 0.2;
  nodht.announce_ip_prob = 0.35;
  nodht.ext_ip_prob = 0.84;
  nodht.dht_enabled = false;
  return {leaky, sealed, nodht};
}

std::vector<std::pair<std::string, double>> default_categories() {
  return {{"p2p", 0.30},   {"filesharing", 0.20}, {"search", 0.12}, {"forums", 0.10},
          {"it", 0.08},    {"porn", 0.08},        {"social", 0.05}, {"news", 0.04},
          {"blogs", 0.02}, {"video", 0.01}};
}

std::vector<GroupSpec> default_groups() {
  return {{"G01", 0.14, 0.155}, {"G02", 0.13, 0.024}, {"G03", 0.13, 0.046},
          {"G04", 0.05, 0.042}, {"G05", 0.03, 0.023}, {"G06", 0.03, 0.033},
          {"G07", 0.03, 0.043}, {"G08", 0.02, 0.0035}, {"G09", 0.02, 0.022},
          {"G10", 0.02, -1.0},  {"other", 0.40, 0.608}};
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!seed) throw ConfigInvalid("seed", "must be set explicitly");
  if (duration_s < 1) throw ConfigInvalid("duration_s", "must be >= 1");
  if (peer_count < 1) throw ConfigInvalid("peers.count", "must be >= 1");
  if (torrents_per_agent_min < 1 || torrents_per_agent_max < torrents_per_agent_min)
    throw ConfigInvalid("peers.torrents_per_agent", "need 1 <= min <= max");
  if (session_online_mean_s < 1 || session_offline_mean_s < 0)
    throw ConfigInvalid("peers.session", "bad session means");
  if (connect_cap < 1) throw ConfigInvalid("peers.connect_cap", "must be >= 1");
  check_prob(no_tor_fraction, "peers.no_tor_fraction");

  double mode_sum = mode_tracker_only + mode_content_and_tracker + mode_peers_only;
  check_prob(mode_tracker_only, "usage_mode_weights.tracker_only");
  check_prob(mode_content_and_tracker, "usage_mode_weights.content_and_tracker");
  check_prob(mode_peers_only, "usage_mode_weights.peers_only");
  if (std::fabs(mode_sum - 1.0) > 1e-9)
    throw ConfigInvalid("usage_mode_weights", "weights must sum to 1");

  if (profiles.empty()) throw ConfigInvalid("client_profiles", "at least one profile required");
  double pw = 0.0;
  for (size_t i = 0; i < profiles.size(); ++i) {
    const ClientProfile& p = profiles[i];
    std::string base = "client_profiles[" + std::to_string(i) + "]";
    if (p.weight < 0) throw ConfigInvalid(base + ".weight", "must be >= 0");
    pw += p.weight;
    check_prob(p.announce_ip_prob, (base + ".announce_ip_prob").c_str());
    check_prob(p.ext_ip_prob, (base + ".ext_ip_prob").c_str());
    check_prob(p.announce_public_v6_prob, (base + ".announce_public_v6_prob").c_str());
    if (p.peer_id_tag.empty() || p.peer_id_tag.size() > 12)
      throw ConfigInvalid(base + ".peer_id_tag", "need 1..12 printable octets");
    if (p.announce_ip_prob > 0 &&
        p.announce_ip_public_w + p.announce_ip_private_w + p.announce_ip_invalid_w <= 0)
      throw ConfigInvalid(base + ".announce_ip_kinds", "kind weights must sum > 0");
    if (p.ext_ip_prob > 0 && p.ext_ip_exit_w + p.ext_ip_public_w + p.ext_ip_private_w <= 0)
      throw ConfigInvalid(base + ".ext_ip_kinds", "kind weights must sum > 0");
  }
  if (pw <= 0) throw ConfigInvalid("client_profiles", "profile weights must sum > 0");

  if (torrent_count < 1) throw ConfigInvalid("torrents.count", "must be >= 1");
  if (torrent_size_median <= 0) throw ConfigInvalid("torrents.size_median", "must be > 0");
  if (torrent_size_sigma < 0) throw ConfigInvalid("torrents.size_sigma", "must be >= 0");
  if (torrent_size_max < 1) throw ConfigInvalid("torrents.size_max", "must be >= 1");
  for (int s : torrent_sizes) {
    if (s < 1) throw ConfigInvalid("torrents.sizes", "sizes must be >= 1");
  }

  check_prob(popular_port_mass, "ports.popular_mass");
  if (popular_port_mass > 0 && popular_ports.empty())
    throw ConfigInvalid("ports.popular", "need ports when popular_mass > 0");

  if (relay_count < 3) throw ConfigInvalid("overlay.relay_count", "need >= 3 relays");
  if (exit_relay_count < 1 || exit_relay_count > relay_count)
    throw ConfigInvalid("overlay.exit_relay_count", "need 1 <= exits <= relays");
  if (tapped_exit_count < 0 || tapped_exit_count > exit_relay_count)
    throw ConfigInvalid("overlay.tapped_exit_count", "need 0 <= tapped <= exits");
  if (circuit_pool_size < 1) throw ConfigInvalid("overlay.circuit_pool_size", "must be >= 1");
  if (circuit_lifetime_s < 1) throw ConfigInvalid("overlay.circuit_lifetime_s", "must be >= 1");

  if (tracker_peers_per_response < 1) throw ConfigInvalid("tracker.peers_per_response", "must be >= 1");
  if (announce_interval_s < 1) throw ConfigInvalid("tracker.announce_interval_s", "must be >= 1");
  if (tracker_member_ttl_s < announce_interval_s)
    throw ConfigInvalid("tracker.member_ttl_s", "must be >= announce interval");

  if (dht_node_count < 1) throw ConfigInvalid("dht.node_count", "must be >= 1");
  if (dht_peers_per_response < 1) throw ConfigInvalid("dht.peers_per_response", "must be >= 1");
  if (crawl_stable_rounds < 1) throw ConfigInvalid("dht.crawl_stable_rounds", "must be >= 1");
  if (crawl_cache_ttl_s < 1) throw ConfigInvalid("dht.crawl_cache_ttl_s", "must be >= 1");

  if (hijack_pending_ttl_s < 1) throw ConfigInvalid("attacks.hijack_pending_ttl_s", "must be >= 1");
  if (inter_domino_window_s < 0) throw ConfigInvalid("attacks.inter_domino_window_s", "must be >= 0");

  check_prob(http_habit_fraction, "http.habit_fraction");
  if (http_habit_fraction > 0) {
    if (http_destination_count < 1) throw ConfigInvalid("http.destination_count", "must be >= 1");
    if (http_sites_per_agent_min < 1 || http_sites_per_agent_max < http_sites_per_agent_min)
      throw ConfigInvalid("http.sites_per_agent", "need 1 <= min <= max");
    if (browse_interval_mean_s < 1) throw ConfigInvalid("http.browse_interval_mean_s", "must be >= 1");
    if (http_categories.empty()) throw ConfigInvalid("http.categories", "need at least one category");
  }

  if (groups.empty()) throw ConfigInvalid("groups", "need at least one group");
  std::set<std::string> labels;
  double gw = 0.0;
  for (const GroupSpec& g : groups) {
    if (g.label.empty()) throw ConfigInvalid("groups", "empty label");
    if (!labels.insert(g.label).second) throw ConfigInvalid("groups", "duplicate label " + g.label);
    if (g.tor_weight < 0) throw ConfigInvalid("groups", "negative weight for " + g.label);
    gw += g.tor_weight;
  }
  if (gw <= 0) throw ConfigInvalid("groups", "tor weights must sum > 0");
}

nlohmann::json ScenarioConfig::to_json() const {
  json j;
  if (seed) j["seed"] = *seed;
  j["duration_s"] = duration_s;
  j["peers"] = {{"count", peer_count},
                {"torrents_per_agent", {torrents_per_agent_min, torrents_per_agent_max}},
                {"session_online_mean_s", session_online_mean_s},
                {"session_offline_mean_s", session_offline_mean_s},
                {"connect_cap", connect_cap},
                {"contact_memory_ttl_s", contact_memory_ttl_s},
                {"no_tor_fraction", no_tor_fraction}};
  j["usage_mode_weights"] = {{"tracker_only", mode_tracker_only},
                             {"content_and_tracker", mode_content_and_tracker},
                             {"peers_only", mode_peers_only}};
  j["client_profiles"] = json::array();
  for (const ClientProfile& p : profiles) {
    j["client_profiles"].push_back(
        {{"name", p.name},
         {"peer_id_tag", p.peer_id_tag},
         {"weight", p.weight},
         {"announce_ip_prob", p.announce_ip_prob},
         {"announce_ip_kinds",
          {{"public", p.announce_ip_public_w}, {"private", p.announce_ip_private_w}, {"invalid", p.announce_ip_invalid_w}}},
         {"announce_public_v6_prob", p.announce_public_v6_prob},
         {"ext_ip_prob", p.ext_ip_prob},
         {"ext_ip_kinds",
          {{"exit", p.ext_ip_exit_w}, {"public", p.ext_ip_public_w}, {"private", p.ext_ip_private_w}}},
         {"encrypts_peer_traffic", p.encrypts_peer_traffic},
         {"dht_enabled", p.dht_enabled}});
  }
  j["torrents"] = {{"count", torrent_count},
                   {"size_median", torrent_size_median},
                   {"size_sigma", torrent_size_sigma},
                   {"size_max", torrent_size_max},
                   {"sizes", torrent_sizes}};
  j["ports"] = {{"popular_mass", popular_port_mass}, {"popular", popular_ports}};
  j["overlay"] = {{"relay_count", relay_count},
                  {"exit_relay_count", exit_relay_count},
                  {"tapped_exit_count", tapped_exit_count},
                  {"circuit_pool_size", circuit_pool_size},
                  {"circuit_lifetime_s", circuit_lifetime_s}};
  j["tracker"] = {{"peers_per_response", tracker_peers_per_response},
                  {"announce_interval_s", announce_interval_s},
                  {"member_ttl_s", tracker_member_ttl_s}};
  j["dht"] = {{"node_count", dht_node_count},
              {"peers_per_response", dht_peers_per_response},
              {"crawl_stable_rounds", crawl_stable_rounds},
              {"crawl_cache_ttl_s", crawl_cache_ttl_s}};
  j["attacks"] = {{"inspect", attack_inspect},
                  {"hijack", attack_hijack},
                  {"dht_match", attack_dht_match},
                  {"domino", attack_domino},
                  {"hijack_pending_ttl_s", hijack_pending_ttl_s},
                  {"inter_domino_window_s", inter_domino_window_s},
                  {"port_exclusions", dht_port_exclusions}};
  j["http"] = {{"habit_fraction", http_habit_fraction},
               {"destination_count", http_destination_count},
               {"sites_per_agent", {http_sites_per_agent_min, http_sites_per_agent_max}},
               {"browse_interval_mean_s", browse_interval_mean_s},
               {"categories", http_categories}};
  j["groups"] = json::array();
  for (const GroupSpec& g : groups)
    j["groups"].push_back({g.label, g.tor_weight, g.baseline_weight});
  j["outputs"] = {{"observation_log", write_observation_log}};
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  c.profiles = default_profiles();
  c.http_categories = default_categories();
  c.groups = default_groups();

  Reader top{j, ""};
  top.known_keys({"seed", "duration_s", "peers", "usage_mode_weights", "client_profiles",
                  "torrents", "ports", "overlay", "tracker", "dht", "attacks", "http", "groups",
                  "outputs"});
  if (const json* s = top.find("seed")) {
    try {
      c.seed = s->get<uint64_t>();
    } catch (const json::exception& e) {
      throw ConfigInvalid("seed", std::string("bad value: ") + e.what());
    }
  }
  top.read("duration_s", c.duration_s);

  if (const json* o = top.find("peers")) {
    Reader r{*o, "peers"};
    r.known_keys({"count", "torrents_per_agent", "session_online_mean_s", "session_offline_mean_s",
                  "connect_cap", "contact_memory_ttl_s", "no_tor_fraction"});
    r.read("count", c.peer_count);
    r.read_range("torrents_per_agent", c.torrents_per_agent_min, c.torrents_per_agent_max);
    r.read("session_online_mean_s", c.session_online_mean_s);
    r.read("session_offline_mean_s", c.session_offline_mean_s);
    r.read("connect_cap", c.connect_cap);
    r.read("contact_memory_ttl_s", c.contact_memory_ttl_s);
    r.read("no_tor_fraction", c.no_tor_fraction);
  }
  if (const json* o = top.find("usage_mode_weights")) {
    Reader r{*o, "usage_mode_weights"};
    r.known_keys({"tracker_only", "content_and_tracker", "peers_only"});
    r.read("tracker_only", c.mode_tracker_only);
    r.read("content_and_tracker", c.mode_content_and_tracker);
    r.read("peers_only", c.mode_peers_only);
  }
  if (const json* o = top.find("client_profiles")) {
    if (!o->is_array()) throw ConfigInvalid("client_profiles", "expected an array");
    c.profiles.clear();
    for (size_t i = 0; i < o->size(); ++i) {
      Reader r{(*o)[i], "client_profiles[" + std::to_string(i) + "]"};
      r.known_keys({"name", "peer_id_tag", "weight", "announce_ip_prob", "announce_ip_kinds",
                    "announce_public_v6_prob", "ext_ip_prob", "ext_ip_kinds",
                    "encrypts_peer_traffic", "dht_enabled"});
      ClientProfile p;
      r.read("name", p.name);
      r.read("peer_id_tag", p.peer_id_tag);
      r.read("weight", p.weight);
      r.read("announce_ip_prob", p.announce_ip_prob);
      if (const json* k = r.find("announce_ip_kinds")) {
        Reader kr{*k, r.path + ".announce_ip_kinds"};
        kr.known_keys({"public", "private", "invalid"});
        kr.read("public", p.announce_ip_public_w);
        kr.read("private", p.announce_ip_private_w);
        kr.read("invalid", p.announce_ip_invalid_w);
      }
      r.read("announce_public_v6_prob", p.announce_public_v6_prob);
      r.read("ext_ip_prob", p.ext_ip_prob);
      if (const json* k = r.find("ext_ip_kinds")) {
        Reader kr{*k, r.path + ".ext_ip_kinds"};
        kr.known_keys({"exit", "public", "private"});
        kr.read("exit", p.ext_ip_exit_w);
        kr.read("public", p.ext_ip_public_w);
        kr.read("private", p.ext_ip_private_w);
      }
      r.read("encrypts_peer_traffic", p.encrypts_peer_traffic);
      r.read("dht_enabled", p.dht_enabled);
      c.profiles.push_back(std::move(p));
    }
  }
  if (const json* o = top.find("torrents")) {
    Reader r{*o, "torrents"};
    r.known_keys({"count", "size_median", "size_sigma", "size_max", "sizes"});
    r.read("count", c.torrent_count);
    r.read("size_median", c.torrent_size_median);
    r.read("size_sigma", c.torrent_size_sigma);
    r.read("size_max", c.torrent_size_max);
    r.read("sizes", c.torrent_sizes);
  }
  if (const json* o = top.find("ports")) {
    Reader r{*o, "ports"};
    r.known_keys({"popular_mass", "popular"});
    r.read("popular_mass", c.popular_port_mass);
    r.read("popular", c.popular_ports);
  }
  if (const json* o = top.find("overlay")) {
    Reader r{*o, "overlay"};
    r.known_keys({"relay_count", "exit_relay_count", "tapped_exit_count", "circuit_pool_size",
                  "circuit_lifetime_s"});
    r.read("relay_count", c.relay_count);
    r.read("exit_relay_count", c.exit_relay_count);
    r.read("tapped_exit_count", c.tapped_exit_count);
    r.read("circuit_pool_size", c.circuit_pool_size);
    r.read("circuit_lifetime_s", c.circuit_lifetime_s);
  }
  if (const json* o = top.find("tracker")) {
    Reader r{*o, "tracker"};
    r.known_keys({"peers_per_response", "announce_interval_s", "member_ttl_s"});
    r.read("peers_per_response", c.tracker_peers_per_response);
    r.read("announce_interval_s", c.announce_interval_s);
    r.read("member_ttl_s", c.tracker_member_ttl_s);
  }
  if (const json* o = top.find("dht")) {
    Reader r{*o, "dht"};
    r.known_keys({"node_count", "peers_per_response", "crawl_stable_rounds", "crawl_cache_ttl_s"});
    r.read("node_count", c.dht_node_count);
    r.read("peers_per_response", c.dht_peers_per_response);
    r.read("crawl_stable_rounds", c.crawl_stable_rounds);
    r.read("crawl_cache_ttl_s", c.crawl_cache_ttl_s);
  }
  if (const json* o = top.find("attacks")) {
    Reader r{*o, "attacks"};
    r.known_keys({"inspect", "hijack", "dht_match", "domino", "hijack_pending_ttl_s",
                  "inter_domino_window_s", "port_exclusions"});
    r.read("inspect", c.attack_inspect);
    r.read("hijack", c.attack_hijack);
    r.read("dht_match", c.attack_dht_match);
    r.read("domino", c.attack_domino);
    r.read("hijack_pending_ttl_s", c.hijack_pending_ttl_s);
    r.read("inter_domino_window_s", c.inter_domino_window_s);
    r.read("port_exclusions", c.dht_port_exclusions);
  }
  if (const json* o = top.find("http")) {
    Reader r{*o, "http"};
    r.known_keys({"habit_fraction", "destination_count", "sites_per_agent",
                  "browse_interval_mean_s", "categories"});
    r.read("habit_fraction", c.http_habit_fraction);
    r.read("destination_count", c.http_destination_count);
    r.read_range("sites_per_agent", c.http_sites_per_agent_min, c.http_sites_per_agent_max);
    r.read("browse_interval_mean_s", c.browse_interval_mean_s);
    r.read("categories", c.http_categories);
  }
  if (const json* o = top.find("groups")) {
    if (!o->is_array()) throw ConfigInvalid("groups", "expected an array");
    c.groups.clear();
    for (size_t i = 0; i < o->size(); ++i) {
      const json& g = (*o)[i];
      if (!g.is_array() || g.size() != 3)
        throw ConfigInvalid("groups[" + std::to_string(i) + "]",
                            "expected [label, tor_weight, baseline_weight]");
      try {
        c.groups.push_back({g[0].get<std::string>(), g[1].get<double>(), g[2].get<double>()});
      } catch (const json::exception& e) {
        throw ConfigInvalid("groups[" + std::to_string(i) + "]", std::string("bad value: ") + e.what());
      }
    }
  }
  if (const json* o = top.find("outputs")) {
    Reader r{*o, "outputs"};
    r.known_keys({"observation_log"});
    r.read("observation_log", c.write_observation_log);
  }
  return c;
}

ScenarioConfig ScenarioConfig::preset(const std::string& name) {
  ScenarioConfig c = from_json(json::object());
  c.seed = 1;
  if (name == "paper-defaults") {
    c.duration_s = 23 * 86400;
    c.peer_count = 10000;
    c.torrent_count = 500;
    return c;
  }
  if (name == "dht-fp-study") {
    c.duration_s = 6 * 3600;
    c.peer_count = 2000;
    c.torrent_count = 20;
    c.torrent_sizes = {100, 1000};
    c.popular_port_mass = 0.05;
    c.attack_hijack = false;
    c.attack_domino = false;
    c.relay_count = 24;
    c.exit_relay_count = 8;
    c.tapped_exit_count = 8;
    c.http_habit_fraction = 0.0;
    for (ClientProfile& p : c.profiles) {
      if (p.name == "nodht") p.weight = 0.5;
      if (p.name == "leaky") p.weight = 0.4;
      if (p.name == "sealed") p.weight = 0.1;
    }
    return c;
  }
  if (name == "domino-study") {
    c.duration_s = 4 * 3600;
    c.peer_count = 2000;
    c.torrent_count = 100;
    c.http_habit_fraction = 1.0;
    c.browse_interval_mean_s = 150;
    c.http_sites_per_agent_min = 2;
    c.http_sites_per_agent_max = 5;
    for (ClientProfile& p : c.profiles) {
      if (p.name == "sealed") p.weight = 0.5;
      if (p.name == "leaky") p.weight = 0.4;
      if (p.name == "nodht") p.weight = 0.1;
    }
    return c;
  }
  throw ConfigInvalid("preset", "unknown preset '" + name + "'");
}

std::vector<std::string> ScenarioConfig::preset_names() {
  return {"paper-defaults", "dht-fp-study", "domino-study"};
}

}  // namespace swarmtap
