#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace swarmtap {

// Leak behavior of one client flavor. The ip-kind weights control what an
// emitted ip field contains: the client's real public address (v4 or v6),
// a private address, or garbage. Extension-handshake self-IPs can also be an
// exit address (clients that asked an IP-echo service through the tunnel).
struct ClientProfile {
  std::string name = "client";
  std::string peer_id_tag = "-ZZ0000-";
  double weight = 1.0;
  double announce_ip_prob = 0.0;
  double announce_ip_public_w = 0.58;
  double announce_ip_private_w = 0.38;
  double announce_ip_invalid_w = 0.04;
  double announce_public_v6_prob = 0.6;
  double ext_ip_prob = 0.0;
  double ext_ip_exit_w = 0.67;
  double ext_ip_public_w = 0.33;
  double ext_ip_private_w = 0.0;
  bool encrypts_peer_traffic = false;
  bool dht_enabled = true;
};

struct GroupSpec {
  std::string label;
  double tor_weight = 0.0;
  double baseline_weight = -1.0;  // < 0: absent from the baseline population
};

struct ScenarioConfig {
  std::optional<uint64_t> seed;  // always explicit, never wall clock
  int64_t duration_s = 86400;

  // peers
  int peer_count = 1000;
  int torrents_per_agent_min = 1;
  int torrents_per_agent_max = 2;
  int64_t session_online_mean_s = 14400;
  int64_t session_offline_mean_s = 14400;
  int connect_cap = 5;
  int64_t contact_memory_ttl_s = 7200;
  double no_tor_fraction = 0.0;

  // usage-mode weights among Tor modes (must sum to 1)
  double mode_tracker_only = 0.72;
  double mode_content_and_tracker = 0.28;
  double mode_peers_only = 0.0;

  std::vector<ClientProfile> profiles;

  // torrents
  int torrent_count = 50;
  double torrent_size_median = 120.0;
  double torrent_size_sigma = 1.6544;
  int torrent_size_max = 5000;
  std::vector<int> torrent_sizes;  // explicit override, cycled to torrent_count

  // listening ports
  double popular_port_mass = 0.10;
  std::vector<uint16_t> popular_ports = {80, 443, 6881, 16884, 35691, 51413};

  // overlay
  int relay_count = 72;
  int exit_relay_count = 24;
  int tapped_exit_count = 6;
  int circuit_pool_size = 2;
  int64_t circuit_lifetime_s = 600;

  // tracker
  int tracker_peers_per_response = 50;  // K
  int64_t announce_interval_s = 600;
  int64_t tracker_member_ttl_s = 1800;

  // dht
  int dht_node_count = 16;
  int dht_peers_per_response = 8;  // K_dht
  int crawl_stable_rounds = 5;     // R
  int64_t crawl_cache_ttl_s = 7200;

  // attacks
  bool attack_inspect = true;
  bool attack_hijack = true;
  bool attack_dht_match = true;
  bool attack_domino = true;
  int64_t hijack_pending_ttl_s = 3600;
  int64_t inter_domino_window_s = 300;  // T
  std::vector<uint16_t> dht_port_exclusions = {80, 443, 6881, 16884, 35691, 51413};

  // http browsing
  double http_habit_fraction = 0.7;
  int http_destination_count = 40;
  int http_sites_per_agent_min = 1;
  int http_sites_per_agent_max = 4;
  int64_t browse_interval_mean_s = 600;
  std::vector<std::pair<std::string, double>> http_categories;

  std::vector<GroupSpec> groups;

  bool write_observation_log = true;

  void validate() const;  // throws ConfigInvalid with a field path
  nlohmann::json to_json() const;
  static ScenarioConfig from_json(const nlohmann::json& j);

  // Named presets: paper-defaults, dht-fp-study, domino-study.
  static ScenarioConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

}  // namespace swarmtap
