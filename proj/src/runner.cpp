#include "swarmtap/runner.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "swarmtap/error.hpp"

namespace swarmtap::runner {

using adversary::DeanonRecord;
using adversary::Evaluator;
using adversary::ExitMonitor;
using adversary::MonitorConfig;

std::string observation_line(const overlay::ExitObservation& obs) {
  std::string line = "{\"t\":";
  line += std::to_string(obs.time);
  line += ",\"exit\":";
  line += std::to_string(obs.exit_relay);
  line += ",\"circuit\":";
  line += std::to_string(obs.circuit_id);
  line += ",\"stream\":";
  line += std::to_string(obs.stream_id);
  line += ",\"dst\":\"";
  line += obs.destination.str();
  line += "\",\"dir\":\"";
  line += obs.direction == overlay::Direction::ToDestination ? "out" : "in";
  line += "\",\"enc\":";
  line += obs.payload_encrypted ? "true" : "false";
  line += ",\"payload\":\"";
  line += to_hex(obs.payload);
  line += "\"}";
  return line;
}

std::string deanon_line(const DeanonRecord& rec) {
  nlohmann::json j;
  j["t"] = rec.time;
  j["method"] = adversary::to_string(rec.method);
  j["ip"] = rec.claimed_ip.str();
  j["verified"] = rec.verified;
  j["piece_confirmed"] = rec.piece_confirmed;
  nlohmann::json streams = nlohmann::json::array();
  for (overlay::StreamId s : rec.supporting_streams) streams.push_back(s);
  j["streams"] = streams;
  nlohmann::json pids = nlohmann::json::array();
  for (const btwire::PeerId& p : rec.peer_ids_seen) pids.push_back(to_hex(p.bytes()));
  j["peer_ids"] = pids;
  return j.dump();
}

nlohmann::json evaluation_json(const Evaluator::Evaluation& ev) {
  auto stats_json = [](const Evaluator::MethodStats& s) {
    nlohmann::json j;
    j["attributions"] = s.attributions;
    j["correct"] = s.correct;
    j["precision"] = s.precision ? nlohmann::json(*s.precision) : nlohmann::json();
    j["recall"] = s.recall;
    return j;
  };
  nlohmann::json j;
  j["ledger_streams"] = ev.ledger_streams;
  j["overall"] = stats_json(ev.overall);
  nlohmann::json per;
  for (const auto& [m, s] : ev.per_stream_method) per[adversary::to_string(m)] = stats_json(s);
  j["per_method_streams"] = per;
  nlohmann::json perr;
  for (const auto& [m, s] : ev.per_record_method) perr[adversary::to_string(m)] = stats_json(s);
  j["per_method_records"] = perr;
  j["conflicts"] = ev.conflicts;
  j["intra_count"] = ev.intra_count;
  j["inter_count"] = ev.inter_count;
  j["intra_share"] = ev.intra_share ? nlohmann::json(*ev.intra_share) : nlohmann::json();
  return j;
}

Session::Session(const ScenarioConfig& cfg, std::filesystem::path out_dir, bool write_outputs)
    : cfg_(cfg), out_dir_(std::move(out_dir)), write_outputs_(write_outputs) {
  cfg_.validate();
  world_ = std::make_unique<swarm::World>(cfg_);

  if (write_outputs_) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir_ / "tables", ec);
    if (ec) throw IoFailure("cannot create output directory " + out_dir_.string());
    if (cfg_.write_observation_log) {
      obs_log_ = std::make_unique<std::ofstream>(observation_log_path());
      if (!*obs_log_) throw IoFailure("cannot open " + observation_log_path().string());
    }
  }

  world_->set_observation_sink([this](const overlay::ExitObservation& obs) {
    ++observations_;
    if (obs_log_) {
      *obs_log_ << observation_line(obs);
      obs_log_->put('\n');
    }
  });

  bool any_attack = cfg_.attack_inspect || cfg_.attack_hijack || cfg_.attack_dht_match ||
                    cfg_.attack_domino;
  if (any_attack && cfg_.tapped_exit_count > 0) {
    MonitorConfig mc;
    mc.exit_ips = world_->exit_ips();
    mc.listener = world_->attacker_listener();
    mc.inspect = cfg_.attack_inspect;
    mc.hijack = cfg_.attack_hijack;
    mc.dht_match = cfg_.attack_dht_match;
    mc.domino = cfg_.attack_domino;
    mc.hijack_pending_ttl_s = cfg_.hijack_pending_ttl_s;
    mc.inter_domino_window_s = cfg_.inter_domino_window_s;
    mc.port_exclusions.insert(cfg_.dht_port_exclusions.begin(), cfg_.dht_port_exclusions.end());
    mc.crawl_stable_rounds = cfg_.crawl_stable_rounds;
    mc.dht_peers_per_response = cfg_.dht_peers_per_response;
    mc.crawl_cache_ttl_s = cfg_.crawl_cache_ttl_s;
    monitor_ = std::make_unique<ExitMonitor>(
        std::move(mc), [this](const btwire::InfoHash& ih) { return world_->dht().sample_peers(ih); });
    for (overlay::RelayId id : world_->tapped_exits()) world_->add_exit_tap(id, monitor_.get());
    world_->set_listener_handler(
        [this](const Endpoint& src, const Bytes& payload, int64_t now) {
          return monitor_->on_listener_connect(src, payload, now);
        });
  }
}

Session::~Session() = default;

namespace {
struct PhaseClock {
  bool enabled;
  std::chrono::steady_clock::time_point t = std::chrono::steady_clock::now();
  PhaseClock() {
    const char* env = std::getenv("SWARMTAP_LOG");
    enabled = env && (std::string_view(env) == "debug" || std::string_view(env) == "2");
  }
  void lap(const char* phase) {
    auto now = std::chrono::steady_clock::now();
    if (enabled) {
      std::cerr << "phase " << phase << ": "
                << std::chrono::duration_cast<std::chrono::milliseconds>(now - t).count()
                << " ms\n";
    }
    t = now;
  }
};
}  // namespace

void Session::run() {
  PhaseClock clock;
  world_->run();
  if (obs_log_) obs_log_->flush();
  clock.lap("simulation");

  if (monitor_) {
    domino_ = monitor_->domino_link();
    evaluation_ = Evaluator(world_->ledger()).evaluate(domino_, monitor_->records());
  } else {
    evaluation_ = Evaluator(world_->ledger()).evaluate(domino_, {});
  }
  clock.lap("domino+evaluation");

  analytics::ReportInputs in;
  static const std::map<overlay::StreamId, adversary::StreamDigest> no_digests;
  if (monitor_) {
    in.records = &monitor_->records();
    in.digests = &monitor_->digests();
    in.hijack_connections = &monitor_->hijack_connections();
    in.tally = &monitor_->tally();
  }
  in.domino = &domino_;
  for (const btwire::InfoHash& ih : world_->torrent_hashes()) {
    const auto* stored = world_->dht().stored(ih);
    in.torrent_sizes.push_back(stored ? static_cast<int>(stored->size()) : 0);
  }
  in.ip_groups = world_->ip_groups();
  in.http_categories = world_->http_category_map();
  for (const GroupSpec& g : cfg_.groups) {
    if (g.baseline_weight > 0) in.baseline_weights[g.label] = g.baseline_weight;
  }
  in.parallel = true;
  report_ = analytics::build_report(in);
  clock.lap("report");

  report_json_ = nlohmann::json();
  report_json_["config"] = cfg_.to_json();  // effective config, for provenance
  report_json_["run"] = {
      {"observations", observations_},
      {"streams", world_->network().streams_opened()},
      {"circuits", world_->network().circuits_built()},
      {"deanon_records", monitor_ ? monitor_->records().size() : 0},
      {"attributed_streams", domino_.by_stream.size()},
      {"dht_crawls", monitor_ ? monitor_->crawls_performed() : 0},
  };
  report_json_["evaluation"] = evaluation_json(evaluation_);
  report_json_["analytics"] = report_.to_json();

  if (write_outputs_) write_outputs();
  clock.lap("outputs");
  ran_ = true;
}

void Session::write_outputs() {
  {
    std::ofstream f(report_path());
    if (!f) throw IoFailure("cannot write " + report_path().string());
    f << report_json_.dump(2) << "\n";
  }
  {
    std::ofstream f(deanon_log_path());
    if (!f) throw IoFailure("cannot write " + deanon_log_path().string());
    if (monitor_) {
      for (const DeanonRecord& rec : monitor_->records()) f << deanon_line(rec) << "\n";
    }
  }
  report_.write_tables(tables_dir().string());
}

nlohmann::json run(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  Session session(cfg, out_dir);
  session.run();
  return session.report_json();
}

}  // namespace swarmtap::runner
