#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "json.hpp"
#include "swarmtap/adversary.hpp"
#include "swarmtap/analytics.hpp"
#include "swarmtap/config.hpp"
#include "swarmtap/swarm.hpp"

namespace swarmtap::runner {

// One scenario execution: world + instrumented exits + logs + report.
// Fully deterministic for a given config; every output file is reproducible
// byte for byte.
class Session {
 public:
  Session(const ScenarioConfig& cfg, std::filesystem::path out_dir, bool write_outputs = true);
  ~Session();

  void run();

  swarm::World& world() { return *world_; }
  adversary::ExitMonitor* monitor() { return monitor_.get(); }
  const adversary::DominoResult& domino() const { return domino_; }
  const adversary::Evaluator::Evaluation& evaluation() const { return evaluation_; }
  const analytics::Report& report() const { return report_; }
  nlohmann::json report_json() const { return report_json_; }
  size_t observations_written() const { return observations_; }

  std::filesystem::path report_path() const { return out_dir_ / "report.json"; }
  std::filesystem::path observation_log_path() const { return out_dir_ / "observations.ndjson"; }
  std::filesystem::path deanon_log_path() const { return out_dir_ / "deanon.ndjson"; }
  std::filesystem::path tables_dir() const { return out_dir_ / "tables"; }

 private:
  void write_outputs();

  ScenarioConfig cfg_;
  std::filesystem::path out_dir_;
  bool write_outputs_;
  std::unique_ptr<swarm::World> world_;
  std::unique_ptr<adversary::ExitMonitor> monitor_;
  std::unique_ptr<std::ofstream> obs_log_;
  size_t observations_ = 0;
  adversary::DominoResult domino_;
  adversary::Evaluator::Evaluation evaluation_;
  analytics::Report report_;
  nlohmann::json report_json_;
  bool ran_ = false;
};

nlohmann::json evaluation_json(const adversary::Evaluator::Evaluation& ev);
std::string observation_line(const overlay::ExitObservation& obs);
std::string deanon_line(const adversary::DeanonRecord& rec);

// Convenience wrapper: build, run, return the report document.
nlohmann::json run(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace swarmtap::runner
