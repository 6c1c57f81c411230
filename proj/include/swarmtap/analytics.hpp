#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "swarmtap/adversary.hpp"
#include "swarmtap/ip.hpp"

namespace swarmtap::analytics {

// ---- data-parallel kernels ----
// Each kernel ships as a serial reference plus an OpenMP partition-and-merge
// variant. Both produce identical results; the serial form is the test
// oracle and the benchmark baseline.

std::map<int64_t, uint64_t> count_values_serial(std::span<const int64_t> xs);
std::map<int64_t, uint64_t> count_values_parallel(std::span<const int64_t> xs);

// Occurrences per key where two sightings count separately only when at
// least `spacing` apart (times need not be sorted).
std::vector<uint32_t> spaced_occurrences_serial(const std::vector<std::vector<int64_t>>& times,
                                                int64_t spacing);
std::vector<uint32_t> spaced_occurrences_parallel(const std::vector<std::vector<int64_t>>& times,
                                                  int64_t spacing);

// Equal-width binning over [lo, hi] (values outside are dropped).
std::vector<uint64_t> bin_counts_serial(std::span<const uint16_t> xs, uint16_t lo, uint16_t hi,
                                        size_t bins);
std::vector<uint64_t> bin_counts_parallel(std::span<const uint16_t> xs, uint16_t lo, uint16_t hi,
                                          size_t bins);

// ---- statistics ----

// Upper regularized incomplete gamma Q(s, x).
double regularized_gamma_q(double s, double x);

struct ChiSquare {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};
// Pearson test of the bins against a uniform expectation.
ChiSquare chi_square_uniform(const std::vector<uint64_t>& bins);

struct CdfPoint {
  double x = 0.0;
  double p = 0.0;
};
std::vector<CdfPoint> make_cdf(std::vector<double> values);

// ---- the paper-shaped operations ----

struct UsageEstimate {
  struct Day {
    int64_t day = 0;
    uint64_t tracker_only = 0;  // unique peer ids connecting from public addresses
    uint64_t content = 0;       // unique peer ids connecting from exit addresses
    std::optional<double> tracker_only_share;
  };
  std::vector<Day> per_day;
  uint64_t unique_peer_ids = 0;
  std::optional<double> overall_tracker_only_share;  // pooled over the whole run
};
UsageEstimate usage_mode_estimate(const std::vector<adversary::HijackConnection>& conns);

// occurrence count -> number of addresses, with >= spacing between sightings
std::map<uint32_t, uint64_t> returning_ips(const std::vector<std::pair<IpAddr, int64_t>>& sightings,
                                           int64_t spacing = 86400, bool parallel = false);

// fraction-of-tor over fraction-of-baseline per group; nullopt = absent from
// the baseline population (printed as "-")
std::map<std::string, std::optional<double>> over_representation(
    const std::map<std::string, uint64_t>& tor_counts,
    const std::map<std::string, double>& baseline_weights);

// CDF over compromised addresses of how many attributed streams were HTTP
std::vector<CdfPoint> cooccurrence_cdf(const adversary::DominoResult& domino,
                                       const std::map<overlay::StreamId, adversary::StreamDigest>& digests);

// ---- the full report ----

struct Report {
  std::map<uint16_t, uint64_t> port_histogram;  // one port per de-anonymized address
  ChiSquare port_chi_square;
  std::vector<CdfPoint> torrent_size_cdf;
  std::vector<CdfPoint> circuits_per_ip_cdf;
  std::vector<CdfPoint> streams_per_ip_cdf;
  UsageEstimate usage;
  std::map<int64_t, uint64_t> unique_ips_per_day;  // cumulative
  std::map<uint32_t, uint64_t> ip_occurrences;
  struct GroupRow {
    std::string label;
    uint64_t count = 0;
    double fraction = 0.0;
    std::optional<double> over;
  };
  std::vector<GroupRow> groups;  // sorted by count, descending
  std::map<std::string, std::map<std::string, uint64_t>> http_categories_per_group;
  std::vector<CdfPoint> http_bt_cooccurrence_cdf;
  adversary::IpClassTally ip_tally;

  nlohmann::json to_json() const;
  // One flat CSV-style table per figure, under dir.
  void write_tables(const std::string& dir) const;
};

struct ReportInputs {
  const std::vector<adversary::DeanonRecord>* records = nullptr;
  const adversary::DominoResult* domino = nullptr;
  const std::map<overlay::StreamId, adversary::StreamDigest>* digests = nullptr;
  const std::vector<adversary::HijackConnection>* hijack_connections = nullptr;
  const adversary::IpClassTally* tally = nullptr;
  std::vector<int> torrent_sizes;
  std::map<IpAddr, std::string> ip_groups;
  std::map<Endpoint, std::string> http_categories;
  std::map<std::string, double> baseline_weights;
  bool parallel = false;
};
Report build_report(const ReportInputs& in);

}  // namespace swarmtap::analytics
