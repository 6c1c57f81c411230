#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "swarmtap/analytics.hpp"
#include "swarmtap/rng.hpp"

using namespace swarmtap;
using namespace swarmtap::analytics;

namespace {
adversary::HijackConnection conn(int64_t t, bool from_exit, uint8_t pid) {
  adversary::HijackConnection c;
  c.time = t;
  c.from_exit = from_exit;
  c.peer_id = btwire::PeerId::from_bytes(Bytes(20, static_cast<char>(pid)));
  c.src_ip = IpAddr::v4(11, 0, 0, pid);
  return c;
}
}  // namespace

TEST_CASE("usage estimate: degenerate mixes and N/A") {
  CHECK_FALSE(usage_mode_estimate({}).overall_tracker_only_share.has_value());

  std::vector<adversary::HijackConnection> all_tracker = {conn(10, false, 1), conn(20, false, 2)};
  auto est = usage_mode_estimate(all_tracker);
  REQUIRE(est.overall_tracker_only_share.has_value());
  CHECK(*est.overall_tracker_only_share == doctest::Approx(1.0));

  std::vector<adversary::HijackConnection> mixed = {
      conn(10, false, 1), conn(86410, false, 1),  // same peer, two days
      conn(20, true, 2), conn(30, false, 3), conn(40, false, 4)};
  est = usage_mode_estimate(mixed);
  CHECK(est.unique_peer_ids == 4);
  CHECK(*est.overall_tracker_only_share == doctest::Approx(0.75));
  REQUIRE(est.per_day.size() == 2);
  CHECK(est.per_day[0].tracker_only == 3);
  CHECK(est.per_day[0].content == 1);
  CHECK(est.per_day[1].tracker_only == 1);
}

TEST_CASE("returning ips: day spacing rule") {
  IpAddr ip = IpAddr::v4(8, 8, 8, 8);
  // twice 12 h apart: one occurrence
  auto hist = returning_ips({{ip, 1000}, {ip, 1000 + 43200}});
  CHECK(hist == std::map<uint32_t, uint64_t>{{1, 1}});

  // on each of 23 simulated days: 23 occurrences
  std::vector<std::pair<IpAddr, int64_t>> daily;
  for (int d = 0; d < 23; ++d) daily.emplace_back(ip, static_cast<int64_t>(d) * 86400);
  hist = returning_ips(daily);
  CHECK(hist == std::map<uint32_t, uint64_t>{{23, 1}});

  // seen once
  hist = returning_ips({{ip, 5}});
  CHECK(hist == std::map<uint32_t, uint64_t>{{1, 1}});
}

TEST_CASE("over-representation ratios") {
  // 13% of tor users vs 2.4% baseline -> 5.4
  std::map<std::string, uint64_t> tor = {{"a", 13}, {"b", 87}};
  std::map<std::string, double> base = {{"a", 0.024}, {"b", 0.976}};
  auto over = over_representation(tor, base);
  REQUIRE(over["a"].has_value());
  CHECK(std::fabs(*over["a"] - 5.4) < 0.05);

  // identical mixtures -> all ratios 1.0
  std::map<std::string, uint64_t> same = {{"a", 25}, {"b", 75}};
  std::map<std::string, double> same_base = {{"a", 0.25}, {"b", 0.75}};
  over = over_representation(same, same_base);
  CHECK(*over["a"] == doctest::Approx(1.0));
  CHECK(*over["b"] == doctest::Approx(1.0));

  // group missing from the baseline -> "-"
  std::map<std::string, uint64_t> with_cn = {{"a", 10}, {"cn", 10}};
  std::map<std::string, double> no_cn = {{"a", 1.0}};
  over = over_representation(with_cn, no_cn);
  CHECK_FALSE(over["cn"].has_value());
}

TEST_CASE("cooccurrence cdf counts http streams per compromised address") {
  adversary::DominoResult dom;
  std::map<overlay::StreamId, adversary::StreamDigest> digests;
  auto add = [&](overlay::StreamId s, uint8_t ip, bool http) {
    dom.by_stream[s] = {IpAddr::v4(11, 0, 0, ip), adversary::Method::DominoIntra};
    adversary::StreamDigest d;
    d.id = s;
    d.is_http = http;
    digests[s] = d;
  };
  add(1, 1, true);
  add(2, 1, true);
  add(3, 1, false);
  add(4, 2, false);  // browses nothing: contributes a zero
  auto cdf = cooccurrence_cdf(dom, digests);
  REQUIRE(cdf.size() == 2);
  CHECK(cdf[0].x == 0);
  CHECK(cdf[0].p == doctest::Approx(0.5));
  CHECK(cdf[1].x == 2);
  CHECK(cdf[1].p == doctest::Approx(1.0));
}

TEST_CASE("cdf invariants: nondecreasing, terminal 1.0") {
  Rng rng(99);
  std::vector<double> vals;
  for (int i = 0; i < 1000; ++i) vals.push_back(static_cast<double>(rng.below(50)));
  auto cdf = make_cdf(vals);
  REQUIRE(!cdf.empty());
  CHECK(cdf.back().p == doctest::Approx(1.0));
  for (size_t i = 1; i < cdf.size(); ++i) {
    CHECK(cdf[i].x > cdf[i - 1].x);
    CHECK(cdf[i].p >= cdf[i - 1].p);
  }
}

TEST_CASE("chi-square p-values match known quantiles") {
  // Q(s=1/2 table): chi2(df=1) upper 5% point is 3.841; df=63 upper 1% is 92.010
  CHECK(chi_square_uniform({}).statistic == 0.0);
  CHECK(regularized_gamma_q(0.5, 3.841459 / 2.0) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(regularized_gamma_q(63.0 / 2.0, 92.0100 / 2.0) == doctest::Approx(0.01).epsilon(1e-3));
  CHECK(regularized_gamma_q(1.0, 2.0) == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("uniform ports pass the chi-square gate, skewed ports fail") {
  Rng rng(123);
  std::vector<uint16_t> ports;
  for (int i = 0; i < 20000; ++i)
    ports.push_back(static_cast<uint16_t>(1024 + rng.below(65535 - 1024 + 1)));
  auto chi = chi_square_uniform(bin_counts_serial(ports, 1024, 65535, 64));
  CHECK(chi.p_value >= 0.01);

  for (int i = 0; i < 3000; ++i) ports.push_back(6881);
  chi = chi_square_uniform(bin_counts_serial(ports, 1024, 65535, 64));
  CHECK(chi.p_value < 0.01);
}

TEST_CASE("parallel kernels reproduce the serial reference exactly") {
  Rng rng(77);
  std::vector<int64_t> xs;
  for (int i = 0; i < 200000; ++i) xs.push_back(static_cast<int64_t>(rng.below(997)));
  CHECK(count_values_parallel(xs) == count_values_serial(xs));

  std::vector<std::vector<int64_t>> times(500);
  for (auto& v : times) {
    size_t n = rng.below(40);
    for (size_t i = 0; i < n; ++i) v.push_back(static_cast<int64_t>(rng.below(30 * 86400)));
  }
  CHECK(spaced_occurrences_parallel(times, 86400) == spaced_occurrences_serial(times, 86400));

  std::vector<uint16_t> ports;
  for (int i = 0; i < 100000; ++i) ports.push_back(static_cast<uint16_t>(rng.below(65536)));
  CHECK(bin_counts_parallel(ports, 1024, 65535, 64) == bin_counts_serial(ports, 1024, 65535, 64));
}

TEST_CASE("report histogram totals equal the underlying record counts") {
  adversary::DominoResult dom;
  std::map<overlay::StreamId, adversary::StreamDigest> digests;
  for (overlay::StreamId s = 0; s < 10; ++s) {
    dom.by_stream[s] = {IpAddr::v4(11, 0, 0, static_cast<uint8_t>(s % 3)), adversary::Method::DominoIntra};
    adversary::StreamDigest d;
    d.id = s;
    d.circuit = s / 2;
    d.leaked_port = static_cast<uint16_t>(2000 + s % 3);
    digests[s] = d;
  }
  ReportInputs in;
  in.domino = &dom;
  in.digests = &digests;
  Report rep = build_report(in);
  uint64_t total = 0;
  for (const auto& [_, n] : rep.port_histogram) total += n;
  CHECK(total == 3);  // one port per unique address
  REQUIRE(!rep.streams_per_ip_cdf.empty());
  CHECK(rep.streams_per_ip_cdf.back().p == doctest::Approx(1.0));
}
