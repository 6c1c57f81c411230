#include "swarmtap/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "swarmtap/error.hpp"

namespace swarmtap::analytics {

using adversary::DeanonRecord;
using adversary::DominoResult;
using adversary::StreamDigest;

// ---- kernels ----

std::map<int64_t, uint64_t> count_values_serial(std::span<const int64_t> xs) {
  std::map<int64_t, uint64_t> out;
  for (int64_t x : xs) out[x]++;
  return out;
}

std::map<int64_t, uint64_t> count_values_parallel(std::span<const int64_t> xs) {
#ifdef _OPENMP
  int threads = omp_get_max_threads();
  std::vector<std::map<int64_t, uint64_t>> parts(threads);
#pragma omp parallel
  {
    auto& local = parts[omp_get_thread_num()];
#pragma omp for schedule(static)
    for (long i = 0; i < static_cast<long>(xs.size()); ++i) local[xs[i]]++;
  }
  // counts are additive, so merging in thread order reproduces the serial map
  std::map<int64_t, uint64_t> out;
  for (const auto& part : parts) {
    for (const auto& [k, v] : part) out[k] += v;
  }
  return out;
#else
  return count_values_serial(xs);
#endif
}

namespace {
uint32_t spaced_count(std::vector<int64_t> times, int64_t spacing) {
  std::sort(times.begin(), times.end());
  uint32_t count = 0;
  int64_t last = 0;
  bool first = true;
  for (int64_t t : times) {
    if (first || t - last >= spacing) {
      ++count;
      last = t;
      first = false;
    }
  }
  return count;
}
}  // namespace

std::vector<uint32_t> spaced_occurrences_serial(const std::vector<std::vector<int64_t>>& times,
                                                int64_t spacing) {
  std::vector<uint32_t> out(times.size());
  for (size_t i = 0; i < times.size(); ++i) out[i] = spaced_count(times[i], spacing);
  return out;
}

std::vector<uint32_t> spaced_occurrences_parallel(const std::vector<std::vector<int64_t>>& times,
                                                  int64_t spacing) {
  std::vector<uint32_t> out(times.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (long i = 0; i < static_cast<long>(times.size()); ++i)
    out[i] = spaced_count(times[i], spacing);
  return out;
}

std::vector<uint64_t> bin_counts_serial(std::span<const uint16_t> xs, uint16_t lo, uint16_t hi,
                                        size_t bins) {
  std::vector<uint64_t> out(bins, 0);
  double width = static_cast<double>(hi - lo + 1) / static_cast<double>(bins);
  for (uint16_t x : xs) {
    if (x < lo || x > hi) continue;
    size_t b = std::min(bins - 1, static_cast<size_t>((x - lo) / width));
    out[b]++;
  }
  return out;
}

std::vector<uint64_t> bin_counts_parallel(std::span<const uint16_t> xs, uint16_t lo, uint16_t hi,
                                          size_t bins) {
#ifdef _OPENMP
  int threads = omp_get_max_threads();
  std::vector<std::vector<uint64_t>> parts(threads, std::vector<uint64_t>(bins, 0));
  double width = static_cast<double>(hi - lo + 1) / static_cast<double>(bins);
#pragma omp parallel
  {
    auto& local = parts[omp_get_thread_num()];
#pragma omp for schedule(static)
    for (long i = 0; i < static_cast<long>(xs.size()); ++i) {
      uint16_t x = xs[i];
      if (x < lo || x > hi) continue;
      size_t b = std::min(bins - 1, static_cast<size_t>((x - lo) / width));
      local[b]++;
    }
  }
  std::vector<uint64_t> out(bins, 0);
  for (const auto& part : parts) {
    for (size_t b = 0; b < bins; ++b) out[b] += part[b];
  }
  return out;
#else
  return bin_counts_serial(xs, lo, hi, bins);
#endif
}

// ---- statistics ----

// Series/continued-fraction evaluation of the regularized incomplete gamma.
double regularized_gamma_q(double s, double x) {
  if (x < 0.0 || s <= 0.0) return 1.0;
  if (x == 0.0) return 1.0;
  double lg = std::lgamma(s);
  if (x < s + 1.0) {
    // P(s,x) by series, Q = 1 - P
    double sum = 1.0 / s;
    double term = sum;
    double a = s;
    for (int i = 0; i < 500; ++i) {
      a += 1.0;
      term *= x / a;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
    }
    double p = sum * std::exp(-x + s * std::log(x) - lg);
    return std::clamp(1.0 - p, 0.0, 1.0);
  }
  // Q(s,x) by Lentz continued fraction
  double tiny = 1e-300;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - s);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-15) break;
  }
  double q = std::exp(-x + s * std::log(x) - lg) * h;
  return std::clamp(q, 0.0, 1.0);
}

ChiSquare chi_square_uniform(const std::vector<uint64_t>& bins) {
  ChiSquare out;
  if (bins.size() < 2) return out;
  uint64_t total = 0;
  for (uint64_t b : bins) total += b;
  if (total == 0) return out;
  double expected = static_cast<double>(total) / static_cast<double>(bins.size());
  for (uint64_t b : bins) {
    double d = static_cast<double>(b) - expected;
    out.statistic += d * d / expected;
  }
  out.df = static_cast<double>(bins.size() - 1);
  out.p_value = regularized_gamma_q(out.df / 2.0, out.statistic / 2.0);
  return out;
}

std::vector<CdfPoint> make_cdf(std::vector<double> values) {
  std::vector<CdfPoint> out;
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  size_t n = values.size();
  for (size_t i = 0; i < n; ++i) {
    if (i + 1 < n && values[i + 1] == values[i]) continue;  // right-continuous step
    out.push_back({values[i], static_cast<double>(i + 1) / static_cast<double>(n)});
  }
  return out;
}

// ---- operations ----

UsageEstimate usage_mode_estimate(const std::vector<adversary::HijackConnection>& conns) {
  UsageEstimate out;
  std::map<int64_t, std::pair<std::set<btwire::PeerId>, std::set<btwire::PeerId>>> daily;
  std::map<btwire::PeerId, bool> pooled;  // peer id -> from_exit at first sighting
  for (const auto& c : conns) {
    auto& [pub, exit] = daily[c.time / 86400];
    (c.from_exit ? exit : pub).insert(c.peer_id);
    pooled.try_emplace(c.peer_id, c.from_exit);
  }
  for (const auto& [day, sets] : daily) {
    UsageEstimate::Day d;
    d.day = day;
    d.tracker_only = sets.first.size();
    d.content = sets.second.size();
    if (d.tracker_only + d.content > 0)
      d.tracker_only_share =
          static_cast<double>(d.tracker_only) / static_cast<double>(d.tracker_only + d.content);
    out.per_day.push_back(d);
  }
  out.unique_peer_ids = pooled.size();
  if (!pooled.empty()) {
    uint64_t pub = 0;
    for (const auto& [_, from_exit] : pooled) {
      if (!from_exit) ++pub;
    }
    out.overall_tracker_only_share = static_cast<double>(pub) / static_cast<double>(pooled.size());
  }
  return out;
}

std::map<uint32_t, uint64_t> returning_ips(const std::vector<std::pair<IpAddr, int64_t>>& sightings,
                                           int64_t spacing, bool parallel) {
  std::map<IpAddr, std::vector<int64_t>> by_ip;
  for (const auto& [ip, t] : sightings) by_ip[ip].push_back(t);
  std::vector<std::vector<int64_t>> times;
  times.reserve(by_ip.size());
  for (auto& [_, v] : by_ip) times.push_back(std::move(v));
  std::vector<uint32_t> counts =
      parallel ? spaced_occurrences_parallel(times, spacing) : spaced_occurrences_serial(times, spacing);
  std::map<uint32_t, uint64_t> hist;
  for (uint32_t c : counts) hist[c]++;
  return hist;
}

std::map<std::string, std::optional<double>> over_representation(
    const std::map<std::string, uint64_t>& tor_counts,
    const std::map<std::string, double>& baseline_weights) {
  std::map<std::string, std::optional<double>> out;
  uint64_t tor_total = 0;
  for (const auto& [_, n] : tor_counts) tor_total += n;
  double base_total = 0.0;
  for (const auto& [_, w] : baseline_weights) {
    if (w > 0) base_total += w;
  }
  for (const auto& [label, n] : tor_counts) {
    auto it = baseline_weights.find(label);
    if (it == baseline_weights.end() || it->second <= 0 || base_total <= 0 || tor_total == 0) {
      out[label] = std::nullopt;  // printed as "-"
      continue;
    }
    double tor_frac = static_cast<double>(n) / static_cast<double>(tor_total);
    double base_frac = it->second / base_total;
    out[label] = tor_frac / base_frac;
  }
  return out;
}

std::vector<CdfPoint> cooccurrence_cdf(
    const DominoResult& domino, const std::map<overlay::StreamId, StreamDigest>& digests) {
  std::map<IpAddr, uint64_t> http_per_ip;
  for (const auto& [sid, attr] : domino.by_stream) {
    auto& slot = http_per_ip[attr.ip];
    auto dig = digests.find(sid);
    if (dig != digests.end() && dig->second.is_http) slot++;
  }
  std::vector<double> counts;
  counts.reserve(http_per_ip.size());
  for (const auto& [_, n] : http_per_ip) counts.push_back(static_cast<double>(n));
  return make_cdf(std::move(counts));
}

// ---- report ----

Report build_report(const ReportInputs& in) {
  Report rep;
  static const std::vector<adversary::DeanonRecord> no_records;
  static const adversary::DominoResult no_domino;
  static const std::map<overlay::StreamId, StreamDigest> no_digests;
  static const std::vector<adversary::HijackConnection> no_conns;
  const auto& records = in.records ? *in.records : no_records;
  const auto& domino = in.domino ? *in.domino : no_domino;
  const auto& digests = in.digests ? *in.digests : no_digests;
  const auto& conns = in.hijack_connections ? *in.hijack_connections : no_conns;
  if (in.tally) rep.ip_tally = *in.tally;

  // one listening port per de-anonymized address (first sighting wins)
  std::map<IpAddr, uint16_t> port_of;
  std::map<IpAddr, std::set<overlay::CircuitId>> circuits_of;
  std::map<IpAddr, uint64_t> streams_of;
  for (const auto& [sid, attr] : domino.by_stream) {
    auto dig = digests.find(sid);
    if (dig == digests.end()) continue;
    streams_of[attr.ip]++;
    circuits_of[attr.ip].insert(dig->second.circuit);
    if (dig->second.leaked_port) port_of.try_emplace(attr.ip, *dig->second.leaked_port);
  }
  std::vector<uint16_t> ports;
  for (const auto& [ip, port] : port_of) {
    rep.port_histogram[port]++;
    ports.push_back(port);
  }
  rep.port_chi_square = chi_square_uniform(bin_counts_serial(ports, 1024, 65535, 64));

  {
    std::vector<double> sizes(in.torrent_sizes.begin(), in.torrent_sizes.end());
    rep.torrent_size_cdf = make_cdf(std::move(sizes));
  }
  {
    std::vector<double> per_ip;
    for (const auto& [_, cs] : circuits_of) per_ip.push_back(static_cast<double>(cs.size()));
    rep.circuits_per_ip_cdf = make_cdf(std::move(per_ip));
    per_ip.clear();
    for (const auto& [_, n] : streams_of) per_ip.push_back(static_cast<double>(n));
    rep.streams_per_ip_cdf = make_cdf(std::move(per_ip));
  }

  rep.usage = usage_mode_estimate(conns);

  // cumulative unique de-anonymized addresses per day, and returning addresses
  {
    std::set<IpAddr> seen;
    std::map<int64_t, uint64_t> firsts;
    std::vector<std::pair<IpAddr, int64_t>> sightings;
    for (const DeanonRecord& r : records) {
      sightings.emplace_back(r.claimed_ip, r.time);
      if (seen.insert(r.claimed_ip).second) firsts[r.time / 86400]++;
    }
    uint64_t cum = 0;
    for (const auto& [day, n] : firsts) {
      cum += n;
      rep.unique_ips_per_day[day] = cum;
    }
    rep.ip_occurrences = returning_ips(sightings, 86400, in.parallel);
  }

  // group distribution over de-anonymized addresses
  {
    std::map<std::string, uint64_t> group_counts;
    std::set<IpAddr> uniq;
    for (const auto& [sid, attr] : domino.by_stream) uniq.insert(attr.ip);
    for (const DeanonRecord& r : records) uniq.insert(r.claimed_ip);
    for (const IpAddr& ip : uniq) {
      auto it = in.ip_groups.find(ip);
      if (it != in.ip_groups.end()) group_counts[it->second]++;
    }
    auto over = over_representation(group_counts, in.baseline_weights);
    uint64_t total = 0;
    for (const auto& [_, n] : group_counts) total += n;
    for (const auto& [label, n] : group_counts) {
      Report::GroupRow row;
      row.label = label;
      row.count = n;
      row.fraction = total ? static_cast<double>(n) / static_cast<double>(total) : 0.0;
      row.over = over[label];
      rep.groups.push_back(row);
    }
    std::stable_sort(rep.groups.begin(), rep.groups.end(),
                     [](const auto& a, const auto& b) { return a.count > b.count; });
  }

  // http categories per group of the attributed source
  for (const auto& [sid, attr] : domino.by_stream) {
    auto dig = digests.find(sid);
    if (dig == digests.end() || !dig->second.is_http) continue;
    auto cat = in.http_categories.find(dig->second.destination);
    if (cat == in.http_categories.end()) continue;
    rep.http_categories_per_group["all"][cat->second]++;
    auto grp = in.ip_groups.find(attr.ip);
    if (grp != in.ip_groups.end()) rep.http_categories_per_group[grp->second][cat->second]++;
  }

  rep.http_bt_cooccurrence_cdf = cooccurrence_cdf(domino, digests);
  return rep;
}

namespace {

nlohmann::json cdf_json(const std::vector<CdfPoint>& cdf) {
  nlohmann::json j = nlohmann::json::array();
  for (const CdfPoint& p : cdf) j.push_back({p.x, p.p});
  return j;
}

void write_cdf_csv(const std::string& path, const char* xname, const std::vector<CdfPoint>& cdf) {
  std::ofstream f(path);
  if (!f) throw IoFailure("cannot write " + path);
  f << xname << ",cdf\n";
  for (const CdfPoint& p : cdf) f << p.x << "," << p.p << "\n";
}

}  // namespace

nlohmann::json Report::to_json() const {
  nlohmann::json j;
  {
    nlohmann::json ports = nlohmann::json::array();
    for (const auto& [port, n] : port_histogram) ports.push_back({port, n});
    j["port_histogram"] = ports;
    j["port_chi_square"] = {{"statistic", port_chi_square.statistic},
                            {"df", port_chi_square.df},
                            {"p_value", port_chi_square.p_value}};
  }
  j["torrent_size_cdf"] = cdf_json(torrent_size_cdf);
  j["circuits_per_ip_cdf"] = cdf_json(circuits_per_ip_cdf);
  j["streams_per_ip_cdf"] = cdf_json(streams_per_ip_cdf);
  {
    nlohmann::json days = nlohmann::json::array();
    for (const auto& d : usage.per_day) {
      nlohmann::json e = {{"day", d.day}, {"tracker_only", d.tracker_only}, {"content", d.content}};
      if (d.tracker_only_share) e["tracker_only_share"] = *d.tracker_only_share;
      days.push_back(e);
    }
    j["usage_mode_daily"] = days;
    j["usage_unique_peer_ids"] = usage.unique_peer_ids;
    if (usage.overall_tracker_only_share)
      j["usage_tracker_only_share"] = *usage.overall_tracker_only_share;
  }
  {
    nlohmann::json days = nlohmann::json::array();
    for (const auto& [day, cum] : unique_ips_per_day) days.push_back({day, cum});
    j["unique_ips_over_time"] = days;
    nlohmann::json occ = nlohmann::json::array();
    for (const auto& [k, n] : ip_occurrences) occ.push_back({k, n});
    j["ip_occurrence_histogram"] = occ;
  }
  {
    nlohmann::json rows = nlohmann::json::array();
    for (const GroupRow& g : groups) {
      nlohmann::json row = {{"label", g.label}, {"count", g.count}, {"fraction", g.fraction}};
      row["over"] = g.over ? nlohmann::json(*g.over) : nlohmann::json("-");
      rows.push_back(row);
    }
    j["group_distribution"] = rows;
  }
  j["http_categories_per_group"] = http_categories_per_group;
  j["http_bt_cooccurrence_cdf"] = cdf_json(http_bt_cooccurrence_cdf);
  {
    nlohmann::json tally;
    const char* names[5] = {"empty", "invalid", "private", "public_exit", "public"};
    for (size_t i = 0; i < 5; ++i) {
      tally["announce"][names[i]] = ip_tally.announce[i];
      tally["ext_handshake"][names[i]] = ip_tally.ext[i];
    }
    j["ip_field_tally"] = tally;
  }
  return j;
}

void Report::write_tables(const std::string& dir) const {
  {
    std::ofstream f(dir + "/fig2_ports.csv");
    if (!f) throw IoFailure("cannot write fig2_ports.csv");
    f << "port,deanonymized_clients\n";
    for (const auto& [port, n] : port_histogram) f << port << "," << n << "\n";
  }
  write_cdf_csv(dir + "/fig2_torrent_sizes.csv", "torrent_size", torrent_size_cdf);
  write_cdf_csv(dir + "/fig3_circuits_per_ip.csv", "circuits", circuits_per_ip_cdf);
  write_cdf_csv(dir + "/fig3_streams_per_ip.csv", "streams", streams_per_ip_cdf);
  {
    std::ofstream f(dir + "/fig4_usage_daily.csv");
    if (!f) throw IoFailure("cannot write fig4_usage_daily.csv");
    f << "day,tracker_only,content,tracker_only_share\n";
    for (const auto& d : usage.per_day) {
      f << d.day << "," << d.tracker_only << "," << d.content << ",";
      if (d.tracker_only_share) f << *d.tracker_only_share;
      f << "\n";
    }
  }
  {
    std::ofstream f(dir + "/fig5_unique_ips.csv");
    if (!f) throw IoFailure("cannot write fig5_unique_ips.csv");
    f << "day,cumulative_unique_ips\n";
    for (const auto& [day, cum] : unique_ips_per_day) f << day << "," << cum << "\n";
  }
  {
    std::ofstream f(dir + "/fig5_ip_occurrences.csv");
    if (!f) throw IoFailure("cannot write fig5_ip_occurrences.csv");
    f << "occurrences,ips\n";
    for (const auto& [k, n] : ip_occurrences) f << k << "," << n << "\n";
  }
  {
    std::ofstream f(dir + "/fig6_table1_groups.csv");
    if (!f) throw IoFailure("cannot write fig6_table1_groups.csv");
    f << "label,count,fraction,over\n";
    for (const GroupRow& g : groups) {
      f << g.label << "," << g.count << "," << g.fraction << ",";
      if (g.over) {
        f << *g.over;
      } else {
        f << "-";
      }
      f << "\n";
    }
  }
  {
    std::ofstream f(dir + "/fig8_http_categories.csv");
    if (!f) throw IoFailure("cannot write fig8_http_categories.csv");
    f << "group,category,requests\n";
    for (const auto& [group, cats] : http_categories_per_group) {
      for (const auto& [cat, n] : cats) f << group << "," << cat << "," << n << "\n";
    }
  }
  write_cdf_csv(dir + "/fig7_http_bt_cooccurrence.csv", "http_streams", http_bt_cooccurrence_cdf);
}

}  // namespace swarmtap::analytics
