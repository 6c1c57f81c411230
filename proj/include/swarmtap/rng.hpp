#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

namespace swarmtap {

// Deterministic RNG. mt19937_64 output is pinned by the standard, but the
// std::*_distribution adaptors are not, so every distribution used by the
// simulator is implemented here. Identical seed => identical draw sequence
// on any compiler/stdlib.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // Uniform on [0, n). n == 0 returns 0.
  uint64_t below(uint64_t n) {
    if (n == 0) return 0;
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  // Uniform on [lo, hi], inclusive.
  int64_t range(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo) + 1));
  }

  // Uniform on [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

  // Standard normal via Box-Muller; the spare is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = unit();
    double u2 = unit();
    while (u1 <= 0.0) u1 = unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double lognormal(double mu, double sigma) {
    return std::exp(mu + sigma * normal());
  }

  // Exponential with the given mean.
  double exponential(double mean) {
    double u = unit();
    while (u <= 0.0) u = unit();
    return -mean * std::log(u);
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), Floyd's algorithm. Order is the
  // deterministic insertion order, not sorted. k stays small here (tracker /
  // DHT response sizes), so linear dedupe beats a node-based set.
  std::vector<size_t> sample_indices(size_t n, size_t k) {
    std::vector<size_t> out;
    if (k >= n) {
      out.resize(n);
      for (size_t i = 0; i < n; ++i) out[i] = i;
      return out;
    }
    out.reserve(k);
    auto contains = [&out](size_t v) {
      for (size_t x : out) {
        if (x == v) return true;
      }
      return false;
    };
    for (size_t j = n - k; j < n; ++j) {
      size_t t = static_cast<size_t>(below(j + 1));
      out.push_back(contains(t) ? j : t);
    }
    return out;
  }

  // Index drawn proportionally to non-negative weights (sum > 0).
  size_t weighted(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double r = unit() * total;
    double acc = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (r < acc) return i;
    }
    return w.empty() ? 0 : w.size() - 1;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace swarmtap
