#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace qmsan::util {

// Runs fn(0..count-1), chunked over up to `threads` workers (0 = hardware
// concurrency). Callers keep determinism by writing to disjoint slots and
// reducing in index order afterwards.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  int t = threads;
  if (t <= 0) t = static_cast<int>(std::thread::hardware_concurrency());
  if (t < 1) t = 1;
  t = std::min<int>(t, static_cast<int>(count));
  if (t <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(t);
  const std::size_t chunk = (count + t - 1) / t;
  for (int w = 0; w < t; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// Tukey-hinge quartiles over a copy of the data.
struct Quartiles {
  double q1 = 0.0, median = 0.0, q3 = 0.0;
};

inline double median_of(std::vector<double> v, std::size_t lo, std::size_t hi) {
  const std::size_t n = hi - lo;
  return n % 2 ? v[lo + n / 2] : 0.5 * (v[lo + n / 2 - 1] + v[lo + n / 2]);
}

inline Quartiles quartiles(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  Quartiles q;
  q.median = median_of(v, 0, n);
  const std::size_t half = n / 2;
  q.q1 = median_of(v, 0, half + (n % 2));  // lower half includes the median for odd n
  q.q3 = median_of(v, half, n);
  return q;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace qmsan::util
