#include "ffad/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace ffad {

double percentile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw numeric_error("percentile of empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw numeric_error("percentile p out of [0,100]");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n == 1) return values[0];
  const double rank = (p / 100.0) * static_cast<double>(n - 1);
  const auto lo = static_cast<size_t>(rank);
  if (lo + 1 >= n) return values[n - 1];
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double population_variance(std::span<const double> values) {
  if (values.empty()) throw numeric_error("variance of empty set");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(values.size());
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& text) {
  return fnv1a64(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string fmt_double(double v) {
  // %.17g always round-trips; prefer the shorter %.15g / %.16g when exact.
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace ffad
