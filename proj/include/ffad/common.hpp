#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Shared plumbing: error taxonomy, seeding, percentile math, hashing,
// number formatting. Everything here is deterministic.

namespace ffad {

// Error classes map 1:1 onto CLI exit codes (2, 3, 4).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64; used to derive independent seed streams from one base seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed streams are (base, stream, counter...) hashes, never a shared engine:
// epoch E of one stream is reproducible without replaying epochs 0..E-1,
// which is what makes checkpoint resume bit-identical.
enum class seed_stream : std::uint64_t {
  synth = 1,
  init = 2,
  shuffle = 3,
  noise = 4,
  test_misc = 99,
};

inline std::uint64_t mix_seed(std::uint64_t base, seed_stream stream,
                              std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(base ^ 0x6a09e667f3bcc908ull);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t base, seed_stream stream,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
  return std::mt19937_64(mix_seed(base, stream, a, b));
}

// p-th percentile (p in [0,100]) with linear interpolation between order
// statistics, over exactly the values given. Used both by the frequency
// gate and by the percentile threshold policy.
double percentile_linear(std::vector<double> values, double p);

// Population (biased, 1/N) variance.
double population_variance(std::span<const double> values);

// FNV-1a over bytes; stable across runs, used for config hashes and
// checkpoint checksums.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64(const std::string& text);
std::string to_hex(std::uint64_t value);

// Shortest exact decimal for a double (round-trips through strtod).
std::string fmt_double(double v);

}  // namespace ffad
