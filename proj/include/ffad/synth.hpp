#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffad/common.hpp"

// Synthetic web-service telemetry with injected faults. Produces the same
// file formats the ingest layer reads (metrics CSV, timestamped log lines,
// per-block labels CSV) plus a small manifest. Output is byte-identical for
// a given config and seed.
namespace ffad::synth {

enum class fault_kind {
  metric_spike,        // short additive offset on metric channels
  metric_level_shift,  // long additive offset on metric channels
  template_burst,      // a template fires repeatedly every block
  rare_template,       // a never-seen-otherwise template fires each block
  correlated_lagged,   // rare-template burst, metric offset `lag` blocks later
};

struct fault_spec {
  fault_kind kind = fault_kind::metric_spike;
  std::size_t start = 0;     // first affected block
  std::size_t duration = 1;  // blocks
  double magnitude = 0.0;    // metric kinds: additive offset; bursts: lines per block
  std::vector<std::size_t> metric_channels;  // metric_spike / level_shift / correlated
  std::vector<std::size_t> template_ids;     // burst / rare / correlated
  std::size_t lag = 0;  // correlated_lagged only: metric offset delay in blocks
};

// Per-metric baseline: offset + amplitude*sin(2*pi*t/period) + AR(1) noise.
struct metric_baseline {
  double offset = 0.0;
  double amplitude = 1.0;
  double period = 96.0;      // blocks per cycle
  double ar_rho = 0.6;       // AR(1) coefficient, |rho| < 1
  double noise_sigma = 0.1;  // innovation stddev
};

struct synth_config {
  std::size_t T = 10000;  // number of time blocks
  std::int64_t dt = 10;   // seconds per block
  std::int64_t t0 = 1700000000;
  std::uint64_t seed = 0;
  std::vector<metric_baseline> metrics;
  std::vector<double> template_prob;  // per-template per-block fire probability
  std::vector<fault_spec> faults;

  std::size_t n_metrics() const { return metrics.size(); }
  std::size_t pool_size() const { return template_prob.size(); }
  void validate() const;  // throws config_error
};

// Token patterns for the template pool; "<num>" slots are filled with random
// integers at render time. Index == template id. Every pattern starts with a
// distinct alphabetic word so a miner can separate them.
std::vector<std::vector<std::string>> template_pool(std::size_t pool_size);

// Ground-truth block labels: union of all fault intervals. correlated_lagged
// marks both the burst interval and the lagged metric interval.
std::vector<int> fault_labels(const synth_config& cfg);

// Writes metrics.csv, logs.txt, labels.csv, manifest.json into out_dir
// (created if missing). Throws data_error on I/O failure.
void generate(const synth_config& cfg, const std::string& out_dir);

// The in-repo benchmark scenario: T=10000 blocks of 10s, 8 metrics, a pool of
// 40 templates (ids 32..39 reserved for rare/correlated faults), and a fixed
// fault schedule covering all five kinds in every chronological split region,
// labelling ~5% of blocks. `seed` drives baselines and rendering only; the
// schedule and labels never change.
synth_config default_benchmark_profile(std::uint64_t seed);

}  // namespace ffad::synth
