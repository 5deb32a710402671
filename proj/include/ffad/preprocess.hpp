#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ffad/ingest.hpp"
#include "ffad/tensor.hpp"

// Aligned multi-modal series: z-scored metrics plus a binary template
// occurrence matrix, cut into sliding windows with a chronological
// train/test/val split. Normalization stats are fitted on the training
// blocks only and reused everywhere else.

namespace ffad::prep {

struct norm_stats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population std, floored at 1e-8
};

// Fit over metric rows [row_begin, row_end); empty range is fatal.
norm_stats fit_norm(const real_tensor& metrics, size_t row_begin, size_t row_end);
real_tensor apply_norm(const real_tensor& metrics, const norm_stats& ns);

// ids_by_block[t] holds the template ids seen in block t; -1 (a shape the
// frozen miner has never seen) maps to the reserved unknown column. Result
// is T x (n_templates + 1) with the unknown column last. Ids outside
// [-1, n_templates) are fatal.
real_tensor build_log_occurrence(const std::vector<std::vector<int>>& ids_by_block,
                                 int n_templates);

struct window_spec {
  size_t w = 50;
  size_t stride = 1;
};

struct window_ref {
  size_t start = 0;  // first block
  size_t end = 0;    // one past the last block; end - start == w
  int label = 0;     // 1 iff any contained block is labeled anomalous
};

// Block boundaries of the chronological 7:2:1 split:
// train [0, train_end), test [train_end, test_end), val [test_end, T).
struct split_bounds {
  size_t train_end = 0;
  size_t test_end = 0;
};
inline split_bounds chrono_split(size_t T) { return {7 * T / 10, 9 * T / 10}; }

struct multimodal_series {
  real_tensor metrics;         // T x n, z-scored
  real_tensor log_occurrence;  // T x n_log, binary, unknown column last
  std::vector<int> labels;     // length T, or empty when unlabeled
  ingest::time_block_index blocks;
  norm_stats norm;

  size_t T() const { return metrics.rank() ? metrics.dim(0) : 0; }
  size_t n_metrics() const { return metrics.rank() > 1 ? metrics.dim(1) : 0; }
  size_t n_log() const { return log_occurrence.rank() > 1 ? log_occurrence.dim(1) : 0; }
};

// Windows over the whole series: starts 0, stride, 2*stride, ... while
// start + w <= T. T < w is fatal. Window labels use the any-block rule;
// pass an empty label vector for unlabeled data.
std::vector<window_ref> make_windows(size_t T, const std::vector<int>& labels,
                                     const window_spec& spec);

// make_windows partitioned by the 7:2:1 block split; windows straddling a
// boundary belong to no split and are dropped.
struct window_sets {
  std::vector<window_ref> train, test, val;
};
window_sets split_windows(const multimodal_series& s, const window_spec& spec);

// Copy of rows [start, end) of a T x c matrix.
real_tensor slice_rows(const real_tensor& m, size_t start, size_t end);

// Portable artifact: manifest.json + metrics.csv + occurrence.jsonl
// (+ labels.csv when labeled). Values round-trip exactly.
void save_series(const std::string& dir, const multimodal_series& s);
multimodal_series load_series(const std::string& dir);

}  // namespace ffad::prep
