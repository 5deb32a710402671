#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ffad/tensor.hpp"

// File readers and time bucketing. Timestamps are UTC seconds; sub-second
// precision is truncated, and integer millisecond inputs (>= 1e12) are
// detected and divided down. Nothing here is ever silently zeroed: bad
// cells become gaps and carry a warning count.

namespace ffad::ingest {

struct metric_sample {
  std::int64_t timestamp = 0;
  std::vector<double> values;  // NaN marks a gap
};

struct raw_log_line {
  std::int64_t timestamp = 0;
  std::string text;  // non-empty after trimming
};

struct time_block_index {
  std::int64_t t0 = 0;
  std::int64_t dt = 1;  // block width in seconds, > 0
  size_t count = 0;     // number of blocks T

  static constexpr size_t npos = std::numeric_limits<size_t>::max();

  // floor((t - t0) / dt); npos when the result falls outside [0, count)
  size_t block_of(std::int64_t t) const {
    if (dt <= 0) return npos;
    if (t < t0) return npos;
    const auto b = static_cast<size_t>((t - t0) / dt);
    return b < count ? b : npos;
  }
};

struct metrics_file {
  std::vector<std::string> names;  // metric columns, timestamp excluded
  std::vector<metric_sample> samples;
  size_t bad_cells = 0;  // unparseable numeric cells recorded as gaps
  size_t bad_rows = 0;   // rows dropped (bad timestamp / column count)
};

// Header must start with "timestamp"; when expected_schema is non-empty the
// remaining columns must match it exactly (fatal otherwise).
metrics_file read_metrics(const std::string& path,
                          const std::vector<std::string>& expected_schema = {});

struct logs_file {
  std::vector<raw_log_line> lines;
  size_t rejected = 0;  // unparseable timestamp or empty message
};

// timestamp_format: "epoch" (leading numeric token) or a strftime pattern
// such as "%Y-%m-%d %H:%M:%S" (parsed as UTC)
logs_file read_logs(const std::string& path, const std::string& timestamp_format);

struct labels_file {
  std::vector<std::pair<size_t, int>> entries;  // (block, label in {0,1})
};
labels_file read_labels(const std::string& path);

template <typename Item>
struct bucket_result {
  std::map<size_t, std::vector<Item>> blocks;
  size_t dropped = 0;  // timestamps outside the index
};

// Conservation invariant: sum over blocks + dropped == items.size().
template <typename Item>
bucket_result<Item> bucket(const std::vector<Item>& items, const time_block_index& idx) {
  bucket_result<Item> out;
  for (const auto& item : items) {
    const size_t b = idx.block_of(item.timestamp);
    if (b == time_block_index::npos) {
      ++out.dropped;
      continue;
    }
    out.blocks[b].push_back(item);
  }
  return out;
}

struct metric_matrix {
  real_tensor values;        // T x n, fully filled
  size_t filled_cells = 0;   // block-level gaps closed by carry-forward
  size_t leading_fills = 0;  // gaps before the first observation, backfilled
  size_t dropped_samples = 0;
};

// Buckets samples, averages multiple samples per block per metric, then
// forward-fills gaps (a gap before any observed value takes the first
// observed value). A metric with no observations at all is fatal.
metric_matrix assemble_metric_matrix(const metrics_file& mf, const time_block_index& idx);

// Shared timestamp parsing (exposed for tests): returns true on success.
bool parse_epoch_seconds(const std::string& token, std::int64_t& out);

}  // namespace ffad::ingest
