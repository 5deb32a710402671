#include "ffad/ingest.hpp"

#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ffad/common.hpp"

namespace ffad::ingest {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

}  // namespace

bool parse_epoch_seconds(const std::string& token, std::int64_t& out) {
  double v = 0.0;
  if (!parse_double(token, v) || !std::isfinite(v)) return false;
  if (std::abs(v) >= 1e12) v /= 1000.0;  // millisecond input
  out = static_cast<std::int64_t>(std::floor(v));
  return true;
}

metrics_file read_metrics(const std::string& path,
                          const std::vector<std::string>& expected_schema) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw data_error("metrics file is empty: " + path);

  metrics_file mf;
  auto header = split_csv(line);
  if (header.empty() || header[0] != "timestamp")
    throw data_error("metrics header must start with 'timestamp': " + path);
  mf.names.assign(header.begin() + 1, header.end());
  if (mf.names.empty()) throw data_error("metrics file declares no metric columns: " + path);
  if (!expected_schema.empty() && mf.names != expected_schema) {
    throw data_error("metric columns do not match the declared schema in " + path);
  }

  const size_t n = mf.names.size();
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != n + 1) {
      ++mf.bad_rows;
      continue;
    }
    metric_sample s;
    if (!parse_epoch_seconds(cells[0], s.timestamp)) {
      ++mf.bad_rows;
      continue;
    }
    s.values.resize(n);
    for (size_t j = 0; j < n; ++j) {
      double v = 0.0;
      if (cells[j + 1].empty() || !parse_double(cells[j + 1], v)) {
        s.values[j] = std::numeric_limits<double>::quiet_NaN();
        ++mf.bad_cells;
      } else {
        s.values[j] = v;
      }
    }
    mf.samples.push_back(std::move(s));
  }
  if (mf.samples.empty()) throw data_error("metrics file has no data rows: " + path);
  return mf;
}

logs_file read_logs(const std::string& path, const std::string& timestamp_format) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open log file: " + path);
  logs_file lf;
  std::string line;
  const bool epoch = timestamp_format == "epoch";
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    raw_log_line rl;
    std::string rest;
    bool ok = false;
    if (epoch) {
      const size_t sp = line.find_first_of(" \t");
      const std::string tok = sp == std::string::npos ? line : line.substr(0, sp);
      ok = parse_epoch_seconds(tok, rl.timestamp);
      rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    } else {
      std::istringstream ss(line);
      std::tm tm = {};
      ss >> std::get_time(&tm, timestamp_format.c_str());
      if (!ss.fail()) {
        rl.timestamp = timegm(&tm);  // pattern times are UTC
        ok = true;
        std::getline(ss, rest);
      }
    }
    rl.text = trim(rest);
    if (!ok || rl.text.empty()) {
      ++lf.rejected;
      continue;
    }
    lf.lines.push_back(std::move(rl));
  }
  return lf;
}

labels_file read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open labels file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw data_error("labels file is empty: " + path);
  auto header = split_csv(line);
  if (header.size() != 2 || header[0] != "block" || header[1] != "label")
    throw data_error("labels header must be 'block,label': " + path);
  labels_file out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != 2) throw data_error("malformed labels row in " + path);
    double b = 0.0, l = 0.0;
    if (!parse_double(cells[0], b) || !parse_double(cells[1], l) || b < 0 ||
        (l != 0.0 && l != 1.0))
      throw data_error("labels must be (block >= 0, label in {0,1}): " + path);
    out.entries.emplace_back(static_cast<size_t>(b), static_cast<int>(l));
  }
  return out;
}

metric_matrix assemble_metric_matrix(const metrics_file& mf, const time_block_index& idx) {
  const size_t n = mf.names.size();
  if (idx.count == 0) throw data_error("time block index is empty");
  auto buckets = bucket(mf.samples, idx);

  metric_matrix out;
  out.values = real_tensor({idx.count, n});
  out.dropped_samples = buckets.dropped;

  // per-block averages, NaN where a block has no valid observation
  real_tensor avg({idx.count, n});
  for (auto& v : avg.data) v = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [b, samples] : buckets.blocks) {
    for (size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      size_t cnt = 0;
      for (const auto& s : samples) {
        if (!std::isnan(s.values[j])) {
          acc += s.values[j];
          ++cnt;
        }
      }
      if (cnt > 0) avg.at(b, j) = acc / static_cast<double>(cnt);
    }
  }

  for (size_t j = 0; j < n; ++j) {
    size_t first = idx.count;
    for (size_t t = 0; t < idx.count; ++t) {
      if (!std::isnan(avg.at(t, j))) {
        first = t;
        break;
      }
    }
    if (first == idx.count)
      throw data_error("metric '" + mf.names[j] + "' has no observed values");
    double carry = avg.at(first, j);
    out.leading_fills += first;
    for (size_t t = 0; t < idx.count; ++t) {
      if (std::isnan(avg.at(t, j))) {
        out.values.at(t, j) = carry;
        if (t > first) ++out.filled_cells;  // leading fills counted separately
      } else {
        carry = avg.at(t, j);
        out.values.at(t, j) = carry;
      }
    }
  }
  return out;
}

}  // namespace ffad::ingest
