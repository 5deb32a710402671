#include "ffad/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ffad/common.hpp"

namespace ffad::prep {

namespace {

constexpr double kStdFloor = 1e-8;

double parse_double_strict(const std::string& tok, const char* what) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last)
    throw data_error(std::string("unparseable ") + what + ": '" + tok + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

norm_stats fit_norm(const real_tensor& metrics, size_t row_begin, size_t row_end) {
  if (metrics.rank() != 2) throw data_error("fit_norm expects a T x n matrix");
  const size_t T = metrics.dim(0), n = metrics.dim(1);
  if (row_begin >= row_end || row_end > T)
    throw data_error("fit_norm: empty or out-of-range training split");
  const size_t rows = row_end - row_begin;

  norm_stats ns;
  ns.mean.assign(n, 0.0);
  ns.stddev.assign(n, 0.0);
  for (size_t t = row_begin; t < row_end; ++t)
    for (size_t j = 0; j < n; ++j) ns.mean[j] += metrics.at(t, j);
  for (size_t j = 0; j < n; ++j) ns.mean[j] /= static_cast<double>(rows);
  for (size_t t = row_begin; t < row_end; ++t)
    for (size_t j = 0; j < n; ++j) {
      const double d = metrics.at(t, j) - ns.mean[j];
      ns.stddev[j] += d * d;
    }
  for (size_t j = 0; j < n; ++j)
    ns.stddev[j] = std::max(std::sqrt(ns.stddev[j] / static_cast<double>(rows)), kStdFloor);
  return ns;
}

real_tensor apply_norm(const real_tensor& metrics, const norm_stats& ns) {
  if (metrics.rank() != 2 || metrics.dim(1) != ns.mean.size())
    throw data_error("apply_norm: stats width does not match matrix");
  real_tensor out = metrics;
  const size_t T = out.dim(0), n = out.dim(1);
  for (size_t t = 0; t < T; ++t)
    for (size_t j = 0; j < n; ++j)
      out.at(t, j) = (out.at(t, j) - ns.mean[j]) / ns.stddev[j];
  return out;
}

real_tensor build_log_occurrence(const std::vector<std::vector<int>>& ids_by_block,
                                 int n_templates) {
  if (n_templates < 0) throw data_error("build_log_occurrence: negative template count");
  const size_t T = ids_by_block.size();
  const size_t width = static_cast<size_t>(n_templates) + 1;
  real_tensor out = real_tensor::zeros({T, width});
  for (size_t t = 0; t < T; ++t)
    for (int id : ids_by_block[t]) {
      if (id < -1 || id >= n_templates)
        throw data_error("build_log_occurrence: template id " + std::to_string(id) +
                         " outside [-1, " + std::to_string(n_templates) + ")");
      const size_t col = id < 0 ? width - 1 : static_cast<size_t>(id);
      out.at(t, col) = 1.0;
    }
  return out;
}

std::vector<window_ref> make_windows(size_t T, const std::vector<int>& labels,
                                     const window_spec& spec) {
  if (spec.w == 0 || spec.stride == 0)
    throw config_error("window length and stride must be positive");
  if (T < spec.w)
    throw data_error("series has " + std::to_string(T) + " blocks, shorter than window " +
                     std::to_string(spec.w));
  if (!labels.empty() && labels.size() != T)
    throw data_error("label vector length does not match series");

  std::vector<window_ref> out;
  out.reserve((T - spec.w) / spec.stride + 1);
  for (size_t start = 0; start + spec.w <= T; start += spec.stride) {
    window_ref wr{start, start + spec.w, 0};
    if (!labels.empty())
      for (size_t t = start; t < wr.end; ++t)
        if (labels[t] != 0) {
          wr.label = 1;
          break;
        }
    out.push_back(wr);
  }
  return out;
}

real_tensor slice_rows(const real_tensor& m, size_t start, size_t end) {
  if (m.rank() != 2 || start > end || end > m.dim(0))
    throw data_error("slice_rows: range outside the matrix");
  const size_t c = m.dim(1);
  real_tensor out({end - start, c});
  std::copy(m.data.begin() + start * c, m.data.begin() + end * c, out.data.begin());
  return out;
}

window_sets split_windows(const multimodal_series& s, const window_spec& spec) {
  const size_t T = s.T();
  const auto bounds = chrono_split(T);
  window_sets sets;
  for (const auto& wr : make_windows(T, s.labels, spec)) {
    if (wr.end <= bounds.train_end)
      sets.train.push_back(wr);
    else if (wr.start >= bounds.train_end && wr.end <= bounds.test_end)
      sets.test.push_back(wr);
    else if (wr.start >= bounds.test_end)
      sets.val.push_back(wr);
    // else: straddles a boundary, dropped
  }
  return sets;
}

void save_series(const std::string& dir, const multimodal_series& s) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const size_t T = s.T(), n = s.n_metrics(), nl = s.n_log();
  if (s.log_occurrence.rank() != 2 || s.log_occurrence.dim(0) != T)
    throw data_error("save_series: occurrence row count does not match metrics");
  if (!s.labels.empty() && s.labels.size() != T)
    throw data_error("save_series: label count does not match metrics");

  nlohmann::json manifest{
      {"format_version", 1},
      {"T", T},
      {"n_metrics", n},
      {"n_log", nl},
      {"t0", s.blocks.t0},
      {"dt", s.blocks.dt},
      {"has_labels", !s.labels.empty()},
  };
  manifest["norm"] = {{"mean", s.norm.mean}, {"stddev", s.norm.stddev}};
  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw data_error("cannot write " + dir + "/manifest.json");
    out << manifest.dump(2) << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "metrics.csv");
    if (!out) throw data_error("cannot write " + dir + "/metrics.csv");
    out << "block";
    for (size_t j = 0; j < n; ++j) out << ",m" << j;
    out << '\n';
    for (size_t t = 0; t < T; ++t) {
      out << t;
      for (size_t j = 0; j < n; ++j) out << ',' << fmt_double(s.metrics.at(t, j));
      out << '\n';
    }
  }
  {
    std::ofstream out(fs::path(dir) / "occurrence.jsonl");
    if (!out) throw data_error("cannot write " + dir + "/occurrence.jsonl");
    for (size_t t = 0; t < T; ++t) {
      nlohmann::json cols = nlohmann::json::array();
      for (size_t j = 0; j < nl; ++j)
        if (s.log_occurrence.at(t, j) != 0.0) cols.push_back(j);
      out << cols.dump() << '\n';
    }
  }
  if (!s.labels.empty()) {
    std::ofstream out(fs::path(dir) / "labels.csv");
    if (!out) throw data_error("cannot write " + dir + "/labels.csv");
    out << "block,label\n";
    for (size_t t = 0; t < T; ++t) out << t << ',' << s.labels[t] << '\n';
  }
}

multimodal_series load_series(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw data_error("cannot open " + dir + "/manifest.json");
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("bad manifest.json: " + std::string(e.what()));
  }
  if (manifest.value("format_version", 0) != 1)
    throw data_error("unsupported series artifact version");

  multimodal_series s;
  const size_t T = manifest.at("T").get<size_t>();
  const size_t n = manifest.at("n_metrics").get<size_t>();
  const size_t nl = manifest.at("n_log").get<size_t>();
  s.blocks.t0 = manifest.at("t0").get<std::int64_t>();
  s.blocks.dt = manifest.at("dt").get<std::int64_t>();
  s.blocks.count = T;
  s.norm.mean = manifest.at("norm").at("mean").get<std::vector<double>>();
  s.norm.stddev = manifest.at("norm").at("stddev").get<std::vector<double>>();
  if (s.norm.mean.size() != n || s.norm.stddev.size() != n)
    throw data_error("manifest norm stats width does not match n_metrics");

  s.metrics = real_tensor::zeros({T, n});
  {
    std::ifstream in(fs::path(dir) / "metrics.csv");
    if (!in) throw data_error("cannot open " + dir + "/metrics.csv");
    std::string line;
    if (!std::getline(in, line)) throw data_error("metrics.csv is empty");
    size_t t = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (t >= T) throw data_error("metrics.csv has more rows than manifest T");
      const auto cells = split_csv(line);
      if (cells.size() != n + 1)
        throw data_error("metrics.csv row " + std::to_string(t) + " has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(n + 1));
      for (size_t j = 0; j < n; ++j)
        s.metrics.at(t, j) = parse_double_strict(cells[j + 1], "metric value");
      ++t;
    }
    if (t != T) throw data_error("metrics.csv has fewer rows than manifest T");
  }

  s.log_occurrence = real_tensor::zeros({T, nl});
  {
    std::ifstream in(fs::path(dir) / "occurrence.jsonl");
    if (!in) throw data_error("cannot open " + dir + "/occurrence.jsonl");
    std::string line;
    size_t t = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (t >= T) throw data_error("occurrence.jsonl has more rows than manifest T");
      nlohmann::json cols;
      try {
        cols = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw data_error("occurrence.jsonl row " + std::to_string(t) + ": " + e.what());
      }
      for (const auto& c : cols) {
        const size_t j = c.get<size_t>();
        if (j >= nl)
          throw data_error("occurrence column " + std::to_string(j) + " out of range");
        s.log_occurrence.at(t, j) = 1.0;
      }
      ++t;
    }
    if (t != T) throw data_error("occurrence.jsonl has fewer rows than manifest T");
  }

  if (manifest.at("has_labels").get<bool>()) {
    std::ifstream in(fs::path(dir) / "labels.csv");
    if (!in) throw data_error("cannot open " + dir + "/labels.csv");
    std::string line;
    if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"block", "label"})
      throw data_error("labels.csv must start with header 'block,label'");
    s.labels.assign(T, 0);
    size_t t = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (t >= T) throw data_error("labels.csv has more rows than manifest T");
      const auto cells = split_csv(line);
      if (cells.size() != 2 || (cells[1] != "0" && cells[1] != "1"))
        throw data_error("labels.csv row " + std::to_string(t) + " is malformed");
      s.labels[t] = cells[1] == "1" ? 1 : 0;
      ++t;
    }
    if (t != T) throw data_error("labels.csv has fewer rows than manifest T");
  }
  return s;
}

}  // namespace ffad::prep
