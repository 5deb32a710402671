#include "ffad/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "nlohmann/json.hpp"

namespace ffad::synth {

namespace {

bool is_metric_kind(fault_kind k) {
  return k == fault_kind::metric_spike || k == fault_kind::metric_level_shift;
}

bool is_log_kind(fault_kind k) {
  return k == fault_kind::template_burst || k == fault_kind::rare_template;
}

const char* kind_name(fault_kind k) {
  switch (k) {
    case fault_kind::metric_spike: return "metric_spike";
    case fault_kind::metric_level_shift: return "metric_level_shift";
    case fault_kind::template_burst: return "template_burst";
    case fault_kind::rare_template: return "rare_template";
    case fault_kind::correlated_lagged: return "correlated_lagged";
  }
  return "?";
}

}  // namespace

void synth_config::validate() const {
  if (T == 0) throw config_error("synth: T must be positive");
  if (dt <= 0) throw config_error("synth: dt must be positive");
  if (metrics.empty()) throw config_error("synth: need at least one metric");
  if (template_prob.empty()) throw config_error("synth: need a non-empty template pool");
  for (std::size_t j = 0; j < metrics.size(); ++j) {
    const auto& m = metrics[j];
    if (m.period <= 0.0) throw config_error("synth: metric " + std::to_string(j) + " period must be positive");
    if (std::abs(m.ar_rho) >= 1.0) throw config_error("synth: metric " + std::to_string(j) + " ar_rho must satisfy |rho| < 1");
    if (m.noise_sigma < 0.0) throw config_error("synth: metric " + std::to_string(j) + " noise_sigma must be >= 0");
  }
  for (std::size_t k = 0; k < template_prob.size(); ++k) {
    double p = template_prob[k];
    if (!(p >= 0.0 && p <= 1.0))
      throw config_error("synth: template " + std::to_string(k) + " probability must lie in [0,1]");
  }
  for (std::size_t i = 0; i < faults.size(); ++i) {
    const auto& f = faults[i];
    auto fail = [&](const std::string& what) {
      throw config_error("synth: fault " + std::to_string(i) + " (" + kind_name(f.kind) + "): " + what);
    };
    if (f.duration == 0) fail("duration must be positive");
    if (f.start + f.duration > T) fail("interval extends past the series");
    bool needs_metric = is_metric_kind(f.kind) || f.kind == fault_kind::correlated_lagged;
    bool needs_log = is_log_kind(f.kind) || f.kind == fault_kind::correlated_lagged;
    if (needs_metric) {
      if (f.metric_channels.empty()) fail("needs metric channel ids");
      for (auto c : f.metric_channels)
        if (c >= metrics.size()) fail("metric channel out of range");
    }
    if (needs_log) {
      if (f.template_ids.empty()) fail("needs template ids");
      for (auto t : f.template_ids)
        if (t >= template_prob.size()) fail("template id out of range");
    }
    if (f.kind == fault_kind::correlated_lagged) {
      if (f.lag == 0) fail("lag must be positive");
      if (f.start + f.lag + f.duration > T) fail("lagged interval extends past the series");
    }
  }
}

std::vector<std::vector<std::string>> template_pool(std::size_t pool_size) {
  static const std::vector<std::string> words = {
      "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
      "india", "juliet", "kilo", "lima", "mike", "november", "oscar", "papa",
      "quebec", "romeo", "sierra", "tango", "uniform", "victor", "whiskey", "xray",
      "yankee", "zulu", "amber", "birch", "cedar", "dahlia", "elm", "fern",
      "ginkgo", "hazel", "iris", "jasmine", "kale", "laurel", "maple", "nettle"};
  // Shapes reuse lengths on purpose; the leading word separates templates.
  static const std::vector<std::vector<std::string>> shapes = {
      {"W", "request", "<num>", "served", "in", "<num>", "ms"},
      {"W", "worker", "<num>", "finished", "batch", "<num>"},
      {"W", "cache", "hit", "ratio", "<num>", "percent"},
      {"W", "connection", "pool", "size", "<num>"},
      {"W", "queue", "depth", "<num>"},
      {"W", "heartbeat", "ok"},
      {"W", "session", "<num>", "expired", "after", "<num>", "seconds"},
      {"W", "disk", "usage", "<num>", "percent", "on", "volume", "<num>"},
  };
  if (pool_size > words.size())
    throw config_error("synth: template pool limited to " + std::to_string(words.size()) + " entries");
  std::vector<std::vector<std::string>> pool;
  pool.reserve(pool_size);
  for (std::size_t k = 0; k < pool_size; ++k) {
    auto tokens = shapes[k % shapes.size()];
    tokens[0] = words[k];
    pool.push_back(std::move(tokens));
  }
  return pool;
}

std::vector<int> fault_labels(const synth_config& cfg) {
  cfg.validate();
  std::vector<int> labels(cfg.T, 0);
  auto mark = [&](std::size_t start, std::size_t len) {
    for (std::size_t t = start; t < start + len; ++t) labels[t] = 1;
  };
  for (const auto& f : cfg.faults) {
    mark(f.start, f.duration);
    if (f.kind == fault_kind::correlated_lagged) mark(f.start + f.lag, f.duration);
  }
  return labels;
}

namespace {

struct block_activity {
  // template id -> extra line repetitions this block (from bursts)
  std::vector<std::pair<std::size_t, std::size_t>> forced_lines;
};

// Per-block fault effects, resolved once up front.
struct fault_plan {
  std::vector<std::vector<double>> metric_add;       // T x n additive offsets
  std::vector<block_activity> blocks;                // size T
};

fault_plan resolve_faults(const synth_config& cfg) {
  fault_plan plan;
  plan.metric_add.assign(cfg.T, std::vector<double>(cfg.n_metrics(), 0.0));
  plan.blocks.resize(cfg.T);
  for (const auto& f : cfg.faults) {
    if (is_metric_kind(f.kind)) {
      for (std::size_t t = f.start; t < f.start + f.duration; ++t)
        for (auto c : f.metric_channels) plan.metric_add[t][c] += f.magnitude;
    } else if (f.kind == fault_kind::template_burst) {
      std::size_t reps = f.magnitude > 1.0 ? static_cast<std::size_t>(f.magnitude) : 1;
      for (std::size_t t = f.start; t < f.start + f.duration; ++t)
        for (auto id : f.template_ids) plan.blocks[t].forced_lines.push_back({id, reps});
    } else if (f.kind == fault_kind::rare_template) {
      for (std::size_t t = f.start; t < f.start + f.duration; ++t)
        for (auto id : f.template_ids) plan.blocks[t].forced_lines.push_back({id, 1});
    } else {  // correlated_lagged
      for (std::size_t t = f.start; t < f.start + f.duration; ++t)
        for (auto id : f.template_ids) plan.blocks[t].forced_lines.push_back({id, 1});
      for (std::size_t t = f.start + f.lag; t < f.start + f.lag + f.duration; ++t)
        for (auto c : f.metric_channels) plan.metric_add[t][c] += f.magnitude;
    }
  }
  return plan;
}

std::string render_line(const std::vector<std::string>& tokens, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> num(0, 99999);
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    if (tokens[i] == "<num>")
      out += std::to_string(num(rng));
    else
      out += tokens[i];
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("synth: cannot write " + path.string());
  out << content;
  if (!out) throw data_error("synth: write failed for " + path.string());
}

}  // namespace

void generate(const synth_config& cfg, const std::string& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  const std::size_t n = cfg.n_metrics();
  const auto pool = template_pool(cfg.pool_size());
  const auto plan = resolve_faults(cfg);
  const auto labels = fault_labels(cfg);
  auto rng = make_rng(cfg.seed, seed_stream::synth);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double two_pi = 6.283185307179586476925286766559;

  std::string metrics_csv;
  metrics_csv.reserve(cfg.T * (n + 1) * 12);
  metrics_csv += "timestamp";
  for (std::size_t j = 0; j < n; ++j) metrics_csv += ",m" + std::to_string(j);
  metrics_csv += '\n';

  std::string logs_txt;
  logs_txt.reserve(cfg.T * 64);

  std::vector<double> ar(n, 0.0);
  std::size_t total_lines = 0;
  for (std::size_t t = 0; t < cfg.T; ++t) {
    const std::int64_t ts = cfg.t0 + static_cast<std::int64_t>(t) * cfg.dt;
    metrics_csv += std::to_string(ts);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& b = cfg.metrics[j];
      ar[j] = b.ar_rho * ar[j] + b.noise_sigma * gauss(rng);
      double v = b.offset + b.amplitude * std::sin(two_pi * static_cast<double>(t) / b.period) +
                 ar[j] + plan.metric_add[t][j];
      metrics_csv += ',';
      metrics_csv += fmt_double(v);
    }
    metrics_csv += '\n';

    // Baseline fires in template order, then fault-forced lines in schedule order.
    std::size_t line_in_block = 0;
    auto emit = [&](std::size_t id) {
      std::int64_t line_ts = ts + static_cast<std::int64_t>(line_in_block % static_cast<std::size_t>(cfg.dt));
      logs_txt += std::to_string(line_ts);
      logs_txt += ' ';
      logs_txt += render_line(pool[id], rng);
      logs_txt += '\n';
      ++line_in_block;
      ++total_lines;
    };
    for (std::size_t k = 0; k < cfg.pool_size(); ++k) {
      if (unit(rng) < cfg.template_prob[k]) emit(k);
    }
    for (const auto& [id, reps] : plan.blocks[t].forced_lines)
      for (std::size_t r = 0; r < reps; ++r) emit(id);
  }

  std::string labels_csv = "block,label\n";
  std::size_t labeled = 0;
  for (std::size_t t = 0; t < cfg.T; ++t) {
    labels_csv += std::to_string(t);
    labels_csv += ',';
    labels_csv += labels[t] ? '1' : '0';
    labels_csv += '\n';
    labeled += static_cast<std::size_t>(labels[t]);
  }

  nlohmann::ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["T"] = cfg.T;
  manifest["dt"] = cfg.dt;
  manifest["t0"] = cfg.t0;
  manifest["n_metrics"] = n;
  manifest["pool_size"] = cfg.pool_size();
  manifest["seed"] = cfg.seed;
  manifest["n_faults"] = cfg.faults.size();
  manifest["labeled_blocks"] = labeled;
  manifest["anomaly_ratio"] = fmt_double(static_cast<double>(labeled) / static_cast<double>(cfg.T));
  manifest["total_log_lines"] = total_lines;

  const std::filesystem::path dir(out_dir);
  write_file(dir / "metrics.csv", metrics_csv);
  write_file(dir / "logs.txt", logs_txt);
  write_file(dir / "labels.csv", labels_csv);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

synth_config default_benchmark_profile(std::uint64_t seed) {
  synth_config cfg;
  cfg.T = 10000;
  cfg.dt = 10;
  cfg.t0 = 1700000000;
  cfg.seed = seed;

  // Periods divide T so sinusoids average out exactly over the series.
  const double periods[8] = {25, 40, 50, 80, 100, 125, 200, 250};
  cfg.metrics.resize(8);
  for (std::size_t j = 0; j < 8; ++j) {
    auto& m = cfg.metrics[j];
    m.offset = 0.5 * static_cast<double>(j);
    m.amplitude = 0.6 + 0.1 * static_cast<double>(j);
    m.period = periods[j];
    m.ar_rho = 0.6;
    m.noise_sigma = 0.12;
  }

  // Templates 0..31 fire routinely; 32..39 are reserved for faults.
  cfg.template_prob.assign(40, 0.0);
  for (std::size_t k = 0; k < 32; ++k)
    cfg.template_prob[k] = 0.05 + 0.55 * static_cast<double>((k * 7) % 32) / 31.0;

  using fk = fault_kind;
  auto metric_fault = [](fk kind, std::size_t start, std::size_t dur, double mag,
                         std::vector<std::size_t> ch) {
    fault_spec f;
    f.kind = kind;
    f.start = start;
    f.duration = dur;
    f.magnitude = mag;
    f.metric_channels = std::move(ch);
    return f;
  };
  auto log_fault = [](fk kind, std::size_t start, std::size_t dur, double mag,
                      std::vector<std::size_t> ids) {
    fault_spec f;
    f.kind = kind;
    f.start = start;
    f.duration = dur;
    f.magnitude = mag;
    f.template_ids = std::move(ids);
    return f;
  };
  auto corr_fault = [](std::size_t start, std::size_t dur, double mag, std::size_t ch,
                       std::size_t id, std::size_t lag) {
    fault_spec f;
    f.kind = fk::correlated_lagged;
    f.start = start;
    f.duration = dur;
    f.magnitude = mag;
    f.metric_channels = {ch};
    f.template_ids = {id};
    f.lag = lag;
    return f;
  };

  // Log faults are storms across the rarest routine templates: one extra
  // line in a 45-channel window is invisible to a window-mean score, but a
  // surge of templates that almost never fire is how real incidents look in
  // aggregated logs. Novel-template faults pair the unseen id with such a
  // storm (a new failure mode triggering known error paths). Training is
  // unsupervised on the contaminated stream, so the model partly learns any
  // storm pattern the train region repeats; held-out storms therefore hit
  // template sets that never storm before the split boundary.
  const std::vector<std::size_t> train_storm6 = {24, 15, 6, 29, 20, 11};
  const std::vector<std::size_t> train_storm8 = {24, 15, 6, 29, 20, 11, 2, 25};
  const std::vector<std::size_t> train_comp = {15, 6, 29, 20};
  const std::vector<std::size_t> held_storm6 = {0, 23, 14, 5, 28, 19};
  const std::vector<std::size_t> held_storm8 = {0, 23, 14, 5, 28, 19, 10, 1};
  const std::vector<std::size_t> held_comp = {23, 14, 5, 28, 19, 10};

  // Fixed schedule; blocks [0,7000) train, [7000,9000) test, [9000,10000) val.
  cfg.faults = {
      metric_fault(fk::metric_spike, 400, 4, 4.0, {0}),
      log_fault(fk::template_burst, 600, 25, 1.0, train_storm6),
      log_fault(fk::template_burst, 900, 10, 2.0, {24, 15, 6, 29}),
      metric_fault(fk::metric_level_shift, 1500, 80, 2.5, {2, 3}),
      log_fault(fk::rare_template, 2200, 15, 1.0, {32}),
      log_fault(fk::template_burst, 2200, 15, 1.0, train_comp),
      corr_fault(3000, 12, 3.0, 1, 33, 2),
      metric_fault(fk::metric_spike, 3800, 4, 5.0, {4}),
      log_fault(fk::template_burst, 4500, 20, 1.0, train_storm8),
      metric_fault(fk::metric_level_shift, 5200, 60, 2.0, {5}),
      log_fault(fk::rare_template, 5900, 12, 1.0, {34}),
      log_fault(fk::template_burst, 5900, 12, 1.0, train_comp),
      corr_fault(6500, 10, 3.5, 6, 35, 1),
      metric_fault(fk::metric_level_shift, 6800, 25, 2.6, {1}),

      metric_fault(fk::metric_spike, 7100, 6, 5.5, {3}),
      log_fault(fk::template_burst, 7300, 25, 1.0, held_storm6),
      metric_fault(fk::metric_level_shift, 7600, 55, 2.2, {0, 7}),
      log_fault(fk::rare_template, 7900, 15, 1.0, {36}),
      log_fault(fk::template_burst, 7900, 15, 1.0, held_comp),
      corr_fault(8200, 10, 3.0, 2, 37, 3),
      metric_fault(fk::metric_spike, 8500, 5, 6.0, {6}),
      log_fault(fk::template_burst, 8700, 20, 1.0, held_storm8),
      metric_fault(fk::metric_level_shift, 8850, 45, 2.8, {4}),

      metric_fault(fk::metric_spike, 9100, 4, 5.0, {1}),
      corr_fault(9300, 8, 3.2, 5, 38, 2),
      log_fault(fk::template_burst, 9500, 15, 1.0, held_storm6),
      metric_fault(fk::metric_level_shift, 9700, 25, 2.4, {3}),
      log_fault(fk::rare_template, 9850, 8, 1.0, {39}),
      log_fault(fk::template_burst, 9850, 8, 1.0, held_comp),
  };
  return cfg;
}

}  // namespace ffad::synth
