#include "ffad/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include "ffad/detect.hpp"
#include "ffad/ingest.hpp"
#include "ffad/preprocess.hpp"
#include "ffad/synth.hpp"
#include "nlohmann/json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ffad::pipeline {

namespace {

[[noreturn]] void bad_config(const std::string& msg) { throw config_error("config: " + msg); }

void check_keys(const json& obj, const char* section,
                std::initializer_list<std::string_view> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (auto a : allowed)
      if (it.key() == a) {
        known = true;
        break;
      }
    if (!known) bad_config("unknown key '" + it.key() + "' in " + section);
  }
}

const json& section(const json& j, const char* name) {
  const auto& s = j.at(name);
  if (!s.is_object()) bad_config(std::string(name) + " must be an object");
  return s;
}

template <typename T>
void read_field(const json& obj, const char* section_name, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(out);
  } catch (const json::exception&) {
    bad_config(std::string(section_name) + "." + key + " has the wrong type");
  }
}

std::string slurp(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error(std::string(what) + " not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write " + path.string());
  out << content;
  if (!out) throw data_error("write failed for " + path.string());
}

void require_absent(const fs::path& path, bool force) {
  if (!force && fs::exists(path))
    throw config_error(path.string() + " already exists; pass --force to overwrite");
}

struct stage_timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void note_stage(const run_config& cfg, const char* name, double seconds,
                std::initializer_list<std::string> inputs,
                std::initializer_list<std::string> outputs) {
  const fs::path path = fs::path(cfg.out_dir) / "run_manifest.json";
  json m = json::object();
  if (fs::exists(path)) {
    try {
      m = json::parse(slurp(path, "run manifest"));
    } catch (const json::exception&) {
      m = json::object();  // a corrupt manifest is rebuilt, never fatal
    }
  }
  m["format_version"] = 1;
  m["tool_version"] = tool_version;
  m["config_hash"] = config_hash(cfg);
  json st;
  st["duration_seconds"] = seconds;
  st["inputs"] = inputs;
  st["outputs"] = outputs;
  m["stages"][name] = st;
  spit(path, m.dump(2) + "\n");
}

void say(const stage_options& opt, const std::string& line) {
  if (opt.log) (*opt.log) << line << "\n";
}

// t0/dt/T for block bucketing: the synth data manifest when present,
// otherwise the metric timestamp range at the configured dt.
ingest::time_block_index resolve_block_index(const run_config& cfg) {
  const fs::path mpath = fs::path(cfg.data_dir) / "manifest.json";
  if (fs::exists(mpath)) {
    json m;
    try {
      m = json::parse(slurp(mpath, "data manifest"));
    } catch (const json::exception& e) {
      throw data_error("data manifest " + mpath.string() + " is not valid JSON: " + e.what());
    }
    ingest::time_block_index idx;
    try {
      idx.t0 = m.at("t0").get<std::int64_t>();
      idx.dt = m.at("dt").get<std::int64_t>();
      idx.count = m.at("T").get<std::size_t>();
    } catch (const json::exception&) {
      throw data_error("data manifest " + mpath.string() + " lacks t0/dt/T");
    }
    if (idx.dt != cfg.dt)
      bad_config("dt is " + std::to_string(cfg.dt) + " but the data manifest says " +
                 std::to_string(idx.dt));
    return idx;
  }
  auto mf = ingest::read_metrics((fs::path(cfg.data_dir) / cfg.metrics_file).string());
  if (mf.samples.empty()) throw data_error("metrics file has no usable rows");
  std::int64_t lo = mf.samples.front().timestamp, hi = lo;
  for (const auto& s : mf.samples) {
    lo = std::min(lo, s.timestamp);
    hi = std::max(hi, s.timestamp);
  }
  ingest::time_block_index idx;
  idx.t0 = lo;
  idx.dt = cfg.dt;
  idx.count = static_cast<std::size_t>((hi - lo) / cfg.dt) + 1;
  return idx;
}

model::model_config resolve_model(const run_config& cfg, const prep::multimodal_series& s) {
  model::model_config m = cfg.model_cfg;
  m.w = cfg.window;
  m.n_metrics = s.n_metrics();
  m.n_log = s.n_log();
  m.validate();
  return m;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

long long parse_ll(const std::string& tok, const char* what) {
  long long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw data_error(std::string(what) + ": bad integer '" + tok + "'");
  return v;
}

// Small end-to-end smoke scenario: 600 blocks, 3 metrics, 8 templates
// (6/7 reserved for rare faults), faults in every split region.
synth::synth_config tiny_profile(std::uint64_t seed) {
  synth::synth_config sc;
  sc.T = 600;
  sc.dt = 10;
  sc.t0 = 1700000000;
  sc.seed = seed;
  sc.metrics.resize(3);
  const double periods[3] = {20, 30, 50};
  for (std::size_t j = 0; j < 3; ++j) {
    auto& m = sc.metrics[j];
    m.offset = static_cast<double>(j);
    m.amplitude = 0.8 + 0.2 * static_cast<double>(j);
    m.period = periods[j];
    m.ar_rho = 0.5;
    m.noise_sigma = 0.1;
  }
  sc.template_prob.assign(8, 0.0);
  for (std::size_t k = 0; k < 6; ++k) sc.template_prob[k] = 0.2 + 0.1 * static_cast<double>(k);

  auto add = [&](synth::fault_spec f) { sc.faults.push_back(std::move(f)); };
  synth::fault_spec f;
  f.kind = synth::fault_kind::metric_spike;
  f.start = 100; f.duration = 2; f.magnitude = 4.0; f.metric_channels = {0};
  add(f);
  f = {};
  f.kind = synth::fault_kind::template_burst;
  f.start = 200; f.duration = 5; f.magnitude = 3.0; f.template_ids = {2};
  add(f);
  f = {};
  f.kind = synth::fault_kind::metric_level_shift;
  f.start = 430; f.duration = 12; f.magnitude = 3.0; f.metric_channels = {1};
  add(f);
  f = {};
  f.kind = synth::fault_kind::rare_template;
  f.start = 470; f.duration = 4; f.magnitude = 1.0; f.template_ids = {6};
  add(f);
  f = {};
  f.kind = synth::fault_kind::correlated_lagged;
  f.start = 555; f.duration = 5; f.magnitude = 3.5;
  f.metric_channels = {2}; f.template_ids = {7}; f.lag = 2;
  add(f);
  f = {};
  f.kind = synth::fault_kind::metric_spike;
  f.start = 580; f.duration = 2; f.magnitude = 5.0; f.metric_channels = {0};
  add(f);
  return sc;
}

}  // namespace

run_config parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    bad_config(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad_config("top level must be an object");
  check_keys(j, "the top level",
             {"data_dir", "out_dir", "synth", "ingest", "window", "miner", "model", "train",
              "threshold"});

  run_config cfg;
  read_field(j, "top level", "data_dir", cfg.data_dir);
  read_field(j, "top level", "out_dir", cfg.out_dir);

  if (j.contains("synth")) {
    const auto& s = section(j, "synth");
    check_keys(s, "synth", {"profile", "seed"});
    cfg.synth_enabled = true;
    read_field(s, "synth", "profile", cfg.synth_profile);
    read_field(s, "synth", "seed", cfg.synth_seed);
    if (cfg.synth_profile != "benchmark" && cfg.synth_profile != "tiny")
      bad_config("synth.profile must be 'benchmark' or 'tiny'");
  }

  if (j.contains("ingest")) {
    const auto& s = section(j, "ingest");
    check_keys(s, "ingest", {"metrics", "logs", "labels", "timestamp_format", "dt"});
    read_field(s, "ingest", "metrics", cfg.metrics_file);
    read_field(s, "ingest", "logs", cfg.logs_file);
    read_field(s, "ingest", "labels", cfg.labels_file);
    read_field(s, "ingest", "timestamp_format", cfg.timestamp_format);
    read_field(s, "ingest", "dt", cfg.dt);
    if (cfg.dt <= 0) bad_config("ingest.dt must be positive");
    if (cfg.metrics_file.empty() || cfg.logs_file.empty())
      bad_config("ingest.metrics and ingest.logs must be non-empty");
  }

  if (j.contains("window")) {
    const auto& s = section(j, "window");
    check_keys(s, "window", {"w", "stride", "train_stride"});
    read_field(s, "window", "w", cfg.window);
    read_field(s, "window", "stride", cfg.stride);
    read_field(s, "window", "train_stride", cfg.train_stride);
    if (cfg.window == 0 || cfg.stride == 0 || cfg.train_stride == 0)
      bad_config("window.w, window.stride and window.train_stride must be positive");
  }

  if (j.contains("miner")) {
    const auto& s = section(j, "miner");
    check_keys(s, "miner", {"depth", "sim_threshold", "max_children"});
    read_field(s, "miner", "depth", cfg.miner_cfg.depth);
    read_field(s, "miner", "sim_threshold", cfg.miner_cfg.sim_threshold);
    read_field(s, "miner", "max_children", cfg.miner_cfg.max_children);
    if (cfg.miner_cfg.depth < 3) bad_config("miner.depth must be at least 3");
    if (!(cfg.miner_cfg.sim_threshold > 0.0 && cfg.miner_cfg.sim_threshold <= 1.0))
      bad_config("miner.sim_threshold must lie in (0,1]");
    if (cfg.miner_cfg.max_children == 0) bad_config("miner.max_children must be positive");
  }

  if (j.contains("model")) {
    const auto& s = section(j, "model");
    check_keys(s, "model",
               {"d_embed", "q_layers", "kernel", "alpha_m", "alpha_l", "sigma2", "lambda",
                "percentile", "accumulate_layers", "noise_train_only", "fff_enabled",
                "stats_per_layer", "noise_auto", "noise_auto_alpha"});
    auto& m = cfg.model_cfg;
    read_field(s, "model", "d_embed", m.d_embed);
    read_field(s, "model", "q_layers", m.q_layers);
    read_field(s, "model", "kernel", m.kernel);
    read_field(s, "model", "alpha_m", m.alpha_m);
    read_field(s, "model", "alpha_l", m.alpha_l);
    read_field(s, "model", "sigma2", m.sigma2);
    read_field(s, "model", "lambda", m.lambda);
    read_field(s, "model", "percentile", m.percentile);
    read_field(s, "model", "accumulate_layers", m.accumulate_layers);
    read_field(s, "model", "noise_train_only", m.noise_train_only);
    read_field(s, "model", "fff_enabled", m.fff_enabled);
    read_field(s, "model", "stats_per_layer", m.stats_per_layer);
    read_field(s, "model", "noise_auto", m.noise_auto);
    read_field(s, "model", "noise_auto_alpha", m.noise_auto_alpha);
  }

  if (j.contains("train")) {
    const auto& s = section(j, "train");
    check_keys(s, "train", {"lr", "batch", "max_epochs", "patience", "seed", "clip_norm"});
    auto& t = cfg.train_cfg;
    read_field(s, "train", "lr", t.lr);
    read_field(s, "train", "batch", t.batch);
    read_field(s, "train", "max_epochs", t.max_epochs);
    read_field(s, "train", "patience", t.patience);
    read_field(s, "train", "seed", t.seed);
    read_field(s, "train", "clip_norm", t.clip_norm);
  }

  if (j.contains("threshold")) {
    const auto& s = section(j, "threshold");
    check_keys(s, "threshold", {"policy"});
    read_field(s, "threshold", "policy", cfg.threshold_policy);
  }

  cfg.train_cfg.validate();
  // field-level model constraints, with placeholder data dims
  model::model_config probe = cfg.model_cfg;
  probe.w = 1;
  probe.n_metrics = 1;
  probe.n_log = 1;
  probe.validate();
  return cfg;
}

run_config load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("config file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string canonical_config(const run_config& cfg) {
  json c;
  c["synth"] = cfg.synth_enabled
                   ? json{{"profile", cfg.synth_profile}, {"seed", cfg.synth_seed}}
                   : json(nullptr);
  c["ingest"] = {{"metrics", cfg.metrics_file},
                 {"logs", cfg.logs_file},
                 {"labels", cfg.labels_file},
                 {"timestamp_format", cfg.timestamp_format},
                 {"dt", cfg.dt}};
  c["window"] = {{"w", cfg.window}, {"stride", cfg.stride}, {"train_stride", cfg.train_stride}};
  c["miner"] = {{"depth", cfg.miner_cfg.depth},
                {"sim_threshold", cfg.miner_cfg.sim_threshold},
                {"max_children", cfg.miner_cfg.max_children}};
  const auto& m = cfg.model_cfg;
  c["model"] = {{"d_embed", m.d_embed},
                {"q_layers", m.q_layers},
                {"kernel", m.kernel},
                {"alpha_m", m.alpha_m},
                {"alpha_l", m.alpha_l},
                {"sigma2", m.sigma2},
                {"lambda", m.lambda},
                {"percentile", m.percentile},
                {"accumulate_layers", m.accumulate_layers},
                {"noise_train_only", m.noise_train_only},
                {"fff_enabled", m.fff_enabled},
                {"stats_per_layer", m.stats_per_layer},
                {"noise_auto", m.noise_auto},
                {"noise_auto_alpha", m.noise_auto_alpha}};
  const auto& t = cfg.train_cfg;
  c["train"] = {{"lr", t.lr},          {"batch", t.batch},
                {"max_epochs", t.max_epochs}, {"patience", t.patience},
                {"seed", t.seed},      {"clip_norm", t.clip_norm}};
  c["threshold"] = {{"policy", cfg.threshold_policy}};
  return c.dump();
}

std::string config_hash(const run_config& cfg) {
  return to_hex(fnv1a64(canonical_config(cfg)));
}

std::string train_identity_hash(const run_config& cfg) {
  json c = json::parse(canonical_config(cfg));
  c["train"].erase("max_epochs");
  c["train"].erase("patience");
  return to_hex(fnv1a64(c.dump()));
}

void stage_synth(const run_config& cfg, const stage_options& opt) {
  if (!cfg.synth_enabled)
    throw config_error("config has no synth section; nothing to generate");
  if (cfg.metrics_file != "metrics.csv" || cfg.logs_file != "logs.txt" ||
      (!cfg.labels_file.empty() && cfg.labels_file != "labels.csv"))
    throw config_error(
        "synth writes metrics.csv/logs.txt/labels.csv; the ingest filenames must match");
  stage_timer timer;
  require_absent(fs::path(cfg.data_dir) / "metrics.csv", opt.force);
  synth::synth_config sc = cfg.synth_profile == "benchmark"
                               ? synth::default_benchmark_profile(cfg.synth_seed)
                               : tiny_profile(cfg.synth_seed);
  synth::generate(sc, cfg.data_dir);
  auto labels = synth::fault_labels(sc);
  std::size_t labeled = 0;
  for (int v : labels) labeled += static_cast<std::size_t>(v);
  say(opt, "[synth] profile " + cfg.synth_profile + ": " + std::to_string(sc.T) + " blocks, " +
               std::to_string(labeled) + " labeled anomalous");
  note_stage(cfg, "synth", timer.seconds(), {},
             {"metrics.csv", "logs.txt", "labels.csv", "manifest.json"});
}

void stage_parse_logs(const run_config& cfg, const stage_options& opt) {
  stage_timer timer;
  const fs::path out(cfg.out_dir);
  require_absent(out / "templates.jsonl", opt.force);
  require_absent(out / "line_ids.csv", opt.force);

  const auto idx = resolve_block_index(cfg);
  const auto bounds = prep::chrono_split(idx.count);
  auto lf = ingest::read_logs((fs::path(cfg.data_dir) / cfg.logs_file).string(),
                              cfg.timestamp_format);
  if (lf.lines.empty()) throw data_error("log file has no usable lines");

  // Mine on the training region only, then assign ids to everything with
  // the tree frozen; later regions can legitimately map to -1 (unseen).
  miner::template_miner tm(cfg.miner_cfg);
  for (const auto& line : lf.lines) {
    const auto b = idx.block_of(line.timestamp);
    if (b != ingest::time_block_index::npos && b < bounds.train_end)
      tm.match_or_create(line.text);
  }
  if (tm.templates().empty())
    throw data_error("no log lines fall inside the training region; check dt and timestamps");

  std::string ids_csv = "line,block,template\n";
  std::size_t dropped = 0, unseen = 0;
  for (std::size_t i = 0; i < lf.lines.size(); ++i) {
    const auto b = idx.block_of(lf.lines[i].timestamp);
    if (b == ingest::time_block_index::npos) {
      ++dropped;
      continue;
    }
    const int id = tm.match_frozen(lf.lines[i].text);
    unseen += static_cast<std::size_t>(id < 0);
    ids_csv += std::to_string(i);
    ids_csv += ',';
    ids_csv += std::to_string(b);
    ids_csv += ',';
    ids_csv += std::to_string(id);
    ids_csv += '\n';
  }
  spit(out / "templates.jsonl", tm.to_jsonl());
  spit(out / "line_ids.csv", ids_csv);
  say(opt, "[parse-logs] " + std::to_string(lf.lines.size()) + " lines -> " +
               std::to_string(tm.templates().size()) + " templates (" +
               std::to_string(unseen) + " unseen, " + std::to_string(dropped) +
               " outside the block range)");
  note_stage(cfg, "parse-logs", timer.seconds(), {cfg.logs_file},
             {"templates.jsonl", "line_ids.csv"});
}

void stage_preprocess(const run_config& cfg, const stage_options& opt) {
  stage_timer timer;
  const fs::path out(cfg.out_dir);
  require_absent(out / "series" / "manifest.json", opt.force);

  const auto idx = resolve_block_index(cfg);
  const auto bounds = prep::chrono_split(idx.count);

  auto mf = ingest::read_metrics((fs::path(cfg.data_dir) / cfg.metrics_file).string());
  auto mm = ingest::assemble_metric_matrix(mf, idx);
  auto norm = prep::fit_norm(mm.values, 0, bounds.train_end);

  auto tm = miner::template_miner::from_jsonl(
      slurp(out / "templates.jsonl", "templates.jsonl (run parse-logs first)"), cfg.miner_cfg);
  const int n_templates = static_cast<int>(tm.templates().size());

  std::vector<std::vector<int>> ids_by_block(idx.count);
  {
    std::istringstream in(slurp(out / "line_ids.csv", "line_ids.csv (run parse-logs first)"));
    std::string line;
    if (!std::getline(in, line) || line != "line,block,template")
      throw data_error("line_ids.csv has an unexpected header");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_csv_line(line);
      if (fields.size() != 3) throw data_error("line_ids.csv: malformed row '" + line + "'");
      const auto block = static_cast<std::size_t>(parse_ll(fields[1], "line_ids.csv"));
      const int id = static_cast<int>(parse_ll(fields[2], "line_ids.csv"));
      if (block >= idx.count) throw data_error("line_ids.csv: block out of range");
      ids_by_block[block].push_back(id);
    }
  }

  prep::multimodal_series s;
  s.metrics = prep::apply_norm(mm.values, norm);
  s.log_occurrence = prep::build_log_occurrence(ids_by_block, n_templates);
  s.blocks = idx;
  s.norm = norm;
  if (!cfg.labels_file.empty()) {
    auto lab = ingest::read_labels((fs::path(cfg.data_dir) / cfg.labels_file).string());
    s.labels.assign(idx.count, 0);
    for (const auto& [block, value] : lab.entries) {
      if (block >= idx.count) throw data_error("labels: block out of range");
      s.labels[block] = value;
    }
  }
  prep::save_series((out / "series").string(), s);
  say(opt, "[preprocess] " + std::to_string(s.T()) + " blocks, " +
               std::to_string(s.n_metrics()) + " metrics, " + std::to_string(s.n_log()) +
               " log channels" + (s.labels.empty() ? " (unlabeled)" : "") +
               (mm.filled_cells ? ", " + std::to_string(mm.filled_cells) + " gap blocks filled"
                                : ""));
  note_stage(cfg, "preprocess", timer.seconds(), {cfg.metrics_file, "templates.jsonl"},
             {"series/"});
}

void stage_train(const run_config& cfg, const stage_options& opt) {
  stage_timer timer;
  const fs::path out(cfg.out_dir);
  const fs::path ck_path = out / "checkpoint.json";

  train::checkpoint resume_ck;
  bool resuming = false;
  if (opt.resume && fs::exists(ck_path)) {
    resume_ck = train::load_checkpoint(ck_path.string());
    if (resume_ck.config_hash != train_identity_hash(cfg))
      throw config_error("cannot resume: the checkpoint was trained under a different config");
    resuming = true;
  } else {
    require_absent(ck_path, opt.force);
  }

  auto s = prep::load_series((out / "series").string());
  const prep::window_spec train_spec{cfg.window, cfg.train_stride};
  const prep::window_spec eval_spec{cfg.window, cfg.stride};
  auto train_sets = prep::split_windows(s, train_spec);
  auto eval_sets = prep::split_windows(s, eval_spec);
  const auto mcfg = resolve_model(cfg, s);

  say(opt, "[train] " + std::to_string(train_sets.train.size()) + " training windows, " +
               std::to_string(eval_sets.val.size()) + " validation windows, " +
               std::to_string(mcfg.param_count()) + " parameters" +
               (resuming ? " (resuming from epoch " + std::to_string(resume_ck.epoch) + ")"
                         : ""));
  auto res = train::fit(s, train_sets.train, eval_sets.val, mcfg, cfg.train_cfg,
                        train_identity_hash(cfg), resuming ? &resume_ck : nullptr, opt.log);
  if (!res.warning.empty()) say(opt, "[train] warning: " + res.warning);

  train::save_checkpoint(ck_path.string(), res.ck);
  std::string curve;
  if (resuming && fs::exists(out / "loss_curve.csv"))
    curve = slurp(out / "loss_curve.csv", "loss curve");
  else
    curve = "epoch,train_loss,val_loss,improved\n";
  for (const auto& e : res.curve) {
    curve += std::to_string(e.epoch);
    curve += ',';
    curve += fmt_double(e.train_loss);
    curve += ',';
    curve += fmt_double(e.val_loss);
    curve += ',';
    curve += e.improved ? '1' : '0';
    curve += '\n';
  }
  spit(out / "loss_curve.csv", curve);
  say(opt, "[train] best loss " + fmt_double(res.ck.best_loss) + " after " +
               std::to_string(res.ck.epoch) + " epochs");
  note_stage(cfg, "train", timer.seconds(), {"series/"},
             {"checkpoint.json", "loss_curve.csv"});
}

namespace {

struct detect_inputs {
  prep::multimodal_series series;
  model::model_config mcfg;
  std::vector<double> params;
  prep::window_sets sets;
};

detect_inputs load_detect_inputs(const run_config& cfg, const stage_options& opt) {
  const fs::path out(cfg.out_dir);
  detect_inputs di;
  di.series = prep::load_series((out / "series").string());
  di.mcfg = resolve_model(cfg, di.series);
  auto ck = train::load_checkpoint((out / "checkpoint.json").string());
  if (ck.config_hash != train_identity_hash(cfg))
    say(opt, "warning: checkpoint was produced under a different config (hash " +
                 ck.config_hash + ")");
  di.params = ck.best_params.empty() ? ck.params : ck.best_params;
  if (di.params.size() != di.mcfg.param_count())
    throw data_error("checkpoint holds " + std::to_string(di.params.size()) +
                     " parameters but the model needs " +
                     std::to_string(di.mcfg.param_count()));
  di.sets = prep::split_windows(di.series, prep::window_spec{cfg.window, cfg.stride});
  return di;
}

}  // namespace

void stage_detect(const run_config& cfg, const stage_options& opt) {
  stage_timer timer;
  const fs::path out(cfg.out_dir);
  require_absent(out / "scores.csv", opt.force);
  require_absent(out / "threshold.json", opt.force);

  auto di = load_detect_inputs(cfg, opt);
  if (di.series.labels.empty() && cfg.threshold_policy == "best-f1")
    throw config_error(
        "threshold policy best-f1 needs labeled data; use percentile:<x> instead");

  auto val_scores = detect::score_windows(di.series, di.sets.val, di.mcfg, di.params);
  std::vector<double> vs(val_scores.size());
  std::vector<int> vl(val_scores.size());
  for (std::size_t i = 0; i < val_scores.size(); ++i) {
    vs[i] = val_scores[i].score;
    vl[i] = di.sets.val[i].label;
  }
  auto choice = detect::select_threshold(vs, vl, cfg.threshold_policy);
  if (!choice.warning.empty()) say(opt, "[detect] warning: " + choice.warning);

  auto test_scores = detect::score_windows(di.series, di.sets.test, di.mcfg, di.params);
  std::string csv = "window_index,start_block,score,prediction\n";
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < test_scores.size(); ++i) {
    const int pred = test_scores[i].score > choice.threshold ? 1 : 0;
    flagged += static_cast<std::size_t>(pred);
    csv += std::to_string(i);
    csv += ',';
    csv += std::to_string(test_scores[i].start_block);
    csv += ',';
    csv += fmt_double(test_scores[i].score);
    csv += ',';
    csv += pred ? '1' : '0';
    csv += '\n';
  }
  spit(out / "scores.csv", csv);

  json th;
  th["format_version"] = 1;
  th["config_hash"] = config_hash(cfg);
  th["policy"] = choice.policy;
  th["threshold"] = choice.threshold;
  th["warning"] = choice.warning;
  th["n_val_windows"] = di.sets.val.size();
  spit(out / "threshold.json", th.dump(2) + "\n");

  say(opt, "[detect] threshold " + fmt_double(choice.threshold) + " (" + choice.policy +
               "), " + std::to_string(flagged) + " of " + std::to_string(test_scores.size()) +
               " test windows flagged");
  note_stage(cfg, "detect", timer.seconds(), {"series/", "checkpoint.json"},
             {"scores.csv", "threshold.json"});
}

void stage_evaluate(const run_config& cfg, const stage_options& opt) {
  stage_timer timer;
  const fs::path out(cfg.out_dir);
  require_absent(out / "report.json", opt.force);

  auto s = prep::load_series((out / "series").string());
  if (s.labels.empty()) throw data_error("evaluation needs labeled data");
  auto sets = prep::split_windows(s, prep::window_spec{cfg.window, cfg.stride});

  json th;
  try {
    th = json::parse(slurp(out / "threshold.json", "threshold.json (run detect first)"));
  } catch (const json::exception& e) {
    throw data_error(std::string("threshold.json is not valid JSON: ") + e.what());
  }

  std::vector<int> preds;
  {
    std::istringstream in(slurp(out / "scores.csv", "scores.csv (run detect first)"));
    std::string line;
    if (!std::getline(in, line) || line != "window_index,start_block,score,prediction")
      throw data_error("scores.csv has an unexpected header");
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_csv_line(line);
      if (fields.size() != 4) throw data_error("scores.csv: malformed row '" + line + "'");
      if (row >= sets.test.size() ||
          static_cast<std::size_t>(parse_ll(fields[1], "scores.csv")) != sets.test[row].start)
        throw data_error("scores.csv does not match the current series; re-run detect");
      const auto pred = parse_ll(fields[3], "scores.csv");
      if (pred != 0 && pred != 1) throw data_error("scores.csv: prediction must be 0 or 1");
      preds.push_back(static_cast<int>(pred));
      ++row;
    }
    if (row != sets.test.size())
      throw data_error("scores.csv does not match the current series; re-run detect");
  }

  std::vector<int> labels(sets.test.size());
  for (std::size_t i = 0; i < sets.test.size(); ++i) labels[i] = sets.test[i].label;
  auto rep = detect::evaluate(preds, labels);
  rep.threshold = th.at("threshold").get<double>();
  rep.policy = th.at("policy").get<std::string>();

  std::size_t positives = 0;
  for (int v : labels) positives += static_cast<std::size_t>(v);
  json r;
  r["format_version"] = 1;
  r["config_hash"] = config_hash(cfg);
  r["policy"] = rep.policy;
  r["threshold"] = rep.threshold;
  r["threshold_warning"] = th.value("warning", "");
  r["tp"] = rep.tp;
  r["fp"] = rep.fp;
  r["fn"] = rep.fn;
  r["tn"] = rep.tn;
  r["precision"] = rep.precision;
  r["recall"] = rep.recall;
  r["f1"] = rep.f1;
  r["n_windows"] = labels.size();
  r["n_anomalous_windows"] = positives;
  spit(out / "report.json", r.dump(2) + "\n");

  say(opt, "[evaluate] precision " + fmt_double(rep.precision) + ", recall " +
               fmt_double(rep.recall) + ", f1 " + fmt_double(rep.f1));
  note_stage(cfg, "evaluate", timer.seconds(), {"scores.csv", "threshold.json", "series/"},
             {"report.json"});
}

void stage_report(const run_config& cfg, const stage_options& opt) {
  stage_timer timer;
  const fs::path out(cfg.out_dir);
  require_absent(out / "mask_rates.csv", opt.force);
  require_absent(out / "report_scores.csv", opt.force);

  auto di = load_detect_inputs(cfg, opt);
  if (di.sets.test.empty()) throw data_error("no test windows to report on");

  std::vector<std::size_t> fire(di.mcfg.fused_nodes(), 0);
  std::string scores_csv = "window_index,start_block,score\n";
  for (std::size_t i = 0; i < di.sets.test.size(); ++i) {
    const auto& ref = di.sets.test[i];
    auto wm = prep::slice_rows(di.series.metrics, ref.start, ref.end);
    auto wl = prep::slice_rows(di.series.log_occurrence, ref.start, ref.end);
    numerics::tape tp;
    auto bp = model::bind_params(tp, di.mcfg, di.params);
    auto res = model::forward(tp, bp, di.mcfg, wm, wl, false, 0);
    for (std::size_t k = 0; k < fire.size(); ++k)
      fire[k] += static_cast<std::size_t>(res.stats.mask[k]);
    scores_csv += std::to_string(i);
    scores_csv += ',';
    scores_csv += std::to_string(ref.start);
    scores_csv += ',';
    scores_csv += fmt_double(res.loss_value);
    scores_csv += '\n';
  }
  std::string rates_csv = "component,fire_rate\n";
  const double denom = static_cast<double>(di.sets.test.size());
  for (std::size_t k = 0; k < fire.size(); ++k) {
    rates_csv += std::to_string(k);
    rates_csv += ',';
    rates_csv += fmt_double(static_cast<double>(fire[k]) / denom);
    rates_csv += '\n';
  }
  spit(out / "mask_rates.csv", rates_csv);
  spit(out / "report_scores.csv", scores_csv);
  say(opt, "[report] mask firing rates over " + std::to_string(di.sets.test.size()) +
               " test windows across " + std::to_string(fire.size()) + " components");
  note_stage(cfg, "report", timer.seconds(), {"series/", "checkpoint.json"},
             {"mask_rates.csv", "report_scores.csv"});
}

void run_all(const run_config& cfg, const stage_options& opt) {
  if (cfg.synth_enabled) stage_synth(cfg, opt);
  stage_parse_logs(cfg, opt);
  stage_preprocess(cfg, opt);
  stage_train(cfg, opt);
  stage_detect(cfg, opt);
  stage_evaluate(cfg, opt);
  stage_report(cfg, opt);
}

}  // namespace ffad::pipeline
