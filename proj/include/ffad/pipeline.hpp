#pragma once

#include <cstdint>
#include <ostream>
#include <string>

#include "ffad/model.hpp"
#include "ffad/template_miner.hpp"
#include "ffad/train.hpp"

// Stage orchestration behind the CLI. A single JSON run config drives every
// stage; unknown keys are rejected, defaults are materialized, and the hash
// of the canonical config (paths excluded) is stamped into every artifact so
// outputs can be traced back to the settings that produced them.
//
// Stage outputs (under out_dir unless noted):
//   synth       -> metrics.csv, logs.txt, labels.csv, manifest.json (data_dir)
//   parse-logs  -> templates.jsonl, line_ids.csv
//   preprocess  -> series/ (portable normalized artifact)
//   train       -> checkpoint.json, loss_curve.csv
//   detect      -> scores.csv, threshold.json
//   evaluate    -> report.json
//   report      -> mask_rates.csv, report_scores.csv
// Every stage also appends itself to run_manifest.json (durations live only
// there, keeping the data artifacts byte-reproducible).

namespace ffad::pipeline {

inline constexpr const char* tool_version = "0.1.0";

struct run_config {
  std::string data_dir = "data";
  std::string out_dir = "out";

  // synth section (absent -> stage_synth refuses to run)
  bool synth_enabled = false;
  std::string synth_profile = "benchmark";  // or "tiny"
  std::uint64_t synth_seed = 0;

  // ingest section
  std::string metrics_file = "metrics.csv";
  std::string logs_file = "logs.txt";
  std::string labels_file = "labels.csv";  // "" means unlabeled data
  std::string timestamp_format = "epoch";
  std::int64_t dt = 10;  // block width, seconds

  // window section
  std::size_t window = 50;
  std::size_t stride = 1;        // scoring/evaluation windows
  std::size_t train_stride = 1;  // training windows only

  miner::miner_config miner_cfg;
  model::model_config model_cfg;  // w / n_metrics / n_log are filled from data
  train::train_config train_cfg;
  std::string threshold_policy = "best-f1";
};

// Strict parse: unknown keys, wrong types, and out-of-range values are
// config_error. Missing file -> config_error naming the path.
run_config load_run_config(const std::string& path);
run_config parse_run_config(const std::string& json_text);

// Canonical JSON form of the semantic config (sorted keys, defaults
// materialized, data_dir/out_dir excluded so relocating a run keeps its
// identity) and its FNV-1a hash.
std::string canonical_config(const run_config& cfg);
std::string config_hash(const run_config& cfg);

// Checkpoint compatibility hash: config_hash minus train.max_epochs and
// train.patience. Stopping knobs may grow between resumed runs; everything
// that shapes the optimization trajectory must match.
std::string train_identity_hash(const run_config& cfg);

struct stage_options {
  bool force = false;           // overwrite existing stage outputs
  bool resume = false;          // train only: continue from the checkpoint
  std::ostream* log = nullptr;  // progress lines, one per event
};

void stage_synth(const run_config& cfg, const stage_options& opt = {});
void stage_parse_logs(const run_config& cfg, const stage_options& opt = {});
void stage_preprocess(const run_config& cfg, const stage_options& opt = {});
void stage_train(const run_config& cfg, const stage_options& opt = {});
void stage_detect(const run_config& cfg, const stage_options& opt = {});
void stage_evaluate(const run_config& cfg, const stage_options& opt = {});
void stage_report(const run_config& cfg, const stage_options& opt = {});

// synth (when configured) then parse-logs through report, equivalent to
// running the stages individually with the same config.
void run_all(const run_config& cfg, const stage_options& opt = {});

}  // namespace ffad::pipeline
