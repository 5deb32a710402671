#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "ffad/model.hpp"
#include "ffad/preprocess.hpp"

// Adam training loop over window reconstruction loss. Everything is keyed
// off counter-based seed streams (shuffle by epoch, noise by epoch and
// window id), so a run is a pure function of (seed, data, config) and a
// checkpoint resume replays the identical trajectory.

namespace ffad::train {

struct train_config {
  double lr = 5e-4;
  size_t batch = 256;  // clipped to the training set size
  size_t max_epochs = 100;
  size_t patience = 10;  // stop once epochs-since-best exceeds this
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global gradient norm ceiling

  void validate() const;
};

struct adam_state {
  std::vector<double> m, v;
  std::uint64_t t = 0;
};

// Standard bias-corrected update, in place. Sizes must agree.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               adam_state& st, const train_config& cfg);

// Scales grads down to max_norm when the global l2 norm exceeds it;
// returns the pre-clip norm.
double clip_global_norm(std::vector<double>& grads, double max_norm);

struct checkpoint {
  int format_version = 1;
  std::string config_hash;
  size_t epoch = 0;  // completed epochs
  adam_state opt;
  std::vector<double> params;       // current
  std::vector<double> best_params;  // best by the stopping metric
  double best_loss = std::numeric_limits<double>::infinity();
  size_t epochs_since_best = 0;
};

// Single JSON file with a checksum over the parameter and moment arrays;
// loading verifies it and round-trips every double bit-exactly.
void save_checkpoint(const std::string& path, const checkpoint& ck);
checkpoint load_checkpoint(const std::string& path);

struct epoch_log {
  size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when there is no validation set
  bool improved = false;
};

struct fit_result {
  checkpoint ck;
  std::vector<epoch_log> curve;
  bool used_val = true;  // false: stopping fell back to train loss
  std::string warning;
};

// Optimizes from init_params(mcfg, seed) or, when resume is given, from its
// stored state (absolute epoch numbering keeps the seed streams aligned).
// Validation loss is noise-free. A non-finite loss aborts with the batch
// index in the message. log, when given, receives one line per epoch.
fit_result fit(const prep::multimodal_series& series,
               const std::vector<prep::window_ref>& train_windows,
               const std::vector<prep::window_ref>& val_windows,
               const model::model_config& mcfg, const train_config& tcfg,
               const std::string& config_hash, const checkpoint* resume = nullptr,
               std::ostream* log = nullptr);

// Mean noise-free loss over windows; -1 index convention not used, windows
// may be any split. Used for validation and by the detector.
double mean_loss(const prep::multimodal_series& series,
                 const std::vector<prep::window_ref>& windows,
                 const model::model_config& mcfg, const std::vector<double>& params);

}  // namespace ffad::train
