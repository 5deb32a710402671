#include "ffad/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ffad/common.hpp"

namespace ffad::train {

using model::bind_params;
using model::forward;

void train_config::validate() const {
  if (lr <= 0) throw config_error("learning rate must be > 0");
  if (batch < 1) throw config_error("batch size must be >= 1");
  if (max_epochs < 1) throw config_error("max epochs must be >= 1");
  if (patience < 1) throw config_error("patience must be >= 1");
  if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1)
    throw config_error("Adam betas must lie in (0, 1)");
  if (eps <= 0) throw config_error("Adam epsilon must be > 0");
  if (clip_norm <= 0) throw config_error("gradient clip norm must be > 0");
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               adam_state& st, const train_config& cfg) {
  if (grads.size() != params.size())
    throw numeric_error("adam_step: gradient size mismatch");
  if (st.m.empty()) st.m.assign(params.size(), 0.0);
  if (st.v.empty()) st.v.assign(params.size(), 0.0);
  if (st.m.size() != params.size() || st.v.size() != params.size())
    throw numeric_error("adam_step: moment size mismatch");

  st.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grads[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

double clip_global_norm(std::vector<double>& grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

namespace {

std::uint64_t array_checksum(const checkpoint& ck) {
  std::vector<double> all;
  all.reserve(ck.params.size() + ck.opt.m.size() + ck.opt.v.size() +
              ck.best_params.size());
  all.insert(all.end(), ck.params.begin(), ck.params.end());
  all.insert(all.end(), ck.opt.m.begin(), ck.opt.m.end());
  all.insert(all.end(), ck.opt.v.begin(), ck.opt.v.end());
  all.insert(all.end(), ck.best_params.begin(), ck.best_params.end());
  return fnv1a64({reinterpret_cast<const unsigned char*>(all.data()),
                  all.size() * sizeof(double)});
}

}  // namespace

void save_checkpoint(const std::string& path, const checkpoint& ck) {
  nlohmann::json j{
      {"format_version", ck.format_version},
      {"config_hash", ck.config_hash},
      {"epoch", ck.epoch},
      {"step", ck.opt.t},
      {"best_loss", fmt_double(ck.best_loss)},  // string: may be inf
      {"epochs_since_best", ck.epochs_since_best},
      {"params", ck.params},
      {"m", ck.opt.m},
      {"v", ck.opt.v},
      {"best_params", ck.best_params},
      {"checksum", to_hex(array_checksum(ck))},
  };
  std::ofstream out(path);
  if (!out) throw data_error("cannot write checkpoint " + path);
  out << j.dump() << '\n';
}

checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("bad checkpoint JSON: " + std::string(e.what()));
  }
  checkpoint ck;
  try {
    ck.format_version = j.at("format_version").get<int>();
    if (ck.format_version != 1)
      throw data_error("unsupported checkpoint format version");
    ck.config_hash = j.at("config_hash").get<std::string>();
    ck.epoch = j.at("epoch").get<size_t>();
    ck.opt.t = j.at("step").get<std::uint64_t>();
    ck.best_loss = std::strtod(j.at("best_loss").get<std::string>().c_str(), nullptr);
    ck.epochs_since_best = j.at("epochs_since_best").get<size_t>();
    ck.params = j.at("params").get<std::vector<double>>();
    ck.opt.m = j.at("m").get<std::vector<double>>();
    ck.opt.v = j.at("v").get<std::vector<double>>();
    ck.best_params = j.at("best_params").get<std::vector<double>>();
    if (j.at("checksum").get<std::string>() != to_hex(array_checksum(ck)))
      throw data_error("checkpoint checksum mismatch: " + path);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("malformed checkpoint " + path + ": " + e.what());
  }
  return ck;
}

namespace {

struct window_pass {
  double loss = 0.0;
  std::vector<double> grad;
};

window_pass window_backward(const prep::multimodal_series& s,
                            const prep::window_ref& wr,
                            const model::model_config& mcfg,
                            const std::vector<double>& params,
                            std::uint64_t noise_seed) {
  numerics::tape tp;
  auto bp = bind_params(tp, mcfg, params);
  auto wm = prep::slice_rows(s.metrics, wr.start, wr.end);
  auto wl = prep::slice_rows(s.log_occurrence, wr.start, wr.end);
  auto res = forward(tp, bp, mcfg, wm, wl, true, noise_seed);
  tp.backward(res.loss);
  return {res.loss_value, model::gather_grads(tp, mcfg, bp)};
}

}  // namespace

double mean_loss(const prep::multimodal_series& s,
                 const std::vector<prep::window_ref>& windows,
                 const model::model_config& mcfg, const std::vector<double>& params) {
  if (windows.empty()) throw data_error("mean_loss over an empty window set");
  double sum = 0.0;
  for (const auto& wr : windows) {
    numerics::tape tp;
    auto bp = bind_params(tp, mcfg, params);
    auto wm = prep::slice_rows(s.metrics, wr.start, wr.end);
    auto wl = prep::slice_rows(s.log_occurrence, wr.start, wr.end);
    sum += forward(tp, bp, mcfg, wm, wl, false, 0).loss_value;
  }
  return sum / double(windows.size());
}

fit_result fit(const prep::multimodal_series& series,
               const std::vector<prep::window_ref>& train_windows,
               const std::vector<prep::window_ref>& val_windows,
               const model::model_config& mcfg, const train_config& tcfg,
               const std::string& config_hash, const checkpoint* resume,
               std::ostream* log) {
  mcfg.validate();
  tcfg.validate();
  if (train_windows.empty()) throw data_error("no training windows");

  const auto layout = model::make_layout(mcfg);
  fit_result res;
  checkpoint& ck = res.ck;
  if (resume) {
    ck = *resume;
    if (ck.params.size() != layout.total)
      throw config_error("resume checkpoint parameter count does not match config");
  } else {
    ck.config_hash = config_hash;
    ck.params = model::init_params(mcfg, tcfg.seed);
    ck.best_params = ck.params;
  }

  res.used_val = !val_windows.empty();
  if (!res.used_val) {
    res.warning = "validation set is empty; early stopping uses training loss";
    if (log) *log << "warning: " << res.warning << '\n';
  }

  const size_t n_train = train_windows.size();
  const size_t batch = std::min(tcfg.batch, n_train);

  std::vector<size_t> order(n_train);
  for (size_t e = ck.epoch; e < tcfg.max_epochs; ++e) {
    std::iota(order.begin(), order.end(), size_t{0});
    auto rng = make_rng(tcfg.seed, seed_stream::shuffle, e);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss_sum = 0.0;
    for (size_t b0 = 0, batch_idx = 0; b0 < n_train; b0 += batch, ++batch_idx) {
      const size_t b1 = std::min(b0 + batch, n_train);
      std::vector<double> grad(layout.total, 0.0);
      double batch_loss = 0.0;
      for (size_t i = b0; i < b1; ++i) {
        const size_t wi = order[i];
        auto pass = window_backward(series, train_windows[wi], mcfg, ck.params,
                                    mix_seed(tcfg.seed, seed_stream::noise, e, wi));
        batch_loss += pass.loss;
        for (size_t g = 0; g < grad.size(); ++g) grad[g] += pass.grad[g];
      }
      const double scale = 1.0 / double(b1 - b0);
      batch_loss *= scale;
      if (!std::isfinite(batch_loss))
        throw numeric_error("non-finite training loss at epoch " + std::to_string(e) +
                            ", batch " + std::to_string(batch_idx));
      for (double& g : grad) g *= scale;
      clip_global_norm(grad, tcfg.clip_norm);
      adam_step(ck.params, grad, ck.opt, tcfg);
      epoch_loss_sum += batch_loss * double(b1 - b0);
    }
    const double train_loss = epoch_loss_sum / double(n_train);

    double metric = train_loss;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    if (res.used_val) {
      val_loss = mean_loss(series, val_windows, mcfg, ck.params);
      if (!std::isfinite(val_loss))
        throw numeric_error("non-finite validation loss at epoch " + std::to_string(e));
      metric = val_loss;
    }

    const bool improved = metric < ck.best_loss;
    if (improved) {
      ck.best_loss = metric;
      ck.best_params = ck.params;
      ck.epochs_since_best = 0;
    } else {
      ck.epochs_since_best += 1;
    }
    ck.epoch = e + 1;
    res.curve.push_back({e, train_loss, val_loss, improved});
    if (log) {
      *log << "epoch " << e << " train " << fmt_double(train_loss);
      if (res.used_val) *log << " val " << fmt_double(val_loss);
      if (improved) *log << " *";
      // epochs are minutes apart at benchmark scale; keep the log current
      *log << std::endl;
    }
    if (ck.epochs_since_best > tcfg.patience) break;
  }
  return res;
}

}  // namespace ffad::train
