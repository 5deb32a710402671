#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "ffad/tape.hpp"
#include "ffad/tensor.hpp"

// The detector network. One window flows through:
//   per-modality conv + ReLU  (temporal feature retention)
//   additive noise, training only  (at most one modality, by config)
//   flatten to one node vector, scalar -> d-dim embedding
//   DFT along the node axis
//   q spectral layers: complex matmul + bias, per-frequency gating, ReLU
//   inverse DFT (real part), regroup to time-major, affine projection
//   MSE against the un-noised normalized window.
//
// The frequency gate picks components whose energy and magnitude variance
// both exceed the p-th percentile of the window's own spectrum; selected
// rows are scaled by sigmoid(theta), all others pass through unchanged.

namespace ffad::model {

struct model_config {
  size_t w = 50;
  size_t n_metrics = 0;
  size_t n_log = 0;    // occurrence width, unknown column included
  size_t d_embed = 128;
  size_t q_layers = 3;
  size_t kernel = 3;  // odd
  double alpha_m = 0.0;
  double alpha_l = 0.0;
  double sigma2 = 1.0;  // Gaussian noise variance
  double lambda = 1.0;  // Poisson noise rate
  double percentile = 95.0;
  bool accumulate_layers = true;
  bool noise_train_only = true;
  bool fff_enabled = true;
  bool stats_per_layer = false;  // recompute the gate from each layer's input
  bool noise_auto = false;       // place noise on the dominant modality
  double noise_auto_alpha = 1.0;

  void validate() const;  // config_error on violation

  size_t fused_nodes() const { return w * (n_metrics + n_log); }
  size_t proj_width() const { return (n_metrics + n_log) * d_embed; }
  size_t param_count() const;

  // (alpha_m, alpha_l) after the auto rule. Auto applies noise_auto_alpha to
  // the modality whose channel count is at least twice the other's, counting
  // the log side by its template count (occurrence width minus the unknown
  // column); no clear dominance means no noise.
  std::pair<double, double> resolved_alphas() const;
};

// Flat parameter vector; complex entries stored as adjacent (re, im).
// Order: metric kernel, metric bias, log kernel, log bias, embed vector,
// embed bias, then per layer S_p and b_p, then theta, then projection
// weight and bias.
struct param_layout {
  size_t km = 0, bm = 0, kl = 0, bl = 0, e = 0, be = 0;
  std::vector<size_t> S, b;
  size_t theta = 0, wout = 0, bout = 0;
  size_t total = 0;
};
param_layout make_layout(const model_config& cfg);

// Seeded init: kernels and weights uniform in +-sqrt(1/fan_in), complex
// parts each uniform in +-sqrt(1/d_embed), biases and theta zero.
std::vector<double> init_params(const model_config& cfg, std::uint64_t seed);

struct frequency_stats {
  std::vector<double> energy;    // E_k = sum_j |H(k,j)|^2
  std::vector<double> variance;  // V_k over |H(k,j)|, population
  double energy_th = 0.0;
  double variance_th = 0.0;
  std::vector<std::uint8_t> mask;  // E_k > E_th AND V_k > V_th
  std::vector<double> alpha;       // sigmoid(theta) where masked, else 1
};
frequency_stats fff_stats(const complex_tensor& spectrum, double percentile,
                          double alpha_anomaly);

// Per-element additive noise tensors. Zero alpha yields zeros without
// consuming rng state.
real_tensor gaussian_noise(size_t rows, size_t cols, double alpha, double sigma2,
                           std::mt19937_64& rng);
real_tensor poisson_noise(size_t rows, size_t cols, double alpha, double lambda,
                          std::mt19937_64& rng);

// Parameter groups registered as tape leaves.
struct bound_params {
  numerics::node_id km, bm, kl, bl, e, be;
  std::vector<numerics::node_id> S, b;
  numerics::node_id theta, wout, bout;
};
bound_params bind_params(numerics::tape& tp, const model_config& cfg,
                         const std::vector<double>& flat);

// Gradients of the bound leaves, packed back into layout order. Leaves the
// backward pass never reached contribute zeros.
std::vector<double> gather_grads(const numerics::tape& tp, const model_config& cfg,
                                 const bound_params& bp);

struct forward_result {
  numerics::node_id loss = -1;  // scalar node, ready for tape.backward
  double loss_value = 0.0;
  real_tensor reconstruction;  // w x (n + n_log)
  frequency_stats stats;       // gate stats of the initial spectrum
  double imag_residue = 0.0;   // max |Im| discarded by the inverse transform
};

// One window forward pass. Noise is drawn from noise_seed when active;
// the loss target is always the un-noised input.
forward_result forward(numerics::tape& tp, const bound_params& bp,
                       const model_config& cfg, const real_tensor& window_metrics,
                       const real_tensor& window_logs, bool training,
                       std::uint64_t noise_seed);

}  // namespace ffad::model
