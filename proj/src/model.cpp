#include "ffad/model.hpp"

#include <cmath>
#include <string>

#include "ffad/common.hpp"

namespace ffad::model {

using numerics::node_id;
using numerics::tape;

void model_config::validate() const {
  if (w < 1) throw config_error("window length must be >= 1");
  if (n_metrics < 1) throw config_error("metric channel count must be >= 1");
  if (n_log < 1) throw config_error("log channel count must be >= 1");
  if (d_embed < 1) throw config_error("embedding dimension must be >= 1");
  if (q_layers < 1) throw config_error("layer count must be >= 1");
  if (kernel < 1 || kernel % 2 == 0)
    throw config_error("conv kernel size must be odd and >= 1");
  if (alpha_m < 0 || alpha_l < 0)
    throw config_error("noise coefficients must be >= 0");
  if (alpha_m > 0 && alpha_l > 0)
    throw config_error("at most one of the noise coefficients may be positive");
  if (sigma2 < 0) throw config_error("gaussian noise variance must be >= 0");
  if (lambda <= 0) throw config_error("poisson noise rate must be > 0");
  if (percentile < 0 || percentile > 100)
    throw config_error("percentile must lie in [0, 100]");
  if (noise_auto_alpha < 0)
    throw config_error("auto noise coefficient must be >= 0");
}

std::pair<double, double> model_config::resolved_alphas() const {
  if (!noise_auto) return {alpha_m, alpha_l};
  const size_t templates = n_log > 0 ? n_log - 1 : 0;
  if (n_metrics >= 2 * templates) return {noise_auto_alpha, 0.0};
  if (templates >= 2 * n_metrics) return {0.0, noise_auto_alpha};
  return {0.0, 0.0};
}

param_layout make_layout(const model_config& cfg) {
  const size_t n = cfg.n_metrics, nl = cfg.n_log, d = cfg.d_embed, k = cfg.kernel;
  const size_t s = cfg.proj_width();
  param_layout L;
  size_t off = 0;
  L.km = off; off += n * n * k;
  L.bm = off; off += n;
  L.kl = off; off += nl * nl * k;
  L.bl = off; off += nl;
  L.e = off; off += d;
  L.be = off; off += 1;
  for (size_t p = 0; p < cfg.q_layers; ++p) {
    L.S.push_back(off); off += 2 * d * d;
    L.b.push_back(off); off += 2 * d;
  }
  L.theta = off; off += 1;
  L.wout = off; off += s * (n + nl);
  L.bout = off; off += n + nl;
  L.total = off;
  return L;
}

size_t model_config::param_count() const { return make_layout(*this).total; }

std::vector<double> init_params(const model_config& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto L = make_layout(cfg);
  std::vector<double> flat(L.total, 0.0);
  auto rng = make_rng(seed, seed_stream::init);

  auto fill_uniform = [&](size_t off, size_t count, double bound) {
    std::uniform_real_distribution<double> d(-bound, bound);
    for (size_t i = 0; i < count; ++i) flat[off + i] = d(rng);
  };

  const size_t n = cfg.n_metrics, nl = cfg.n_log, d = cfg.d_embed, k = cfg.kernel;
  fill_uniform(L.km, n * n * k, std::sqrt(1.0 / double(n * k)));
  fill_uniform(L.kl, nl * nl * k, std::sqrt(1.0 / double(nl * k)));
  fill_uniform(L.e, d, std::sqrt(1.0 / double(d)));
  const double cb = std::sqrt(1.0 / double(d));
  for (size_t p = 0; p < cfg.q_layers; ++p) fill_uniform(L.S[p], 2 * d * d, cb);
  fill_uniform(L.wout, cfg.proj_width() * (n + nl),
               std::sqrt(1.0 / double(cfg.proj_width())));
  // biases and theta stay zero
  return flat;
}

frequency_stats fff_stats(const complex_tensor& spectrum, double percentile,
                          double alpha_anomaly) {
  if (spectrum.rank() != 2 || spectrum.dim(0) == 0)
    throw numeric_error("fff_stats expects a non-empty N x d spectrum");
  const size_t N = spectrum.dim(0), d = spectrum.dim(1);

  frequency_stats st;
  st.energy.resize(N);
  st.variance.resize(N);
  std::vector<double> mags(d);
  for (size_t k = 0; k < N; ++k) {
    double e = 0.0;
    for (size_t j = 0; j < d; ++j) {
      const auto& c = spectrum.at(k, j);
      const double m2 = c.real() * c.real() + c.imag() * c.imag();
      e += m2;
      mags[j] = std::sqrt(m2);
    }
    st.energy[k] = e;
    st.variance[k] = population_variance(mags);
  }
  st.energy_th = percentile_linear(st.energy, percentile);
  st.variance_th = percentile_linear(st.variance, percentile);
  st.mask.resize(N);
  st.alpha.resize(N);
  for (size_t k = 0; k < N; ++k) {
    st.mask[k] = st.energy[k] > st.energy_th && st.variance[k] > st.variance_th;
    st.alpha[k] = st.mask[k] ? alpha_anomaly : 1.0;
  }
  return st;
}

real_tensor gaussian_noise(size_t rows, size_t cols, double alpha, double sigma2,
                           std::mt19937_64& rng) {
  real_tensor out = real_tensor::zeros({rows, cols});
  if (alpha <= 0.0 || sigma2 <= 0.0) return out;
  std::normal_distribution<double> d(0.0, std::sqrt(sigma2));
  for (auto& v : out.data) v = alpha * d(rng);
  return out;
}

real_tensor poisson_noise(size_t rows, size_t cols, double alpha, double lambda,
                          std::mt19937_64& rng) {
  real_tensor out = real_tensor::zeros({rows, cols});
  if (alpha <= 0.0) return out;
  std::poisson_distribution<long> d(lambda);
  for (auto& v : out.data) v = alpha * static_cast<double>(d(rng));
  return out;
}

namespace {

real_tensor slice(const std::vector<double>& flat, size_t off,
                  std::vector<size_t> shape) {
  const size_t count = detail::shape_numel(shape);
  return real_tensor(std::move(shape),
                     std::vector<double>(flat.begin() + off, flat.begin() + off + count));
}

complex_tensor cslice(const std::vector<double>& flat, size_t off,
                      std::vector<size_t> shape) {
  const size_t count = detail::shape_numel(shape);
  complex_tensor t(std::move(shape));
  for (size_t i = 0; i < count; ++i)
    t.data[i] = {flat[off + 2 * i], flat[off + 2 * i + 1]};
  return t;
}

}  // namespace

bound_params bind_params(tape& tp, const model_config& cfg,
                         const std::vector<double>& flat) {
  const auto L = make_layout(cfg);
  if (flat.size() != L.total)
    throw config_error("parameter vector has " + std::to_string(flat.size()) +
                       " entries, layout wants " + std::to_string(L.total));
  const size_t n = cfg.n_metrics, nl = cfg.n_log, d = cfg.d_embed, k = cfg.kernel;

  bound_params bp;
  bp.km = tp.real_param(slice(flat, L.km, {n, n, k}));
  bp.bm = tp.real_param(slice(flat, L.bm, {n}));
  bp.kl = tp.real_param(slice(flat, L.kl, {nl, nl, k}));
  bp.bl = tp.real_param(slice(flat, L.bl, {nl}));
  bp.e = tp.real_param(slice(flat, L.e, {d}));
  bp.be = tp.real_param(slice(flat, L.be, {1}));
  for (size_t p = 0; p < cfg.q_layers; ++p) {
    bp.S.push_back(tp.complex_param(cslice(flat, L.S[p], {d, d})));
    bp.b.push_back(tp.complex_param(cslice(flat, L.b[p], {d})));
  }
  bp.theta = tp.real_param(slice(flat, L.theta, {1}));
  bp.wout = tp.real_param(slice(flat, L.wout, {cfg.proj_width(), n + nl}));
  bp.bout = tp.real_param(slice(flat, L.bout, {n + nl}));
  return bp;
}

std::vector<double> gather_grads(const tape& tp, const model_config& cfg,
                                 const bound_params& bp) {
  const auto L = make_layout(cfg);
  std::vector<double> grad(L.total, 0.0);

  auto put_real = [&](node_id id, size_t off) {
    const auto& g = tp.rgrad(id);
    for (size_t i = 0; i < g.numel(); ++i) grad[off + i] = g.data[i];
  };
  auto put_complex = [&](node_id id, size_t off) {
    const auto& g = tp.cgrad(id);
    for (size_t i = 0; i < g.numel(); ++i) {
      grad[off + 2 * i] = g.data[i].real();
      grad[off + 2 * i + 1] = g.data[i].imag();
    }
  };

  put_real(bp.km, L.km);
  put_real(bp.bm, L.bm);
  put_real(bp.kl, L.kl);
  put_real(bp.bl, L.bl);
  put_real(bp.e, L.e);
  put_real(bp.be, L.be);
  for (size_t p = 0; p < cfg.q_layers; ++p) {
    put_complex(bp.S[p], L.S[p]);
    put_complex(bp.b[p], L.b[p]);
  }
  put_real(bp.theta, L.theta);
  put_real(bp.wout, L.wout);
  put_real(bp.bout, L.bout);
  return grad;
}

forward_result forward(tape& tp, const bound_params& bp, const model_config& cfg,
                       const real_tensor& window_metrics,
                       const real_tensor& window_logs, bool training,
                       std::uint64_t noise_seed) {
  const size_t w = cfg.w, n = cfg.n_metrics, nl = cfg.n_log;
  if (window_metrics.rank() != 2 || window_metrics.dim(0) != w ||
      window_metrics.dim(1) != n)
    throw data_error("window metrics shape does not match config");
  if (window_logs.rank() != 2 || window_logs.dim(0) != w || window_logs.dim(1) != nl)
    throw data_error("window logs shape does not match config");

  const node_id xm = tp.real_input(window_metrics);
  const node_id xl = tp.real_input(window_logs);

  // temporal feature retention
  node_id fm = tp.relu(tp.conv1d_same(xm, bp.km, bp.bm));
  node_id fl = tp.relu(tp.conv1d_same(xl, bp.kl, bp.bl));

  // training-time noise, one modality at most
  const auto [am, al] = cfg.resolved_alphas();
  const bool inject = training || !cfg.noise_train_only;
  if (inject && am > 0.0) {
    std::mt19937_64 rng(noise_seed);
    fm = tp.add_const(fm, gaussian_noise(w, n, am, cfg.sigma2, rng));
  } else if (inject && al > 0.0) {
    std::mt19937_64 rng(noise_seed);
    fl = tp.add_const(fl, poisson_noise(w, nl, al, cfg.lambda, rng));
  }

  // fuse, embed, move to frequency space
  const node_id fused = tp.flatten_concat(fm, fl);
  const node_id emb = tp.embed(fused, bp.e, bp.be);
  const node_id spec = tp.dft(emb);

  const double theta_v = tp.rval(bp.theta).data[0];
  const double alpha_anomaly = numerics::sigmoid(theta_v);

  forward_result res;
  res.stats = fff_stats(tp.cval(spec), cfg.percentile, alpha_anomaly);

  node_id gate = -1;
  if (cfg.fff_enabled && !cfg.stats_per_layer)
    gate = tp.alpha_gate(bp.theta, res.stats.mask);

  node_id h = spec;
  node_id out = -1;
  for (size_t p = 0; p < cfg.q_layers; ++p) {
    if (cfg.fff_enabled && cfg.stats_per_layer) {
      const auto st = fff_stats(tp.cval(h), cfg.percentile, alpha_anomaly);
      gate = tp.alpha_gate(bp.theta, st.mask);
    }
    node_id hn = tp.cbias(tp.cmatmul(h, bp.S[p]), bp.b[p]);
    if (cfg.fff_enabled) hn = tp.row_scale(hn, gate);
    hn = tp.crelu(hn);
    out = (cfg.accumulate_layers && out >= 0) ? tp.cadd(out, hn) : hn;
    h = hn;
  }

  const node_id z = tp.real_idft(out, &res.imag_residue);
  const node_id regrouped = tp.regroup_time_major(z, w, n, nl);
  const node_id recon = tp.affine(regrouped, bp.wout, bp.bout);

  // loss target: the un-noised normalized window
  real_tensor target({w, n + nl});
  for (size_t t = 0; t < w; ++t) {
    for (size_t j = 0; j < n; ++j) target.at(t, j) = window_metrics.at(t, j);
    for (size_t j = 0; j < nl; ++j) target.at(t, n + j) = window_logs.at(t, j);
  }
  res.loss = tp.mse(recon, target);
  res.loss_value = tp.rval(res.loss).data[0];
  res.reconstruction = tp.rval(recon);
  return res;
}

}  // namespace ffad::model
