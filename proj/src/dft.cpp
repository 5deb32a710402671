#include "ffad/dft.hpp"

#include <cmath>

#include "ffad/common.hpp"

namespace ffad::numerics {

namespace {
constexpr double k_two_pi = 6.283185307179586476925286766559;
}

dft_plan::dft_plan(size_t n) : n_(n) {
  if (n == 0) throw numeric_error("dft_plan: n must be positive");
  size_t m = n;
  for (size_t p = 2; p * p <= m;) {
    if (m % p == 0) {
      factors_.push_back(p);
      m /= p;
    } else {
      ++p;
    }
  }
  if (m > 1) factors_.push_back(m);
  twiddles_.resize(n);
  for (size_t j = 0; j < n; ++j) {
    const double ang = -k_two_pi * static_cast<double>(j) / static_cast<double>(n);
    twiddles_[j] = cd(std::cos(ang), std::sin(ang));
  }
}

void dft_plan::recurse(const cd* in, size_t stride, cd* out, size_t n,
                       size_t tw_step, const size_t* factor, cd* scratch,
                       bool inverse_exp) const {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const size_t p = *factor;
  auto tw = [&](size_t idx) {
    const cd w = twiddles_[(idx % n) * tw_step];
    return inverse_exp ? std::conj(w) : w;
  };
  if (p == n) {
    // prime length: direct sum
    for (size_t k = 0; k < n; ++k) {
      cd acc(0.0, 0.0);
      for (size_t t = 0; t < n; ++t) acc += in[t * stride] * tw(k * t);
      out[k] = acc;
    }
    return;
  }
  const size_t m = n / p;
  for (size_t r = 0; r < p; ++r)
    recurse(in + r * stride, stride * p, out + r * m, m, tw_step * p, factor + 1,
            scratch, inverse_exp);
  // out[r*m + a] now holds Y_r[a]; combine X[a + b*m] = sum_r W_n^{(a+bm)r} Y_r[a]
  for (size_t a = 0; a < m; ++a) {
    for (size_t b = 0; b < p; ++b) {
      const size_t k = a + b * m;
      cd acc(0.0, 0.0);
      for (size_t r = 0; r < p; ++r) acc += out[r * m + a] * tw((k * r) % n);
      scratch[k] = acc;
    }
  }
  for (size_t k = 0; k < n; ++k) out[k] = scratch[k];
}

void dft_plan::transform(const cd* in, cd* out, cd* scratch, bool inverse_exp) const {
  recurse(in, 1, out, n_, 1, factors_.data(), scratch, inverse_exp);
}

void dft_plan::forward(std::vector<cd>& a) const {
  if (a.size() != n_) throw numeric_error("dft_plan::forward: size mismatch");
  std::vector<cd> out(n_), scratch(n_);
  transform(a.data(), out.data(), scratch.data(), false);
  a = std::move(out);
}

void dft_plan::inverse_unnormalized(std::vector<cd>& a) const {
  if (a.size() != n_) throw numeric_error("dft_plan::inverse: size mismatch");
  std::vector<cd> out(n_), scratch(n_);
  transform(a.data(), out.data(), scratch.data(), true);
  a = std::move(out);
}

void dft_plan::inverse(std::vector<cd>& a) const {
  inverse_unnormalized(a);
  const double scale = 1.0 / static_cast<double>(n_);
  for (cd& v : a) v *= scale;
}

namespace {

void columns_apply(const dft_plan& plan, complex_tensor& m, bool inverse_exp,
                   double scale) {
  if (m.rank() != 2) throw numeric_error("column transform expects rank-2 tensor");
  const size_t n = m.dim(0), d = m.dim(1);
  if (plan.size() != n) throw numeric_error("column transform: plan size mismatch");
  std::vector<cd> col(n), out(n), scratch(n);
  for (size_t j = 0; j < d; ++j) {
    for (size_t i = 0; i < n; ++i) col[i] = m.at(i, j);
    plan.transform(col.data(), out.data(), scratch.data(), inverse_exp);
    if (scale != 1.0)
      for (size_t i = 0; i < n; ++i) m.at(i, j) = out[i] * scale;
    else
      for (size_t i = 0; i < n; ++i) m.at(i, j) = out[i];
  }
}

}  // namespace

void dft_columns(const dft_plan& plan, complex_tensor& m) {
  columns_apply(plan, m, false, 1.0);
}

void idft_columns(const dft_plan& plan, complex_tensor& m) {
  columns_apply(plan, m, true, 1.0 / static_cast<double>(plan.size()));
}

void idft_columns_unnormalized(const dft_plan& plan, complex_tensor& m) {
  columns_apply(plan, m, true, 1.0);
}

complex_tensor dft_nodes(const real_tensor& x) {
  if (x.rank() != 2) throw numeric_error("dft_nodes expects rank-2 tensor");
  complex_tensor c({x.dim(0), x.dim(1)});
  for (size_t i = 0; i < x.numel(); ++i) c.data[i] = cd(x.data[i], 0.0);
  dft_plan plan(x.dim(0));
  dft_columns(plan, c);
  return c;
}

complex_tensor dft_nodes(const complex_tensor& x) {
  complex_tensor c = x;
  dft_plan plan(x.dim(0));
  dft_columns(plan, c);
  return c;
}

complex_tensor idft_nodes(const complex_tensor& x) {
  complex_tensor c = x;
  dft_plan plan(x.dim(0));
  idft_columns(plan, c);
  return c;
}

}  // namespace ffad::numerics
