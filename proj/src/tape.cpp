#include "ffad/tape.hpp"

#include <cmath>

#include "ffad/common.hpp"

namespace ffad::numerics {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

node_id tape::push_real(real_tensor v, bool needs_grad, std::function<void(tape&)> fn) {
  tape_node n;
  n.rv = std::move(v);
  n.needs_grad = needs_grad;
  n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return static_cast<node_id>(nodes_.size() - 1);
}

node_id tape::push_complex(complex_tensor v, bool needs_grad, std::function<void(tape&)> fn) {
  tape_node n;
  n.cv = std::move(v);
  n.is_complex = true;
  n.needs_grad = needs_grad;
  n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return static_cast<node_id>(nodes_.size() - 1);
}

real_tensor& tape::ensure_rgrad(node_id id) {
  auto& n = nodes_[id];
  if (n.rg.data.empty()) n.rg = real_tensor::zeros(n.rv.shape);
  return n.rg;
}

complex_tensor& tape::ensure_cgrad(node_id id) {
  auto& n = nodes_[id];
  if (n.cg.data.empty()) n.cg = complex_tensor::zeros(n.cv.shape);
  return n.cg;
}

const dft_plan& tape::plan_for(size_t n) {
  for (const auto& p : plans_)
    if (p->size() == n) return *p;
  plans_.push_back(std::make_unique<dft_plan>(n));
  return *plans_.back();
}

node_id tape::real_input(real_tensor v) { return push_real(std::move(v), false, {}); }
node_id tape::real_param(real_tensor v) { return push_real(std::move(v), true, {}); }
node_id tape::complex_param(complex_tensor v) { return push_complex(std::move(v), true, {}); }

node_id tape::add(node_id a, node_id b) {
  const auto& av = rval(a);
  const auto& bv = rval(b);
  if (!av.same_shape(bv)) throw numeric_error("add: shape mismatch");
  real_tensor out = av;
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] += bv.data[i];
  const bool ng = needs_grad(a) || needs_grad(b);
  node_id id = push_real(std::move(out), ng, {});
  nodes_[id].backward = [a, b, id](tape& t) {
    const auto& g = t.rgrad(id);
    if (t.needs_grad(a)) {
      auto& ga = t.ensure_rgrad(a);
      for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.ensure_rgrad(b);
      for (size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i];
    }
  };
  return id;
}

node_id tape::add_const(node_id a, real_tensor c) {
  const auto& av = rval(a);
  if (!av.same_shape(c)) throw numeric_error("add_const: shape mismatch");
  real_tensor out = av;
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] += c.data[i];
  node_id id = push_real(std::move(out), needs_grad(a), {});
  nodes_[id].backward = [a, id](tape& t) {
    if (!t.needs_grad(a)) return;
    const auto& g = t.rgrad(id);
    auto& ga = t.ensure_rgrad(a);
    for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
  };
  return id;
}

node_id tape::relu(node_id a) {
  real_tensor out = rval(a);
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  node_id id = push_real(std::move(out), needs_grad(a), {});
  nodes_[id].backward = [a, id](tape& t) {
    if (!t.needs_grad(a)) return;
    const auto& g = t.rgrad(id);
    const auto& out = t.rval(id);
    auto& ga = t.ensure_rgrad(a);
    // subgradient at 0 is 0: pass only where output is strictly positive
    for (size_t i = 0; i < g.numel(); ++i)
      if (out.data[i] > 0.0) ga.data[i] += g.data[i];
  };
  return id;
}

node_id tape::conv1d_same(node_id x, node_id kernel, node_id bias) {
  const auto& xv = rval(x);
  const auto& kv = rval(kernel);
  const auto& bv = rval(bias);
  if (xv.rank() != 2 || kv.rank() != 3 || bv.rank() != 1)
    throw numeric_error("conv1d_same: bad ranks");
  const size_t w = xv.dim(0), c = xv.dim(1), k = kv.dim(2);
  if (kv.dim(0) != c || kv.dim(1) != c || bv.dim(0) != c)
    throw numeric_error("conv1d_same: channel mismatch");
  if (k % 2 == 0) throw numeric_error("conv1d_same: kernel width must be odd");
  const size_t pad = (k - 1) / 2;

  real_tensor out({w, c});
  for (size_t t = 0; t < w; ++t)
    for (size_t oc = 0; oc < c; ++oc) {
      double acc = bv.at(oc);
      for (size_t ic = 0; ic < c; ++ic)
        for (size_t tap = 0; tap < k; ++tap) {
          const long src = static_cast<long>(t) + static_cast<long>(tap) -
                           static_cast<long>(pad);
          if (src < 0 || src >= static_cast<long>(w)) continue;
          acc += xv.at(static_cast<size_t>(src), ic) * kv.at(oc, ic, tap);
        }
      out.at(t, oc) = acc;
    }

  const bool ng = needs_grad(x) || needs_grad(kernel) || needs_grad(bias);
  node_id id = push_real(std::move(out), ng, {});
  nodes_[id].backward = [x, kernel, bias, id, w, c, k, pad](tape& t) {
    const auto& g = t.rgrad(id);
    const auto& xv = t.rval(x);
    const auto& kv = t.rval(kernel);
    if (t.needs_grad(bias)) {
      auto& gb = t.ensure_rgrad(bias);
      for (size_t tt = 0; tt < w; ++tt)
        for (size_t oc = 0; oc < c; ++oc) gb.at(oc) += g.at(tt, oc);
    }
    if (t.needs_grad(kernel)) {
      auto& gk = t.ensure_rgrad(kernel);
      for (size_t tt = 0; tt < w; ++tt)
        for (size_t oc = 0; oc < c; ++oc) {
          const double gv = g.at(tt, oc);
          if (gv == 0.0) continue;
          for (size_t ic = 0; ic < c; ++ic)
            for (size_t tap = 0; tap < k; ++tap) {
              const long src = static_cast<long>(tt) + static_cast<long>(tap) -
                               static_cast<long>(pad);
              if (src < 0 || src >= static_cast<long>(w)) continue;
              gk.at(oc, ic, tap) += gv * xv.at(static_cast<size_t>(src), ic);
            }
        }
    }
    if (t.needs_grad(x)) {
      auto& gx = t.ensure_rgrad(x);
      for (size_t tt = 0; tt < w; ++tt)
        for (size_t oc = 0; oc < c; ++oc) {
          const double gv = g.at(tt, oc);
          if (gv == 0.0) continue;
          for (size_t ic = 0; ic < c; ++ic)
            for (size_t tap = 0; tap < k; ++tap) {
              const long src = static_cast<long>(tt) + static_cast<long>(tap) -
                               static_cast<long>(pad);
              if (src < 0 || src >= static_cast<long>(w)) continue;
              gx.at(static_cast<size_t>(src), ic) += gv * kv.at(oc, ic, tap);
            }
        }
    }
  };
  return id;
}

node_id tape::flatten_concat(node_id a, node_id b) {
  const auto& av = rval(a);
  const auto& bv = rval(b);
  real_tensor out({av.numel() + bv.numel()});
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.numel());
  const bool ng = needs_grad(a) || needs_grad(b);
  const size_t na = av.numel();
  node_id id = push_real(std::move(out), ng, {});
  nodes_[id].backward = [a, b, id, na](tape& t) {
    const auto& g = t.rgrad(id);
    if (t.needs_grad(a)) {
      auto& ga = t.ensure_rgrad(a);
      for (size_t i = 0; i < na; ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.ensure_rgrad(b);
      for (size_t i = 0; i < gb.numel(); ++i) gb.data[i] += g.data[na + i];
    }
  };
  return id;
}

node_id tape::embed(node_id x, node_id e, node_id bias) {
  const auto& xv = rval(x);
  const auto& ev = rval(e);
  const auto& bv = rval(bias);
  if (xv.rank() != 1 || ev.rank() != 1 || bv.numel() != 1)
    throw numeric_error("embed: expects vector, vector, scalar");
  const size_t n = xv.dim(0), d = ev.dim(0);
  real_tensor out({n, d});
  const double b0 = bv.data[0];
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) out.at(i, j) = xv.at(i) * ev.at(j) + b0;
  const bool ng = needs_grad(x) || needs_grad(e) || needs_grad(bias);
  node_id id = push_real(std::move(out), ng, {});
  nodes_[id].backward = [x, e, bias, id, n, d](tape& t) {
    const auto& g = t.rgrad(id);
    const auto& xv = t.rval(x);
    const auto& ev = t.rval(e);
    if (t.needs_grad(x)) {
      auto& gx = t.ensure_rgrad(x);
      for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < d; ++j) acc += g.at(i, j) * ev.at(j);
        gx.at(i) += acc;
      }
    }
    if (t.needs_grad(e)) {
      auto& ge = t.ensure_rgrad(e);
      for (size_t i = 0; i < n; ++i) {
        const double xi = xv.at(i);
        for (size_t j = 0; j < d; ++j) ge.at(j) += g.at(i, j) * xi;
      }
    }
    if (t.needs_grad(bias)) {
      auto& gb = t.ensure_rgrad(bias);
      double acc = 0.0;
      for (size_t i = 0; i < g.numel(); ++i) acc += g.data[i];
      gb.data[0] += acc;
    }
  };
  return id;
}

node_id tape::regroup_time_major(node_id z, size_t w, size_t n, size_t nl) {
  const auto& zv = rval(z);
  if (zv.rank() != 2) throw numeric_error("regroup: rank-2 input expected");
  const size_t big_n = zv.dim(0), d = zv.dim(1);
  if (big_n != w * (n + nl)) throw numeric_error("regroup: N != w*(n+nl)");
  const size_t s = (n + nl) * d;
  real_tensor out({w, s});
  for (size_t t = 0; t < w; ++t)
    for (size_t c = 0; c < n + nl; ++c) {
      const size_t row = c < n ? t * n + c : w * n + t * nl + (c - n);
      for (size_t j = 0; j < d; ++j) out.at(t, c * d + j) = zv.at(row, j);
    }
  node_id id = push_real(std::move(out), needs_grad(z), {});
  nodes_[id].backward = [z, id, w, n, nl, d](tape& t) {
    if (!t.needs_grad(z)) return;
    const auto& g = t.rgrad(id);
    auto& gz = t.ensure_rgrad(z);
    for (size_t tt = 0; tt < w; ++tt)
      for (size_t c = 0; c < n + nl; ++c) {
        const size_t row = c < n ? tt * n + c : w * n + tt * nl + (c - n);
        for (size_t j = 0; j < d; ++j) gz.at(row, j) += g.at(tt, c * d + j);
      }
  };
  return id;
}

node_id tape::affine(node_id x, node_id weight, node_id bias) {
  const auto& xv = rval(x);
  const auto& wv = rval(weight);
  const auto& bv = rval(bias);
  if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1)
    throw numeric_error("affine: bad ranks");
  const size_t rows = xv.dim(0), inner = xv.dim(1), m = wv.dim(1);
  if (wv.dim(0) != inner || bv.dim(0) != m) throw numeric_error("affine: shape mismatch");
  real_tensor out({rows, m});
  for (size_t i = 0; i < rows; ++i) {
    double* orow = &out.data[i * m];
    for (size_t j = 0; j < m; ++j) orow[j] = bv.at(j);
    const double* xrow = &xv.data[i * inner];
    for (size_t k = 0; k < inner; ++k) {
      const double xk = xrow[k];
      if (xk == 0.0) continue;
      const double* wrow = &wv.data[k * m];
      for (size_t j = 0; j < m; ++j) orow[j] += xk * wrow[j];
    }
  }
  const bool ng = needs_grad(x) || needs_grad(weight) || needs_grad(bias);
  node_id id = push_real(std::move(out), ng, {});
  nodes_[id].backward = [x, weight, bias, id, rows, inner, m](tape& t) {
    const auto& g = t.rgrad(id);
    const auto& xv = t.rval(x);
    const auto& wv = t.rval(weight);
    if (t.needs_grad(bias)) {
      auto& gb = t.ensure_rgrad(bias);
      for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < m; ++j) gb.at(j) += g.at(i, j);
    }
    if (t.needs_grad(weight)) {
      auto& gw = t.ensure_rgrad(weight);
      for (size_t i = 0; i < rows; ++i) {
        const double* xrow = &xv.data[i * inner];
        const double* grow = &g.data[i * m];
        for (size_t k = 0; k < inner; ++k) {
          const double xk = xrow[k];
          if (xk == 0.0) continue;
          double* gwrow = &gw.data[k * m];
          for (size_t j = 0; j < m; ++j) gwrow[j] += xk * grow[j];
        }
      }
    }
    if (t.needs_grad(x)) {
      auto& gx = t.ensure_rgrad(x);
      for (size_t i = 0; i < rows; ++i) {
        const double* grow = &g.data[i * m];
        double* gxrow = &gx.data[i * inner];
        for (size_t k = 0; k < inner; ++k) {
          const double* wrow = &wv.data[k * m];
          double acc = 0.0;
          for (size_t j = 0; j < m; ++j) acc += grow[j] * wrow[j];
          gxrow[k] += acc;
        }
      }
    }
  };
  return id;
}

node_id tape::mse(node_id pred, real_tensor target) {
  const auto& pv = rval(pred);
  if (!pv.same_shape(target)) throw numeric_error("mse: shape mismatch");
  const size_t n = pv.numel();
  if (n == 0) throw numeric_error("mse: empty tensors");
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = pv.data[i] - target.data[i];
    acc += d * d;
  }
  real_tensor out = real_tensor::scalar(acc / static_cast<double>(n));
  auto tgt = std::make_shared<real_tensor>(std::move(target));
  node_id id = push_real(std::move(out), needs_grad(pred), {});
  nodes_[id].backward = [pred, id, tgt, n](tape& t) {
    if (!t.needs_grad(pred)) return;
    const double gl = t.rgrad(id).data[0];
    const auto& pv = t.rval(pred);
    auto& gp = t.ensure_rgrad(pred);
    const double scale = 2.0 * gl / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i)
      gp.data[i] += scale * (pv.data[i] - tgt->data[i]);
  };
  return id;
}

node_id tape::dft(node_id x) {
  const auto& xv = rval(x);
  if (xv.rank() != 2) throw numeric_error("dft: rank-2 input expected");
  const size_t n = xv.dim(0), d = xv.dim(1);
  complex_tensor out({n, d});
  for (size_t i = 0; i < xv.numel(); ++i) out.data[i] = cd(xv.data[i], 0.0);
  dft_columns(plan_for(n), out);
  node_id id = push_complex(std::move(out), needs_grad(x), {});
  nodes_[id].backward = [x, id, n](tape& t) {
    if (!t.needs_grad(x)) return;
    // adjoint of the forward transform is the unnormalized inverse
    // transform; input was real, so keep the real part only
    complex_tensor g = t.cgrad(id);
    idft_columns_unnormalized(t.plan_for(n), g);
    auto& gx = t.ensure_rgrad(x);
    for (size_t i = 0; i < gx.numel(); ++i) gx.data[i] += g.data[i].real();
  };
  return id;
}

node_id tape::cmatmul(node_id a, node_id s) {
  const auto& av = cval(a);
  const auto& sv = cval(s);
  if (av.rank() != 2 || sv.rank() != 2 || av.dim(1) != sv.dim(0))
    throw numeric_error("cmatmul: shape mismatch");
  const size_t rows = av.dim(0), inner = av.dim(1), cols = sv.dim(1);
  complex_tensor out({rows, cols});
  {
    // manual (re,im) arithmetic keeps this loop free of Annex G calls
    const double* ap = reinterpret_cast<const double*>(av.data.data());
    const double* sp = reinterpret_cast<const double*>(sv.data.data());
    double* op = reinterpret_cast<double*>(out.data.data());
    for (size_t i = 0; i < rows; ++i) {
      double* orow = op + i * 2 * cols;
      const double* arow = ap + i * 2 * inner;
      for (size_t k = 0; k < inner; ++k) {
        const double ar = arow[2 * k], ai = arow[2 * k + 1];
        const double* srow = sp + k * 2 * cols;
        for (size_t j = 0; j < cols; ++j) {
          orow[2 * j] += ar * srow[2 * j] - ai * srow[2 * j + 1];
          orow[2 * j + 1] += ar * srow[2 * j + 1] + ai * srow[2 * j];
        }
      }
    }
  }
  const bool ng = needs_grad(a) || needs_grad(s);
  node_id id = push_complex(std::move(out), ng, {});
  nodes_[id].backward = [a, s, id, rows, inner, cols](tape& t) {
    const auto& g = t.cgrad(id);
    const double* gp = reinterpret_cast<const double*>(g.data.data());
    if (t.needs_grad(a)) {
      // grad_a = g * S^H
      const auto& sv = t.cval(s);
      const double* sp = reinterpret_cast<const double*>(sv.data.data());
      auto& ga = t.ensure_cgrad(a);
      double* gap = reinterpret_cast<double*>(ga.data.data());
      for (size_t i = 0; i < rows; ++i) {
        const double* grow = gp + i * 2 * cols;
        double* garow = gap + i * 2 * inner;
        for (size_t k = 0; k < inner; ++k) {
          const double* srow = sp + k * 2 * cols;
          double accr = 0.0, acci = 0.0;
          for (size_t j = 0; j < cols; ++j) {
            // g(i,j) * conj(s(k,j))
            accr += grow[2 * j] * srow[2 * j] + grow[2 * j + 1] * srow[2 * j + 1];
            acci += grow[2 * j + 1] * srow[2 * j] - grow[2 * j] * srow[2 * j + 1];
          }
          garow[2 * k] += accr;
          garow[2 * k + 1] += acci;
        }
      }
    }
    if (t.needs_grad(s)) {
      // grad_s = A^H * g
      const auto& av = t.cval(a);
      const double* ap = reinterpret_cast<const double*>(av.data.data());
      auto& gs = t.ensure_cgrad(s);
      double* gsp = reinterpret_cast<double*>(gs.data.data());
      for (size_t i = 0; i < rows; ++i) {
        const double* arow = ap + i * 2 * inner;
        const double* grow = gp + i * 2 * cols;
        for (size_t k = 0; k < inner; ++k) {
          // conj(a(i,k)) * g(i,:)
          const double ar = arow[2 * k], ai = -arow[2 * k + 1];
          double* gsrow = gsp + k * 2 * cols;
          for (size_t j = 0; j < cols; ++j) {
            gsrow[2 * j] += ar * grow[2 * j] - ai * grow[2 * j + 1];
            gsrow[2 * j + 1] += ar * grow[2 * j + 1] + ai * grow[2 * j];
          }
        }
      }
    }
  };
  return id;
}

node_id tape::cbias(node_id a, node_id b) {
  const auto& av = cval(a);
  const auto& bv = cval(b);
  if (av.rank() != 2 || bv.rank() != 1 || bv.dim(0) != av.dim(1))
    throw numeric_error("cbias: shape mismatch");
  const size_t rows = av.dim(0), cols = av.dim(1);
  complex_tensor out = av;
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j) out.at(i, j) += bv.at(j);
  const bool ng = needs_grad(a) || needs_grad(b);
  node_id id = push_complex(std::move(out), ng, {});
  nodes_[id].backward = [a, b, id, rows, cols](tape& t) {
    const auto& g = t.cgrad(id);
    if (t.needs_grad(a)) {
      auto& ga = t.ensure_cgrad(a);
      for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.ensure_cgrad(b);
      for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) gb.at(j) += g.at(i, j);
    }
  };
  return id;
}

node_id tape::row_scale(node_id a, node_id alpha) {
  const auto& av = cval(a);
  const auto& alv = rval(alpha);
  if (av.rank() != 2 || alv.rank() != 1 || alv.dim(0) != av.dim(0))
    throw numeric_error("row_scale: shape mismatch");
  const size_t rows = av.dim(0), cols = av.dim(1);
  complex_tensor out = av;
  for (size_t i = 0; i < rows; ++i) {
    const double sc = alv.at(i);
    for (size_t j = 0; j < cols; ++j) out.at(i, j) *= sc;
  }
  const bool ng = needs_grad(a) || needs_grad(alpha);
  node_id id = push_complex(std::move(out), ng, {});
  nodes_[id].backward = [a, alpha, id, rows, cols](tape& t) {
    const auto& g = t.cgrad(id);
    const auto& av = t.cval(a);
    const auto& alv = t.rval(alpha);
    if (t.needs_grad(a)) {
      auto& ga = t.ensure_cgrad(a);
      for (size_t i = 0; i < rows; ++i) {
        const double sc = alv.at(i);
        for (size_t j = 0; j < cols; ++j) ga.at(i, j) += g.at(i, j) * sc;
      }
    }
    if (t.needs_grad(alpha)) {
      auto& gal = t.ensure_rgrad(alpha);
      for (size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < cols; ++j) {
          const cd gv = g.at(i, j), avv = av.at(i, j);
          acc += gv.real() * avv.real() + gv.imag() * avv.imag();
        }
        gal.at(i) += acc;
      }
    }
  };
  return id;
}

node_id tape::alpha_gate(node_id theta, std::vector<std::uint8_t> mask) {
  const auto& tv = rval(theta);
  if (tv.numel() != 1) throw numeric_error("alpha_gate: theta must be scalar");
  const size_t n = mask.size();
  const double s = sigmoid(tv.data[0]);
  real_tensor out({n});
  for (size_t i = 0; i < n; ++i) out.at(i) = mask[i] ? s : 1.0;
  auto m = std::make_shared<std::vector<std::uint8_t>>(std::move(mask));
  node_id id = push_real(std::move(out), needs_grad(theta), {});
  nodes_[id].backward = [theta, id, m](tape& t) {
    if (!t.needs_grad(theta)) return;
    bool any = false;
    for (std::uint8_t v : *m) any |= v != 0;
    if (!any) return;  // unmasked rows are the constant 1.0
    const auto& g = t.rgrad(id);
    const double s = sigmoid(t.rval(theta).data[0]);
    const double ds = s * (1.0 - s);
    double acc = 0.0;
    for (size_t i = 0; i < m->size(); ++i)
      if ((*m)[i]) acc += g.at(i);
    t.ensure_rgrad(theta).data[0] += acc * ds;
  };
  return id;
}

node_id tape::crelu(node_id a) {
  complex_tensor out = cval(a);
  for (auto& v : out.data)
    v = cd(v.real() > 0.0 ? v.real() : 0.0, v.imag() > 0.0 ? v.imag() : 0.0);
  node_id id = push_complex(std::move(out), needs_grad(a), {});
  nodes_[id].backward = [a, id](tape& t) {
    if (!t.needs_grad(a)) return;
    const auto& g = t.cgrad(id);
    const auto& out = t.cval(id);
    auto& ga = t.ensure_cgrad(a);
    for (size_t i = 0; i < g.numel(); ++i) {
      const double gr = out.data[i].real() > 0.0 ? g.data[i].real() : 0.0;
      const double gi = out.data[i].imag() > 0.0 ? g.data[i].imag() : 0.0;
      ga.data[i] += cd(gr, gi);
    }
  };
  return id;
}

node_id tape::cadd(node_id a, node_id b) {
  const auto& av = cval(a);
  const auto& bv = cval(b);
  if (!av.same_shape(bv)) throw numeric_error("cadd: shape mismatch");
  complex_tensor out = av;
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] += bv.data[i];
  const bool ng = needs_grad(a) || needs_grad(b);
  node_id id = push_complex(std::move(out), ng, {});
  nodes_[id].backward = [a, b, id](tape& t) {
    const auto& g = t.cgrad(id);
    if (t.needs_grad(a)) {
      auto& ga = t.ensure_cgrad(a);
      for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.ensure_cgrad(b);
      for (size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i];
    }
  };
  return id;
}

node_id tape::real_idft(node_id a, double* imag_residue) {
  const auto& av = cval(a);
  if (av.rank() != 2) throw numeric_error("real_idft: rank-2 input expected");
  const size_t n = av.dim(0), d = av.dim(1);
  complex_tensor full = av;
  idft_columns(plan_for(n), full);
  real_tensor out({n, d});
  double residue = 0.0;
  for (size_t i = 0; i < full.numel(); ++i) {
    out.data[i] = full.data[i].real();
    residue = std::max(residue, std::abs(full.data[i].imag()));
  }
  if (imag_residue) *imag_residue = residue;
  node_id id = push_real(std::move(out), needs_grad(a), {});
  nodes_[id].backward = [a, id, n](tape& t) {
    if (!t.needs_grad(a)) return;
    // z = Re((1/N) conj(F) a)  =>  grad_a = (1/N) F grad_z
    const auto& g = t.rgrad(id);
    complex_tensor gc({g.dim(0), g.dim(1)});
    for (size_t i = 0; i < g.numel(); ++i) gc.data[i] = cd(g.data[i], 0.0);
    dft_columns(t.plan_for(n), gc);
    const double scale = 1.0 / static_cast<double>(n);
    auto& ga = t.ensure_cgrad(a);
    for (size_t i = 0; i < ga.numel(); ++i) ga.data[i] += gc.data[i] * scale;
  };
  return id;
}

void tape::backward(node_id loss) {
  auto& ln = nodes_[loss];
  if (ln.is_complex || ln.rv.numel() != 1)
    throw numeric_error("backward: loss must be a real scalar");
  if (!ln.needs_grad) return;  // constant loss: nothing depends on parameters
  ensure_rgrad(loss).data[0] = 1.0;
  for (node_id i = loss; i >= 0; --i) {
    auto& n = nodes_[i];
    if (!n.needs_grad || !n.backward) continue;
    const bool touched = n.is_complex ? !n.cg.data.empty() : !n.rg.data.empty();
    if (!touched) continue;  // never reached the loss
    n.backward(*this);
  }
}

}  // namespace ffad::numerics
