#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "ffad/dft.hpp"
#include "ffad/tensor.hpp"

// Reverse-mode autodiff over real and complex tensors.
//
// The tape records nodes in execution order; backward() replays closures in
// exact reverse order, so topological order is creation order by
// construction. Complex gradients are packed adjoints: grad.re = dL/d(re),
// grad.im = dL/d(im), i.e. (re, im) are treated as independent real
// coordinates. Under that convention the adjoint of any C-linear map M is
// multiplication by M^H, which is where the DFT and matmul backward rules
// below come from.

namespace ffad::numerics {

class tape;
using node_id = int;

struct tape_node {
  real_tensor rv;     // value (real nodes)
  real_tensor rg;     // gradient, allocated lazily
  complex_tensor cv;  // value (complex nodes)
  complex_tensor cg;
  bool is_complex = false;
  bool needs_grad = false;
  std::function<void(tape&)> backward;  // empty for leaves
};

class tape {
 public:
  // ---- leaves ----
  node_id real_input(real_tensor v);    // constant: gradients never tracked
  node_id real_param(real_tensor v);    // differentiable leaf
  node_id complex_param(complex_tensor v);

  // ---- real ops ----
  node_id add(node_id a, node_id b);
  node_id add_const(node_id a, real_tensor c);  // a + fixed tensor (noise)
  node_id relu(node_id a);
  // x: w x c, kernel: c x c x k (out, in, tap), bias: c; zero padded,
  // cross-correlation along rows (time), odd k required
  node_id conv1d_same(node_id x, node_id kernel, node_id bias);
  node_id flatten_concat(node_id a, node_id b);  // row-major flatten, stack
  // x: N, e: d, bias: scalar -> N x d, out(i,j) = x(i)*e(j) + bias
  node_id embed(node_id x, node_id e, node_id bias);
  // z: N x d with N = w*(n+nl) -> w x (n+nl)*d, gathering each time step's
  // node rows (metric block then log block) side by side; exact inverse of
  // the flatten_concat/embed node layout
  node_id regroup_time_major(node_id z, size_t w, size_t n, size_t nl);
  node_id affine(node_id x, node_id weight, node_id bias);  // x*W + b
  node_id mse(node_id pred, real_tensor target);            // mean over all cells

  // ---- complex ops ----
  node_id dft(node_id x);  // real N x d -> complex N x d, along columns
  node_id cmatmul(node_id a, node_id s);
  node_id cbias(node_id a, node_id b);  // + broadcast row vector
  // out(i,j) = a(i,j) * alpha(i), alpha real length N
  node_id row_scale(node_id a, node_id alpha);
  // alpha(i) = sigmoid(theta) where mask[i], else exactly 1.0; the mask is
  // a constant: gradient reaches theta only through masked entries
  node_id alpha_gate(node_id theta, std::vector<std::uint8_t> mask);
  node_id crelu(node_id a);  // relu on re and im independently
  node_id cadd(node_id a, node_id b);
  // real part of the normalized inverse DFT; discarded imaginary residue's
  // max magnitude is written to *imag_residue when given
  node_id real_idft(node_id a, double* imag_residue = nullptr);

  void backward(node_id loss);

  // ---- access ----
  const real_tensor& rval(node_id id) const { return nodes_[id].rv; }
  const complex_tensor& cval(node_id id) const { return nodes_[id].cv; }
  const real_tensor& rgrad(node_id id) const { return nodes_[id].rg; }
  const complex_tensor& cgrad(node_id id) const { return nodes_[id].cg; }
  bool needs_grad(node_id id) const { return nodes_[id].needs_grad; }
  size_t node_count() const { return nodes_.size(); }

  real_tensor& ensure_rgrad(node_id id);
  complex_tensor& ensure_cgrad(node_id id);

  const dft_plan& plan_for(size_t n);

 private:
  node_id push_real(real_tensor v, bool needs_grad, std::function<void(tape&)> fn);
  node_id push_complex(complex_tensor v, bool needs_grad, std::function<void(tape&)> fn);

  std::vector<tape_node> nodes_;
  std::vector<std::unique_ptr<dft_plan>> plans_;  // tiny cache keyed by size
};

double sigmoid(double x);

}  // namespace ffad::numerics
