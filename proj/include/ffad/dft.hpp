#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "ffad/tensor.hpp"

// Discrete Fourier transform along the node (row) axis.
//
// Conventions, fixed project-wide:
//   forward:  X[k] = sum_t x[t] * exp(-2*pi*i*k*t/N)      (no scaling)
//   inverse:  x[t] = (1/N) * sum_k X[k] * exp(+2*pi*i*k*t/N)
//
// The engine is a recursive mixed-radix Cooley-Tukey decomposition that
// handles arbitrary N exactly (prime factors fall back to the O(p^2)
// direct sum). N here is w*(n+n') and is almost never a power of two.

namespace ffad::numerics {

using cd = std::complex<double>;

class dft_plan {
 public:
  explicit dft_plan(size_t n);

  size_t size() const { return n_; }

  // Out-of-place transform of one contiguous length-n sequence.
  // scratch must hold at least n elements and be distinct from in/out.
  void transform(const cd* in, cd* out, cd* scratch, bool inverse_exp) const;

  // Convenience in-place wrappers (allocate their own buffers).
  void forward(std::vector<cd>& a) const;
  void inverse(std::vector<cd>& a) const;                // applies 1/n
  void inverse_unnormalized(std::vector<cd>& a) const;   // conj kernel, no 1/n

 private:
  void recurse(const cd* in, size_t stride, cd* out, size_t n, size_t tw_step,
               const size_t* factor, cd* scratch, bool inverse_exp) const;

  size_t n_ = 0;
  std::vector<size_t> factors_;    // ascending prime factorization of n_
  std::vector<cd> twiddles_;       // exp(-2*pi*i*j/n), j in [0, n)
};

// Column-wise transforms over an N x d matrix (transform runs down each
// column, i.e. along the node axis). `inverse` applies the 1/N scale.
void dft_columns(const dft_plan& plan, complex_tensor& m);
void idft_columns(const dft_plan& plan, complex_tensor& m);
void idft_columns_unnormalized(const dft_plan& plan, complex_tensor& m);

// Whole-tensor entry points used by tests and by the model. Input rank 2.
complex_tensor dft_nodes(const real_tensor& x);
complex_tensor dft_nodes(const complex_tensor& x);
complex_tensor idft_nodes(const complex_tensor& x);

}  // namespace ffad::numerics
