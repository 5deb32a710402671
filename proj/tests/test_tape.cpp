#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ffad/tape.hpp"

using ffad::complex_tensor;
using ffad::make_real;
using ffad::real_tensor;
using ffad::numerics::cd;
using ffad::numerics::node_id;
using ffad::numerics::tape;

namespace {

struct grad_check_result {
  double max_rel_err = 0.0;
  size_t coords = 0;
};

using builder_fn = std::function<node_id(tape&, const std::vector<node_id>&,
                                         const std::vector<node_id>&)>;

double eval_loss(const std::vector<real_tensor>& rp,
                 const std::vector<complex_tensor>& cp, const builder_fn& build) {
  tape t;
  std::vector<node_id> rids, cids;
  for (const auto& p : rp) rids.push_back(t.real_param(p));
  for (const auto& p : cp) cids.push_back(t.complex_param(p));
  return t.rval(build(t, rids, cids)).data[0];
}

double rel_err(double a, double f) {
  const double denom = std::max({std::abs(a), std::abs(f), 1e-8});
  return std::abs(a - f) / denom;
}

// Central finite differences against reverse-mode gradients, every
// coordinate of every parameter, complex re/im separately.
grad_check_result check_gradients(std::vector<real_tensor> rp,
                                  std::vector<complex_tensor> cp,
                                  const builder_fn& build, double h = 1e-6) {
  tape t;
  std::vector<node_id> rids, cids;
  for (const auto& p : rp) rids.push_back(t.real_param(p));
  for (const auto& p : cp) cids.push_back(t.complex_param(p));
  node_id loss = build(t, rids, cids);
  t.backward(loss);

  grad_check_result res;
  for (size_t pi = 0; pi < rp.size(); ++pi) {
    const auto& g = t.rgrad(rids[pi]);
    for (size_t i = 0; i < rp[pi].numel(); ++i) {
      auto plus = rp, minus = rp;
      plus[pi].data[i] += h;
      minus[pi].data[i] -= h;
      const double fd =
          (eval_loss(plus, cp, build) - eval_loss(minus, cp, build)) / (2 * h);
      const double an = g.data.empty() ? 0.0 : g.data[i];
      res.max_rel_err = std::max(res.max_rel_err, rel_err(an, fd));
      ++res.coords;
    }
  }
  for (size_t pi = 0; pi < cp.size(); ++pi) {
    const auto& g = t.cgrad(cids[pi]);
    for (size_t i = 0; i < cp[pi].numel(); ++i) {
      for (int part = 0; part < 2; ++part) {
        auto plus = cp, minus = cp;
        const cd delta = part == 0 ? cd(h, 0) : cd(0, h);
        plus[pi].data[i] += delta;
        minus[pi].data[i] -= delta;
        const double fd =
            (eval_loss(rp, plus, build) - eval_loss(rp, minus, build)) / (2 * h);
        const double an = g.data.empty()
                              ? 0.0
                              : (part == 0 ? g.data[i].real() : g.data[i].imag());
        res.max_rel_err = std::max(res.max_rel_err, rel_err(an, fd));
        ++res.coords;
      }
    }
  }
  return res;
}

real_tensor random_real(std::vector<size_t> shape, std::uint64_t seed,
                        double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  real_tensor t(std::move(shape));
  for (auto& v : t.data) v = d(rng);
  return t;
}

complex_tensor random_complex(std::vector<size_t> shape, std::uint64_t seed,
                              double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  complex_tensor t(std::move(shape));
  for (auto& v : t.data) v = cd(d(rng), d(rng));
  return t;
}

}  // namespace

TEST_SUITE("tape") {

TEST_CASE("conv1d_same hand example") {
  tape t;
  auto x = t.real_input(make_real({3, 1}, {1, 2, 3}));
  auto k = t.real_param(real_tensor({1, 1, 3}, {1, 0, -1}));
  auto b = t.real_param(real_tensor({1}, {0}));
  auto y = t.conv1d_same(x, k, b);
  CHECK(t.rval(y).at(0, 0) == doctest::Approx(-2));
  CHECK(t.rval(y).at(1, 0) == doctest::Approx(-2));
  CHECK(t.rval(y).at(2, 0) == doctest::Approx(2));
  auto r = t.relu(y);
  CHECK(t.rval(r).at(0, 0) == doctest::Approx(0));
  CHECK(t.rval(r).at(1, 0) == doctest::Approx(0));
  CHECK(t.rval(r).at(2, 0) == doctest::Approx(2));
}

TEST_CASE("conv1d_same identity kernel preserves input") {
  tape t;
  auto xv = random_real({7, 3}, 21);
  auto x = t.real_input(xv);
  real_tensor k({3, 3, 3});
  for (size_t c = 0; c < 3; ++c) k.at(c, c, 1) = 1.0;  // center tap only
  auto y = t.conv1d_same(x, t.real_param(k), t.real_param(real_tensor({3})));
  for (size_t i = 0; i < xv.numel(); ++i)
    CHECK(t.rval(y).data[i] == doctest::Approx(xv.data[i]));
}

TEST_CASE("conv1d_same gradients") {
  auto x = random_real({5, 2}, 1);
  auto k = random_real({2, 2, 3}, 2, 0.5);
  auto b = random_real({2}, 3, 0.1);
  auto target = random_real({5, 2}, 4);
  auto res = check_gradients(
      {x, k, b}, {},
      [&](tape& t, const std::vector<node_id>& rp, const std::vector<node_id>&) {
        return t.mse(t.conv1d_same(rp[0], rp[1], rp[2]), target);
      });
  CHECK(res.coords == 10 + 12 + 2);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("relu gradient masks non-positive lanes") {
  // values kept away from the kink
  auto x = make_real({4}, {-2.0, -0.5, 0.5, 3.0});
  auto res = check_gradients(
      {x}, {},
      [&](tape& t, const std::vector<node_id>& rp, const std::vector<node_id>&) {
        return t.mse(t.relu(rp[0]), make_real({4}, {1, 1, 1, 1}));
      });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("flatten_concat keeps metric block before log block") {
  tape t;
  auto a = t.real_input(make_real({2, 1}, {10, 11}));
  auto b = t.real_input(make_real({2, 1}, {20, 21}));
  auto v = t.flatten_concat(a, b);
  REQUIRE(t.rval(v).numel() == 4);
  CHECK(t.rval(v).at(0) == 10);
  CHECK(t.rval(v).at(1) == 11);
  CHECK(t.rval(v).at(2) == 20);
  CHECK(t.rval(v).at(3) == 21);
}

TEST_CASE("embed basics") {
  tape t;
  SUBCASE("zero input gives bias rows") {
    auto x = t.real_input(real_tensor({3}));
    auto e = t.real_param(make_real({2}, {1.5, -2.0}));
    auto b = t.real_param(real_tensor::scalar(0.25));
    auto out = t.embed(x, e, b);
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 2; ++j) CHECK(t.rval(out).at(i, j) == 0.25);
  }
  SUBCASE("unit basis vector copies the input into one column") {
    auto x = t.real_input(make_real({3}, {7, 8, 9}));
    auto e = t.real_param(make_real({2}, {0, 1}));
    auto b = t.real_param(real_tensor::scalar(0.0));
    auto out = t.embed(x, e, b);
    for (size_t i = 0; i < 3; ++i) {
      CHECK(t.rval(out).at(i, 0) == 0.0);
      CHECK(t.rval(out).at(i, 1) == doctest::Approx(7.0 + i));
    }
  }
}

TEST_CASE("embed gradients") {
  auto x = random_real({6}, 5);
  auto e = random_real({3}, 6);
  auto b = real_tensor::scalar(0.3);
  auto target = random_real({6, 3}, 7);
  auto res = check_gradients(
      {x, e, b}, {},
      [&](tape& t, const std::vector<node_id>& rp, const std::vector<node_id>&) {
        return t.mse(t.embed(rp[0], rp[1], rp[2]), target);
      });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("cmatmul hand example") {
  tape t;
  complex_tensor a({2, 2}, {cd(1, 1), cd(0, 0), cd(0, 0), cd(2, 0)});
  complex_tensor s({2, 2}, {cd(0, 1), cd(1, 0), cd(1, 0), cd(0, -1)});
  auto out = t.cmatmul(t.complex_param(a), t.complex_param(s));
  CHECK(std::abs(t.cval(out).at(0, 0) - cd(-1, 1)) < 1e-12);
  CHECK(std::abs(t.cval(out).at(0, 1) - cd(1, 1)) < 1e-12);
  CHECK(std::abs(t.cval(out).at(1, 0) - cd(2, 0)) < 1e-12);
  CHECK(std::abs(t.cval(out).at(1, 1) - cd(0, -2)) < 1e-12);
}

TEST_CASE("complex chain gradients: dft, matmul, bias, scale, crelu, idft") {
  const size_t n = 6, d = 3;
  auto x = random_real({n, d}, 11);
  auto s = random_complex({d, d}, 12, 0.7);
  auto b = random_complex({d}, 13, 0.3);
  auto theta = real_tensor::scalar(0.2);
  auto target = random_real({n, d}, 14);
  std::vector<std::uint8_t> mask = {1, 0, 0, 1, 0, 0};

  auto res = check_gradients(
      {x, theta}, {s, b},
      [&](tape& t, const std::vector<node_id>& rp, const std::vector<node_id>& cp) {
        auto spec = t.dft(rp[0]);
        auto h = t.cbias(t.cmatmul(spec, cp[0]), cp[1]);
        auto alpha = t.alpha_gate(rp[1], mask);
        auto scaled = t.row_scale(h, alpha);
        auto act = t.crelu(scaled);
        auto acc = t.cadd(act, act);
        return t.mse(t.real_idft(acc), target);
      });
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("dft round trip through the tape is the identity") {
  tape t;
  auto xv = random_real({10, 2}, 31);
  auto x = t.real_param(xv);
  double residue = -1.0;
  auto back = t.real_idft(t.dft(x), &residue);
  for (size_t i = 0; i < xv.numel(); ++i)
    CHECK(t.rval(back).data[i] == doctest::Approx(xv.data[i]).epsilon(1e-12));
  CHECK(residue >= 0.0);
  CHECK(residue < 1e-12);  // real input: imag part cancels exactly up to rounding
}

TEST_CASE("alpha_gate values and locality") {
  tape t;
  auto theta = t.real_param(real_tensor::scalar(0.0));
  auto alpha = t.alpha_gate(theta, {1, 0, 1, 0});
  CHECK(t.rval(alpha).at(0) == doctest::Approx(0.5));  // sigmoid(0)
  CHECK(t.rval(alpha).at(1) == 1.0);
  CHECK(t.rval(alpha).at(2) == doctest::Approx(0.5));
  CHECK(t.rval(alpha).at(3) == 1.0);
}

TEST_CASE("alpha_gate routes gradient to theta only through masked rows") {
  const size_t n = 4, d = 2;
  auto h = random_complex({n, d}, 41);
  auto theta = real_tensor::scalar(-0.3);
  auto target = random_real({n, d}, 42);

  SUBCASE("empty mask: zero theta gradient") {
    tape t;
    auto th = t.real_param(theta);
    auto hh = t.complex_param(h);
    auto alpha = t.alpha_gate(th, std::vector<std::uint8_t>(n, 0));
    auto loss = t.mse(t.real_idft(t.row_scale(hh, alpha)), target);
    t.backward(loss);
    CHECK(t.rgrad(th).data.empty());  // gradient never flowed to theta
  }
  SUBCASE("masked rows: finite differences agree") {
    auto res = check_gradients(
        {theta}, {h},
        [&](tape& t, const std::vector<node_id>& rp, const std::vector<node_id>& cp) {
          auto alpha = t.alpha_gate(rp[0], {1, 1, 0, 0});
          return t.mse(t.real_idft(t.row_scale(cp[0], alpha)), target);
        });
    CHECK(res.max_rel_err < 1e-6);
  }
}

TEST_CASE("regroup_time_major inverts the fusion layout") {
  // w=2, n=1, nl=1, d=2: node rows are [m(0), m(1), l(0), l(1)]
  tape t;
  real_tensor z({4, 2}, {/*m t0*/ 1, 2, /*m t1*/ 3, 4, /*l t0*/ 5, 6, /*l t1*/ 7, 8});
  auto out = t.regroup_time_major(t.real_param(z), 2, 1, 1);
  REQUIRE(t.rval(out).shape == std::vector<size_t>{2, 4});
  // row t = [m(t) embedding | l(t) embedding]
  CHECK(t.rval(out).at(0, 0) == 1);
  CHECK(t.rval(out).at(0, 1) == 2);
  CHECK(t.rval(out).at(0, 2) == 5);
  CHECK(t.rval(out).at(0, 3) == 6);
  CHECK(t.rval(out).at(1, 0) == 3);
  CHECK(t.rval(out).at(1, 1) == 4);
  CHECK(t.rval(out).at(1, 2) == 7);
  CHECK(t.rval(out).at(1, 3) == 8);
}

TEST_CASE("affine and mse gradients") {
  auto x = random_real({3, 4}, 51);
  auto w = random_real({4, 2}, 52, 0.5);
  auto b = random_real({2}, 53, 0.1);
  auto target = random_real({3, 2}, 54);
  auto res = check_gradients(
      {x, w, b}, {},
      [&](tape& t, const std::vector<node_id>& rp, const std::vector<node_id>&) {
        return t.mse(t.affine(rp[0], rp[1], rp[2]), target);
      });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("mse hand value") {
  tape t;
  auto p = t.real_param(make_real({2}, {1, 2}));
  auto loss = t.mse(p, make_real({2}, {0, 0}));
  CHECK(t.rval(loss).data[0] == doctest::Approx(2.5));
}

TEST_CASE("backward rejects non-scalar loss and ignores constants") {
  tape t;
  auto p = t.real_param(make_real({2}, {1, 2}));
  CHECK_THROWS_AS(t.backward(p), ffad::numeric_error);

  auto c = t.real_input(real_tensor::scalar(3.0));
  t.backward(c);  // constant loss: no-op
  CHECK(t.rgrad(c).data.empty());
}

TEST_CASE("gradient accumulates when a node fans out") {
  tape t;
  auto p = t.real_param(make_real({2}, {1.0, -2.0}));
  auto doubled = t.add(p, p);
  auto loss = t.mse(doubled, make_real({2}, {0, 0}));
  t.backward(loss);
  // d/dp mean((2p)^2) = 4p
  CHECK(t.rgrad(p).at(0) == doctest::Approx(4.0 * 1.0));
  CHECK(t.rgrad(p).at(1) == doctest::Approx(4.0 * -2.0));
}

}  // TEST_SUITE
