#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ffad/common.hpp"
#include "ffad/preprocess.hpp"

using namespace ffad;
using namespace ffad::prep;

TEST_SUITE("preprocess") {

TEST_CASE("z-score hand example") {
  auto m = make_real({3, 1}, {1, 2, 3});
  auto ns = fit_norm(m, 0, 3);
  CHECK(ns.mean[0] == doctest::Approx(2.0));
  CHECK(ns.stddev[0] == doctest::Approx(0.816496580927726));
  auto z = apply_norm(m, ns);
  CHECK(z.at(0, 0) == doctest::Approx(-1.224744871391589));
  CHECK(z.at(1, 0) == doctest::Approx(0.0));
  CHECK(z.at(2, 0) == doctest::Approx(1.224744871391589));
}

TEST_CASE("constant column collapses to zero via the std floor") {
  auto m = make_real({2, 1}, {5, 5});
  auto ns = fit_norm(m, 0, 2);
  CHECK(ns.stddev[0] == 1e-8);
  auto z = apply_norm(m, ns);
  CHECK(z.at(0, 0) == 0.0);
  CHECK(z.at(1, 0) == 0.0);
}

TEST_CASE("fit split gets mean 0 std 1; test rows reuse train stats") {
  std::mt19937_64 rng(make_rng(7, seed_stream::test_misc));
  std::normal_distribution<double> d(3.0, 2.5);
  real_tensor m({100, 3});
  for (auto& v : m.data) v = d(rng);
  auto ns = fit_norm(m, 0, 70);
  auto z = apply_norm(m, ns);
  for (size_t j = 0; j < 3; ++j) {
    double mean = 0, var = 0;
    for (size_t t = 0; t < 70; ++t) mean += z.at(t, j);
    mean /= 70;
    for (size_t t = 0; t < 70; ++t) var += (z.at(t, j) - mean) * (z.at(t, j) - mean);
    var /= 70;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-6));
  }
  // rows past the fit range transform with the same stats
  CHECK(z.at(99, 1) == doctest::Approx((m.at(99, 1) - ns.mean[1]) / ns.stddev[1]));
  CHECK_THROWS_AS(fit_norm(m, 50, 50), data_error);
}

TEST_CASE("occurrence rows are set membership") {
  std::vector<std::vector<int>> ids{{3, 3, 3}, {}, {0, 2, -1}};
  auto occ = build_log_occurrence(ids, 4);  // width 5, unknown column 4
  REQUIRE(occ.shape == std::vector<size_t>{3, 5});
  for (size_t j = 0; j < 5; ++j) CHECK(occ.at(0, j) == (j == 3 ? 1.0 : 0.0));
  for (size_t j = 0; j < 5; ++j) CHECK(occ.at(1, j) == 0.0);
  CHECK(occ.at(2, 0) == 1.0);
  CHECK(occ.at(2, 2) == 1.0);
  CHECK(occ.at(2, 4) == 1.0);  // -1 lands in the unknown column
  CHECK(occ.at(2, 1) == 0.0);

  CHECK_THROWS_AS(build_log_occurrence({{4}}, 4), data_error);
  CHECK_THROWS_AS(build_log_occurrence({{-2}}, 4), data_error);
}

TEST_CASE("occurrence matches a set-membership oracle on random ids") {
  std::mt19937_64 rng(make_rng(11, seed_stream::test_misc));
  std::uniform_int_distribution<int> id_d(-1, 9);
  std::uniform_int_distribution<int> cnt_d(0, 6);
  std::vector<std::vector<int>> ids(50);
  for (auto& block : ids) {
    const int c = cnt_d(rng);
    for (int k = 0; k < c; ++k) block.push_back(id_d(rng));
  }
  auto occ = build_log_occurrence(ids, 10);
  for (size_t t = 0; t < 50; ++t)
    for (size_t j = 0; j < 11; ++j) {
      const int want = static_cast<int>(j) == 10
                           ? std::count(ids[t].begin(), ids[t].end(), -1) > 0
                           : std::count(ids[t].begin(), ids[t].end(), (int)j) > 0;
      CHECK(occ.at(t, j) == (want ? 1.0 : 0.0));
    }
}

TEST_CASE("window counts and any-block labels") {
  window_spec spec{3, 1};
  auto w1 = make_windows(5, {}, spec);
  REQUIRE(w1.size() == 3);
  CHECK(w1[0].start == 0);
  CHECK(w1[2].end == 5);

  auto w2 = make_windows(5, {0, 0, 1, 0, 0}, spec);
  REQUIRE(w2.size() == 3);
  CHECK(w2[0].label == 1);
  CHECK(w2[1].label == 1);
  CHECK(w2[2].label == 1);

  auto w3 = make_windows(100, {}, {50, 1});
  CHECK(w3.size() == 51);

  auto w4 = make_windows(10, {}, {4, 3});  // starts 0, 3, 6
  REQUIRE(w4.size() == 3);
  CHECK(w4[2].start == 6);

  CHECK_THROWS_AS(make_windows(4, {}, {5, 1}), data_error);
}

TEST_CASE("labels outside a window never leak in") {
  std::vector<int> labels(20, 0);
  labels[10] = 1;
  auto ws = make_windows(20, labels, {5, 1});
  for (const auto& wr : ws) {
    const bool covers = wr.start <= 10 && 10 < wr.end;
    CHECK(wr.label == (covers ? 1 : 0));
  }
}

TEST_CASE("split partition drops exactly the straddling windows") {
  multimodal_series s;
  s.metrics = real_tensor::zeros({100, 2});
  s.log_occurrence = real_tensor::zeros({100, 3});
  auto sets = split_windows(s, {10, 1});
  // bounds 70/90: train starts 0..60, test 70..80, val 90
  CHECK(sets.train.size() == 61);
  CHECK(sets.test.size() == 11);
  CHECK(sets.val.size() == 1);
  CHECK(sets.train.back().end == 70);
  CHECK(sets.test.front().start == 70);
  CHECK(sets.val.front().start == 90);
  const size_t total = make_windows(100, {}, {10, 1}).size();
  CHECK(total - sets.train.size() - sets.test.size() - sets.val.size() == 18);
}

TEST_CASE("series artifact round-trips bit-exactly") {
  std::mt19937_64 rng(make_rng(13, seed_stream::test_misc));
  std::normal_distribution<double> nd(0.0, 1.0);
  std::bernoulli_distribution bd(0.2);

  multimodal_series s;
  s.metrics = real_tensor({20, 4});
  for (auto& v : s.metrics.data) v = nd(rng);
  s.log_occurrence = real_tensor::zeros({20, 6});
  for (auto& v : s.log_occurrence.data) v = bd(rng) ? 1.0 : 0.0;
  s.labels.assign(20, 0);
  s.labels[7] = 1;
  s.labels[8] = 1;
  s.blocks = {1700000000, 10, 20};
  s.norm.mean = {0.25, -1.5, 0.0, 3.75e-3};
  s.norm.stddev = {1.0, 2.0, 1e-8, 0.5};

  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "ffad_prep_roundtrip";
  fs::remove_all(dir);
  save_series(dir.string(), s);
  auto r = load_series(dir.string());

  CHECK(r.metrics.shape == s.metrics.shape);
  for (size_t i = 0; i < s.metrics.numel(); ++i)
    CHECK(r.metrics.data[i] == s.metrics.data[i]);  // exact, not approx
  CHECK(r.log_occurrence.data == s.log_occurrence.data);
  CHECK(r.labels == s.labels);
  CHECK(r.blocks.t0 == s.blocks.t0);
  CHECK(r.blocks.dt == s.blocks.dt);
  CHECK(r.blocks.count == 20);
  CHECK(r.norm.mean == s.norm.mean);
  CHECK(r.norm.stddev == s.norm.stddev);
  fs::remove_all(dir);
}

TEST_CASE("unlabeled series round-trips without a labels file") {
  multimodal_series s;
  s.metrics = make_real({2, 1}, {0.5, -0.5});
  s.log_occurrence = make_real({2, 2}, {1, 0, 0, 1});
  s.blocks = {0, 1, 2};
  s.norm.mean = {0.0};
  s.norm.stddev = {1.0};

  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "ffad_prep_unlabeled";
  fs::remove_all(dir);
  save_series(dir.string(), s);
  CHECK_FALSE(fs::exists(dir / "labels.csv"));
  auto r = load_series(dir.string());
  CHECK(r.labels.empty());
  CHECK(r.metrics.data == s.metrics.data);
  fs::remove_all(dir);
}

}  // TEST_SUITE
