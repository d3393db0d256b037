/*
 * Copyright 2026 The Corticast Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "corticast/attribution.hpp"
#include "corticast/error.hpp"
#include "corticast/random.hpp"
#include "corticast/synthetic.hpp"

using namespace corticast;
using namespace corticast::attribution;
using autonet::Activation;
using autonet::MlpModel;

namespace {

MlpModel random_model(std::uint64_t seed, Activation act, double weight_scale = 1.0,
                      std::size_t out_units = 1) {
  autonet::ModelConfig cfg;
  cfg.activation = act;
  cfg.out_units = out_units;
  MlpModel m = autonet::init_model(cfg, seed);
  Rng rng(derive_seed(seed, 99));
  for (auto& b : m.blocks()) {
    for (double& w : b.weight.values()) w *= weight_scale;
    for (double& x : b.bias) x = rng.normal(0.0, 0.2);
    for (std::size_t c = 0; c < b.bn_gamma.size(); ++c) {
      b.bn_gamma[c] = rng.uniform(0.5, 1.5);
      b.bn_beta[c] = rng.normal(0.0, 0.2);
      b.bn_running_mean[c] = rng.normal(0.0, 0.2);
      b.bn_running_var[c] = rng.uniform(0.3, 1.5);
    }
  }
  for (double& x : m.head().bias1) x = rng.normal(0.0, 0.2);
  m.mode = autonet::Mode::eval;
  return m;
}

Matrix random_input(std::uint64_t seed, std::size_t v, std::size_t c = 4, double scale = 1.0) {
  Rng rng(seed);
  Matrix m(v, c);
  for (double& x : m.values()) x = rng.normal(0.0, scale);
  return m;
}

double sum(const Matrix& m) {
  double s = 0;
  for (double x : m.values()) s += x;
  return s;
}

// Effective weights of an affine model from forward passes alone.
Matrix effective_weights(const MlpModel& m, std::size_t v) {
  const auto f = model_output(m);
  const Matrix zero(v, 4);
  const double f0 = f(zero);
  Matrix w(v, 4);
  for (std::size_t i = 0; i < w.size(); ++i) {
    Matrix e = zero;
    e.values()[i] = 1.0;
    w.values()[i] = f(e) - f0;
  }
  return w;
}

}  // namespace

TEST_CASE("deeplift on a linear model is the closed form") {
  const auto m = random_model(1, Activation::identity);
  const std::size_t V = 6;
  const Matrix x = random_input(2, V);
  std::vector<Matrix> bgs{random_input(3, V), random_input(4, V), random_input(5, V)};
  const auto w = effective_weights(m, V);
  const auto a = deeplift_rescale(m, x, bgs);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double mean_r = 0;
    for (const auto& r : bgs) mean_r += r.values()[i] / 3.0;
    CHECK(std::abs(a.values.values()[i] - w.values()[i] * (x.values()[i] - mean_r)) <= 1e-10);
  }
}

TEST_CASE("attribution methods agree with the Shapley oracle on linear models") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = random_model(seed, Activation::identity);
    const Matrix x = random_input(10 + seed, 4), b = random_input(20 + seed, 4);
    const auto shap = exact_shapley(m, x, b);
    const auto dl = deeplift_rescale(m, x, std::vector<Matrix>{b});
    const auto ig = integrated_gradients(m, x, b, 32);
    const auto w = effective_weights(m, 4);
    for (std::size_t i = 0; i < 16; ++i) {
      const double phi = shap.values.values()[i];
      CHECK(std::abs(phi - w.values()[i] * (x.values()[i] - b.values()[i])) <= 1e-10);
      CHECK(std::abs(dl.values.values()[i] - phi) <= 1e-8);
      CHECK(std::abs(ig.values.values()[i] - phi) <= 1e-8);
    }
  }
}

TEST_CASE("deeplift completeness per background") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_model(seed, Activation::tanh, 2.0);
    const Matrix x = random_input(30 + seed, 12, 4, 1.5);
    std::vector<Matrix> bgs;
    for (int r = 0; r < 6; ++r) bgs.push_back(random_input(100 * seed + r, 12, 4, 1.5));
    const auto a = deeplift_rescale(m, x, bgs);
    CHECK(a.completeness_residual <= 1e-6);
    const auto f = model_output(m);
    double mean_ref = 0;
    for (const auto& r : bgs) mean_ref += f(r) / 6.0;
    CHECK(std::abs(sum(a.values) - (f(x) - mean_ref)) <= 1e-6);
    CHECK(a.output == doctest::Approx(f(x)).epsilon(1e-12));
  }
}

TEST_CASE("deeplift handles inputs equal to the reference") {
  const auto m = random_model(3, Activation::tanh);
  const Matrix x = random_input(1, 12);
  const auto a = deeplift_rescale(m, x, std::vector<Matrix>{x});
  for (double v : a.values.values()) CHECK(v == 0.0);
  CHECK(a.completeness_residual == 0.0);

  // Nearly equal cells take the analytic-derivative branch.
  Matrix close = x;
  close(0, 0) += 1e-9;
  const auto b = deeplift_rescale(m, x, std::vector<Matrix>{close});
  CHECK(b.completeness_residual <= 1e-12);
}

TEST_CASE("integrated gradients completeness converges quadratically") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = random_model(seed, Activation::tanh, 2.5);
    const Matrix x = random_input(40 + seed, 8, 4, 2.0), b = random_input(50 + seed, 8, 4, 2.0);
    const auto coarse = integrated_gradients(m, x, b, 64);
    const auto fine = integrated_gradients(m, x, b, 256);
    CAPTURE(coarse.completeness_residual);
    CAPTURE(fine.completeness_residual);
    CHECK(fine.completeness_residual <= 1e-3);
    if (coarse.completeness_residual > 1e-10) {
      CHECK(coarse.completeness_residual / fine.completeness_residual > 8.0);
    }
  }
}

TEST_CASE("integrated gradients on linear models is exact for any step count") {
  const auto m = random_model(6, Activation::identity);
  const Matrix x = random_input(1, 5), b = random_input(2, 5);
  const auto one = integrated_gradients(m, x, b, 1);
  const auto seven = integrated_gradients(m, x, b, 7);
  const auto w = effective_weights(m, 5);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(one.values.values()[i] - w.values()[i] * (x.values()[i] - b.values()[i])) <= 1e-10);
    CHECK(std::abs(one.values.values()[i] - seven.values.values()[i]) <= 1e-12);
  }
}

TEST_CASE("integrated gradients is linear in the model") {
  const auto f = random_model(7, Activation::tanh, 2.0);
  const auto g = random_model(8, Activation::tanh, 2.0);
  const auto gf = model_gradient(f), gg = model_gradient(g);
  const GradientFn sum_fn = [&](const VertexTensor& p) {
    Matrix a = gf(p);
    const Matrix b = gg(p);
    for (std::size_t i = 0; i < a.size(); ++i) a.values()[i] += b.values()[i];
    return a;
  };
  const Matrix x = random_input(3, 12), b = random_input(4, 12);
  const auto both = integrated_gradients(sum_fn, x, b, 64);
  const auto af = integrated_gradients(gf, x, b, 64);
  const auto ag = integrated_gradients(gg, x, b, 64);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(both.values()[i] - (af.values()[i] + ag.values()[i])) <= 1e-9);
  }
}

TEST_CASE("integrated gradients at the baseline is zero") {
  const auto m = random_model(2, Activation::tanh);
  const Matrix x = random_input(5, 12);
  const auto a = integrated_gradients(m, x, x, 16);
  for (double v : a.values.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(integrated_gradients(m, x, x, 0), std::invalid_argument);
}

TEST_CASE("a channel cut off by zero first-layer weights gets no attribution") {
  auto m = random_model(11, Activation::tanh, 2.0);
  const std::size_t dead = 2;
  for (double& w : m.blocks()[0].weight.row(dead)) w = 0.0;
  const Matrix x = random_input(6, 4), b = random_input(7, 4);
  const auto dl = deeplift_rescale(m, x, std::vector<Matrix>{b});
  const auto ig = integrated_gradients(m, x, b, 64);
  const auto sh = exact_shapley(m, x, b);
  for (std::size_t v = 0; v < 4; ++v) {
    CHECK(std::abs(dl.values(v, dead)) <= 1e-10);
    CHECK(std::abs(ig.values(v, dead)) <= 1e-10);
    CHECK(std::abs(sh.values(v, dead)) <= 1e-10);
  }
}

TEST_CASE("Shapley oracle axioms on a nonlinear model") {
  const auto m = random_model(12, Activation::tanh, 2.0);
  Matrix x = random_input(8, 4), b = random_input(9, 4);
  // Vertices 1 and 3 identical in input and baseline: interchangeable players.
  for (std::size_t c = 0; c < 4; ++c) {
    x(3, c) = x(1, c);
    b(3, c) = b(1, c);
  }
  const auto s = exact_shapley(m, x, b);
  const auto f = model_output(m);
  CHECK(std::abs(sum(s.values) - (f(x) - f(b))) <= 1e-9);
  CHECK(s.completeness_residual <= 1e-9);
  for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(s.values(1, c) - s.values(3, c)) <= 1e-10);
}

TEST_CASE("Shapley values of closed-form games") {
  const auto square = shapley_values(5, [](std::uint32_t mask) {
    const double k = std::popcount(mask);
    return k * k;
  });
  for (double p : square) CHECK(std::abs(p - 5.0) <= 1e-12);

  const std::vector<double> a{0.5, -1.0, 2.0, 0.25};
  const auto game = shapley_values(4, [&](std::uint32_t mask) {
    double v = 0;
    for (int i = 0; i < 4; ++i) {
      if (mask >> i & 1U) v += a[i];
    }
    if ((mask & 3U) == 3U) v += 3.0;
    return v;
  });
  CHECK(std::abs(game[0] - 2.0) <= 1e-12);
  CHECK(std::abs(game[1] - 0.5) <= 1e-12);
  CHECK(std::abs(game[2] - 2.0) <= 1e-12);
  CHECK(std::abs(game[3] - 0.25) <= 1e-12);
  CHECK_THROWS_AS(shapley_values(17, [](std::uint32_t) { return 0.0; }), std::invalid_argument);
}

TEST_CASE("exact Shapley refuses large inputs") {
  const auto m = random_model(1, Activation::tanh);
  const Matrix x = random_input(1, 5);
  CHECK_THROWS_AS(exact_shapley(m, x, x), std::invalid_argument);
}

TEST_CASE("attributions need an eval-mode model") {
  auto m = random_model(1, Activation::tanh);
  m.mode = autonet::Mode::train;
  const Matrix x = random_input(1, 4);
  CHECK_THROWS_AS(deeplift_rescale(m, x, std::vector<Matrix>{x}), ContractViolation);
  CHECK_THROWS_AS(integrated_gradients(m, x, x), ContractViolation);
  CHECK_THROWS_AS(exact_shapley(m, x, x), ContractViolation);
}

TEST_CASE("output scale and index") {
  const auto m = random_model(4, Activation::tanh, 1.0, 3);
  const Matrix x = random_input(1, 6), r = random_input(2, 6);
  const auto unit = deeplift_rescale(m, x, std::vector<Matrix>{r}, {1, 1.0});
  const auto weeks = deeplift_rescale(m, x, std::vector<Matrix>{r}, {1, 2.5});
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(weeks.values.values()[i] - 2.5 * unit.values.values()[i]) <= 1e-12);
  }
  CHECK(unit.output_index == 1);
  CHECK_THROWS_AS(deeplift_rescale(m, x, std::vector<Matrix>{r}, {3, 1.0}), std::invalid_argument);
}

TEST_CASE("background selection") {
  std::vector<std::size_t> train(50);
  std::iota(train.begin(), train.end(), 100);
  const auto a = choose_backgrounds(train, 32, 1);
  CHECK(a.size() == 32);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  for (auto i : a) CHECK((i >= 100 && i < 150));
  CHECK(a == choose_backgrounds(train, 32, 1));
  CHECK(a != choose_backgrounds(train, 32, 2));
  CHECK(choose_backgrounds(train, 80, 1).size() == 50);
}

TEST_CASE("group maps split preterm and term subjects") {
  auto data = dataio::generate_synthetic(6, 0, 3).dataset;
  const std::vector<double> ga{30.0, 36.9, 37.0, 38.0, 40.0, 41.0};
  for (std::size_t i = 0; i < 6; ++i) data.subjects[i].meta.ga_birth = ga[i];
  for (auto& s : data.subjects) {
    for (double& x : s.features.channel(2)) x = 2.75;
  }
  std::vector<std::size_t> subjects{0, 1, 2, 3, 4, 5};
  std::vector<Attribution> attrs(6);
  for (std::size_t i = 0; i < 6; ++i) attrs[i].values = random_input(60 + i, 12);
  const auto& names = data.channel_names;
  const auto maps = group_maps(data, subjects, attrs, names);
  REQUIRE(maps.preterm.has_value());
  REQUIRE(maps.term.has_value());
  CHECK(maps.preterm->n_subjects == 2);
  CHECK(maps.term->n_subjects == 3);

  const auto& pre = *maps.preterm;
  for (std::size_t v = 0; v < 12; ++v) {
    CHECK(pre.features.at(2, v) == doctest::Approx(2.75).epsilon(1e-15));
    const double f0 = (data.subjects[0].features.at(0, v) + data.subjects[1].features.at(0, v)) / 2;
    CHECK(pre.features.at(0, v) == doctest::Approx(f0).epsilon(1e-14));
    const std::size_t signed_idx = pre.attributions.find_channel("signed_attr_" + names[1]);
    const std::size_t abs_idx = pre.attributions.find_channel("attr_" + names[1]);
    const double a0 = attrs[0].values(v, 1), a1 = attrs[1].values(v, 1);
    CHECK(pre.attributions.at(signed_idx, v) == doctest::Approx((a0 + a1) / 2).epsilon(1e-14));
    CHECK(pre.attributions.at(abs_idx, v) == doctest::Approx((std::abs(a0) + std::abs(a1)) / 2).epsilon(1e-14));
  }
  const auto importance = channel_importance(pre, names);
  REQUIRE(importance.size() == 4);
  double mean_abs = 0;
  for (std::size_t v = 0; v < 12; ++v) {
    mean_abs += (std::abs(attrs[0].values(v, 3)) + std::abs(attrs[1].values(v, 3))) / 2 / 12;
  }
  CHECK(importance[3] == doctest::Approx(mean_abs).epsilon(1e-12));

  std::vector<std::size_t> only_term{3, 4};
  std::vector<Attribution> two(attrs.begin() + 3, attrs.begin() + 5);
  const auto one_group = group_maps(data, only_term, two, names);
  CHECK_FALSE(one_group.preterm.has_value());
  CHECK(one_group.term.has_value());
}

TEST_CASE("evaluation subjects are validation plus test") {
  const auto data = dataio::generate_synthetic(40, 0, 3).dataset;
  const auto s = evaluation_subjects(data);
  CHECK(s.size() == data.indices_of(dataio::Split::val).size() + data.indices_of(dataio::Split::test).size());
  for (auto i : s) CHECK(data.subjects[i].meta.split != dataio::Split::train);
}

TEST_CASE("attribution fields and sidecars") {
  Attribution a;
  a.values = random_input(1, 12);
  a.background_n = 32;
  a.completeness_residual = 1e-15;
  const auto field = to_field(a, dataio::kCorticalChannels);
  CHECK(field.channel_names()[3] == "attr_t1w_t2w_ratio");
  CHECK(field.at(1, 5) == a.values(5, 1));
  const auto j = sidecar_json(a);
  CHECK(j["method"] == "deeplift_rescale");
  CHECK(j["background_n"] == 32);
  CHECK(j.contains("completeness_residual"));
  CHECK(j["output_index"] == 0);
}
