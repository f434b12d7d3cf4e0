#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>
#include <unsupported/Eigen/SpecialFunctions>

#include "lmstyle/errors.h"
#include "lmstyle/gradcheck.h"
#include "lmstyle/gumbel.h"

using namespace lmstyle;

namespace {

Tensor row(std::vector<double> v) {
  const auto n = static_cast<int64_t>(v.size());
  return Tensor({1, n}, std::move(v));
}

Tensor relax(const Tensor& logits, double tau, const Tensor& noise) {
  Graph g;
  return g.value(gumbel_softmax(g, g.constant(logits), tau, noise));
}

int argmax_row(const Tensor& t, int64_t r) {
  int best = 0;
  for (int64_t j = 1; j < t.cols(); ++j)
    if (t.at(r, j) > t.at(r, best)) best = static_cast<int>(j);
  return best;
}

// Upper tail of the chi-square distribution.
double chi2_p_value(double statistic, int dof) {
  return Eigen::numext::igammac(0.5 * dof, 0.5 * statistic);
}

}  // namespace

TEST_SUITE("relaxed-sampling") {

TEST_CASE("equal logits without noise give the uniform vector") {
  for (double tau : {0.01, 0.5, 1.0, 3.0}) {
    const Tensor p = relax(row({0.7, 0.7, 0.7, 0.7}), tau, Tensor::matrix(1, 4));
    for (double v : p.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("zero-temperature limit is one-hot") {
  const Tensor p = relax(row({2.0, 0.0, 0.0}), 1e-6, Tensor::matrix(1, 3));
  CHECK(std::abs(p[0] - 1.0) < 1e-6);
  CHECK(std::abs(p[1]) < 1e-6);
  CHECK(std::abs(p[2]) < 1e-6);
}

TEST_CASE("matches direct evaluation of the formula") {
  const std::vector<double> pi{0.5, 0.3, 0.2}, noise{0.1, -0.2, 0.05};
  for (double tau : {1.0, 0.3}) {
    double denom = 0.0;
    std::vector<double> e(3);
    for (int i = 0; i < 3; ++i) denom += e[static_cast<size_t>(i)] = std::exp((std::log(pi[static_cast<size_t>(i)]) + noise[static_cast<size_t>(i)]) / tau);
    const Tensor p = relax(row({std::log(0.5), std::log(0.3), std::log(0.2)}), tau, row(noise));
    for (int i = 0; i < 3; ++i) CHECK(std::abs(p[i] - e[static_cast<size_t>(i)] / denom) < 1e-12);
  }
}

TEST_CASE("logits are normalized before the noise is added") {
  const Tensor noise = row({0.3, -0.1, 0.8});
  const Tensor a = relax(row({1.0, 2.0, 3.0}), 0.4, noise);
  const Tensor b = relax(row({11.0, 12.0, 13.0}), 0.4, noise);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
}

TEST_CASE("rejects non-positive temperature and mismatched noise") {
  Graph g;
  Var l = g.constant(row({0.0, 1.0}));
  CHECK_THROWS_AS(gumbel_softmax(g, l, 0.0, Tensor::matrix(1, 2)), ContractViolation);
  CHECK_THROWS_AS(gumbel_softmax(g, l, -1.0, Tensor::matrix(1, 2)), ContractViolation);
  CHECK_THROWS_AS(gumbel_softmax(g, l, 1.0, Tensor::matrix(1, 3)), ContractViolation);
}

TEST_CASE("outputs stay on the simplex at every temperature") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 4.0);
  for (double tau : {1e-3, 0.1, 1.0, 10.0}) {
    Tensor logits = Tensor::matrix(20, 9);
    for (double& v : logits.values()) v = normal(rng);
    const Tensor p = relax(logits, tau, sample_gumbel({20, 9}, 7));
    for (int64_t r = 0; r < 20; ++r) {
      double total = 0.0;
      for (int64_t j = 0; j < 9; ++j) {
        CHECK(p.at(r, j) >= 0.0);
        total += p.at(r, j);
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("Gumbel noise is seeded and finite") {
  const Tensor a = sample_gumbel({100, 7}, 42);
  const Tensor b = sample_gumbel({100, 7}, 42);
  const Tensor c = sample_gumbel({100, 7}, 43);
  CHECK(a.storage() == b.storage());
  CHECK(a.storage() != c.storage());
  CHECK(a.all_finite());
}

TEST_CASE("Gumbel noise mean is the Euler-Mascheroni constant") {
  const Tensor g = sample_gumbel({1000, 1000}, 2024);
  double total = 0.0;
  for (double v : g.values()) total += v;
  CHECK(std::abs(total / 1e6 - 0.5772156649) < 0.01);
}

TEST_CASE("argmax of relaxed samples follows softmax(logits)") {
  const int draws = 100000, k = 5;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  int rejected = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = Tensor::matrix(1, k);
    for (double& v : logits.values()) v = normal(rng);
    double denom = 0.0;
    for (double v : logits.values()) denom += std::exp(v);
    Tensor tiled = Tensor::matrix(draws, k);
    for (int r = 0; r < draws; ++r)
      for (int j = 0; j < k; ++j) tiled.at(r, j) = logits[j];
    const Tensor noise = sample_gumbel({draws, k}, derive_seed(5, static_cast<uint64_t>(trial)));
    for (double tau : {0.1, 1.0}) {
      const Tensor p = relax(tiled, tau, noise);
      std::vector<double> counts(k, 0.0);
      for (int r = 0; r < draws; ++r) counts[static_cast<size_t>(argmax_row(p, r))] += 1.0;
      double chi2 = 0.0;
      for (int j = 0; j < k; ++j) {
        const double expected = draws * std::exp(logits[j]) / denom;
        chi2 += (counts[static_cast<size_t>(j)] - expected) * (counts[static_cast<size_t>(j)] - expected) / expected;
      }
      const double pv = chi2_p_value(chi2, k - 1);
      CAPTURE(trial);
      CAPTURE(tau);
      CHECK(pv > 0.01);
      rejected += pv <= 0.01;
    }
  }
  CHECK(rejected == 0);
}

TEST_CASE("pathwise gradient matches finite differences") {
  std::mt19937_64 rng(3);
  ParameterSet ps;
  Parameter& l = ps.add("l", Tensor::matrix(4, 6));
  for (double& v : l.value.values()) v = 2.0 * uniform01(rng) - 1.0;
  const Tensor noise = sample_gumbel({4, 6}, 9);
  const Tensor w = sample_gumbel({4, 6}, 10);
  for (double tau : {0.5, 1.0, 2.0}) {
    GradCheckOptions opts;
    opts.max_coords_per_param = 24;
    GradCheckResult r = check_gradients(
        "gumbel", ps,
        [&](Graph& g) { return g.sum(g.mul(gumbel_softmax(g, g.param(l), tau, noise), g.constant(w))); }, opts);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("anneal schedule") {
  const AnnealSchedule s;
  CHECK(anneal(0, s) == 1.0);
  CHECK(anneal(3, s) == 0.125);
  CHECK(anneal(20, s) == 0.001);
  for (int e = 0; e < 40; ++e) CHECK(anneal(e + 1, s) <= anneal(e, s));
  CHECK_THROWS_AS(anneal(-1, s), ContractViolation);
  AnnealSchedule bad;
  bad.decay = 1.5;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = AnnealSchedule{};
  bad.floor = 2.0;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

}  // TEST_SUITE
