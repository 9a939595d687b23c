#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "bsqr/error.hpp"
#include "bsqr/likelihood.hpp"

using namespace bsqr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> dirichlet(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> g(n);
  double s = 0.0;
  for (double& v : g) s += (v = e(rng));
  for (double& v : g) v /= s;
  return g;
}

CoefficientTensor random_tensor(const ModelSpec& spec, std::mt19937_64& rng) {
  CoefficientTensor t(spec);
  for (std::size_t b = 0; b < t.block_count(); ++b) t.set_block(b, dirichlet(t.increments_per_block(), rng));
  return t;
}

ModelSpec make_spec(Method method, int d = 1, int p = 4) {
  ModelSpec s;
  s.method = method;
  s.d = d;
  s.p1 = s.p2 = p;
  return s;
}

Dataset uniform_sample(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.02, 0.98);
  Dataset data{{d, {}}, {}};
  for (std::size_t i = 0; i < n * d; ++i) data.x.values.push_back(unit(rng));
  for (std::size_t i = 0; i < n; ++i) data.y.push_back(unit(rng));
  return data;
}

GridDataset random_grid(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GridDataset g{{1, {}}, {}, {0.0, 0.2, 0.5, 0.9, 1.0}, {0.15, 0.45, 0.8}};
  for (std::size_t i = 0; i < n; ++i) {
    g.x.values.push_back(unit(rng));
    g.bin.push_back(1 + static_cast<int>(rng() % 4));
  }
  return g;
}

WeightedGridDataset random_weighted(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  WeightedGridDataset w{{1, {}}, {}, {}, {0.0, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0}};
  for (std::size_t i = 0; i < n; ++i) {
    w.x.values.push_back(unit(rng));
    w.weight.push_back(1.0 + 10.0 * unit(rng));
    std::vector<double> cuts(5);
    for (double& c : cuts) c = 0.05 + 0.9 * unit(rng);
    std::sort(cuts.begin(), cuts.end());
    w.cuts.push_back(cuts);
  }
  return w;
}

}  // namespace

TEST_CASE("identity tensor has zero complete-data log-likelihood") {
  std::mt19937_64 rng(1);
  const auto data = uniform_sample(50, 1, rng);
  for (Method m : {Method::npsqr, Method::npdfsqr}) {
    const auto t = CoefficientTensor::identity(make_spec(m));
    CHECK_THAT(loglik(t, data), WithinAbs(0.0, 1e-10));
  }
}

TEST_CASE("NPSQR density is the reciprocal quantile slope") {
  ModelSpec spec = make_spec(Method::npsqr, 1, 3);
  spec.m1 = 1;
  spec.p1 = 2;
  // Every block (1, 0): Q(tau) = 2 tau on [0, 1/2], so Q' = 2 at y = 0.5.
  CoefficientTensor t(spec);
  const std::vector<double> steep = {1.0, 0.0};
  for (std::size_t b = 0; b < t.block_count(); ++b) t.set_block(b, steep);
  const Dataset one{{1, {0.3}}, {0.5}};
  CHECK_THAT(loglik_npsqr_complete(t, one), WithinAbs(-std::log(2.0), 1e-12));
}

TEST_CASE("NPSQR density matches a numeric derivative of the inverted curve") {
  std::mt19937_64 rng(2);
  const auto spec = make_spec(Method::npsqr, 1, 5);
  const BasisConfig inner(spec.m1, spec.p1);
  const double h = 1e-5;
  for (int rep = 0; rep < 5; ++rep) {
    const auto t = random_tensor(spec, rng);
    const auto data = uniform_sample(20, 1, rng);
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto c = t.coeff_at(data.x.row(i));
      const double fd = (conditional_cdf(Method::npsqr, inner, c, data.y[i] + h) -
                         conditional_cdf(Method::npsqr, inner, c, data.y[i] - h)) /
                        (2 * h);
      const double exact = complete_log_density(Method::npsqr, inner, c, data.y[i]);
      CHECK_THAT(exact, WithinAbs(std::log(fd), 1e-4));
      total += exact;
    }
    CHECK_THAT(loglik(t, data), WithinAbs(total, 1e-10));
  }
}

TEST_CASE("NPDFSQR density matches a finite difference of the CDF") {
  std::mt19937_64 rng(3);
  const auto spec = make_spec(Method::npdfsqr, 1, 6);
  const BasisConfig inner(spec.m1, spec.p1);
  const double h = 1e-6;
  for (int rep = 0; rep < 5; ++rep) {
    const auto t = random_tensor(spec, rng);
    const auto data = uniform_sample(20, 1, rng);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto c = t.coeff_at(data.x.row(i));
      const double y = data.y[i];
      const double fd = (spline_value(inner, c, y + h) - spline_value(inner, c, y - h)) / (2 * h);
      CHECK_THAT(std::exp(complete_log_density(Method::npdfsqr, inner, c, y)), WithinAbs(fd, 1e-6));
    }
  }
}

TEST_CASE("NPDFSQR density vanishes at a flat boundary") {
  const BasisConfig inner(2, 3);
  const std::vector<double> flat_start = {0.0, 0.0, 0.3, 0.7, 1.0};
  CHECK(complete_log_density(Method::npdfsqr, inner, flat_start, 0.0) == kLogZero);
}

TEST_CASE("grid likelihood with a uniform model") {
  for (Method m : {Method::npsqr, Method::npdfsqr}) {
    const auto t = CoefficientTensor::identity(make_spec(m));
    const GridDataset g{{1, {0.4}}, {2}, {0.0, 0.25, 0.5, 0.75, 1.0}, {0.25, 0.5, 0.75}};
    CHECK_THAT(loglik(t, g), WithinAbs(std::log(0.25), 1e-12));

    std::mt19937_64 rng(4);
    const auto r = random_tensor(make_spec(m), rng);
    const GridDataset single{{1, {0.1, 0.7}}, {1, 1}, {0.0, 1.0}, {}};
    CHECK_THAT(loglik(r, single), WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("bin masses telescope to one") {
  std::mt19937_64 rng(5);
  const std::vector<double> cuts = {0.05, 0.1, 0.3, 0.31, 0.6, 0.9, 0.99};
  for (Method m : {Method::npsqr, Method::npdfsqr}) {
    const auto spec = make_spec(m, 1, 7);
    const BasisConfig inner(spec.m1, spec.p1);
    for (int rep = 0; rep < 50; ++rep) {
      const auto t = random_tensor(spec, rng);
      const double x[] = {static_cast<double>(rep) / 49.0};
      const auto mass = bin_masses(m, inner, t.coeff_at(x), cuts);
      REQUIRE(mass.size() == cuts.size() + 1);
      double s = 0.0;
      for (double v : mass) {
        CHECK(v >= 0.0);
        s += v;
      }
      CHECK_THAT(s, WithinAbs(1.0, 1e-10));
    }
  }
}

TEST_CASE("weighted grid closed form, linearity and consistency") {
  const std::vector<double> rho = {0.0, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0};
  const std::vector<double> interior(rho.begin() + 1, rho.end() - 1);
  double expected = 0.0;
  for (std::size_t l = 1; l < rho.size(); ++l) expected += (rho[l] - rho[l - 1]) * std::log(rho[l] - rho[l - 1]);

  for (Method m : {Method::npsqr, Method::npdfsqr}) {
    const auto t = CoefficientTensor::identity(make_spec(m));
    const WeightedGridDataset w{{1, {0.5}}, {1.0}, {interior}, rho};
    CHECK_THAT(loglik(t, w), WithinAbs(expected, 1e-12));

    std::mt19937_64 rng(6);
    const auto r = random_tensor(make_spec(m), rng);
    auto data = random_weighted(30, rng);
    const double base = loglik(r, data);
    for (double& v : data.weight) v *= 2.0;
    CHECK_THAT(loglik(r, data), WithinRel(2.0 * base, 1e-14));

    // Unit weights with exponents set to the observed bin shares reproduce the grid likelihood.
    const std::vector<double> cuts = {0.2, 0.45, 0.7};
    GridDataset g{{1, {}}, {}, {0.0, 0.25, 0.5, 0.75, 1.0}, cuts};
    const int counts[] = {3, 7, 1, 9};
    for (int l = 0; l < 4; ++l) {
      for (int k = 0; k < counts[l]; ++k) {
        g.x.values.push_back(0.3);
        g.bin.push_back(l + 1);
      }
    }
    const WeightedGridDataset pooled{{1, {0.3}}, {20.0}, {cuts}, {0.0, 0.15, 0.5, 0.55, 1.0}};
    CHECK_THAT(loglik(r, pooled), WithinAbs(loglik(r, g), 1e-10));
  }
}

TEST_CASE("log-likelihood is permutation invariant and additive") {
  std::mt19937_64 rng(7);
  for (Method m : {Method::npsqr, Method::npdfsqr}) {
    const auto t = random_tensor(make_spec(m, 2, 3), rng);
    auto data = uniform_sample(40, 2, rng);
    const double full = loglik(t, data);

    Dataset first{{2, {}}, {}};
    Dataset second{{2, {}}, {}};
    for (std::size_t i = 0; i < data.size(); ++i) {
      Dataset& part = i < 15 ? first : second;
      const auto row = data.x.row(i);
      part.x.values.insert(part.x.values.end(), row.begin(), row.end());
      part.y.push_back(data.y[i]);
    }
    CHECK_THAT(loglik(t, first) + loglik(t, second), WithinAbs(full, 1e-10));

    Dataset reversed{{2, {}}, {}};
    for (std::size_t i = data.size(); i-- > 0;) {
      const auto row = data.x.row(i);
      reversed.x.values.insert(reversed.x.values.end(), row.begin(), row.end());
      reversed.y.push_back(data.y[i]);
    }
    CHECK_THAT(loglik(t, reversed), WithinAbs(full, 1e-10));
  }
}

TEST_CASE("cached trials agree with direct evaluation") {
  std::mt19937_64 rng(8);
  std::vector<std::shared_ptr<const AnyDataset>> sets = {
      std::make_shared<const AnyDataset>(uniform_sample(60, 1, rng)),
      std::make_shared<const AnyDataset>(random_grid(60, rng)),
      std::make_shared<const AnyDataset>(random_weighted(25, rng)),
  };
  for (Method m : {Method::npsqr, Method::npdfsqr}) {
    const auto spec = make_spec(m, 1, 5);
    for (const auto& data : sets) {
      CachedLoglik cache(data, random_tensor(spec, rng));
      CHECK_THAT(cache.value(), WithinAbs(loglik(cache.state(), *data), 1e-9));
      for (int step = 0; step < 40; ++step) {
        const std::size_t b = rng() % cache.state().block_count();
        const auto g = dirichlet(spec.increments_per_block(), rng);
        CoefficientTensor probe = cache.state();
        probe.set_block(b, g);
        CHECK_THAT(cache.trial(b, g), WithinAbs(loglik(probe, *data), 1e-9));
        if (step % 2 == 0) {
          cache.accept(b, g);
          CHECK_THAT(cache.value(), WithinAbs(loglik(probe, *data), 1e-9));
        }
      }
    }
  }
}

TEST_CASE("likelihood argument checks") {
  const auto npsqr = CoefficientTensor::identity(make_spec(Method::npsqr));
  const auto npdfsqr = CoefficientTensor::identity(make_spec(Method::npdfsqr));
  const Dataset data{{1, {0.5}}, {0.5}};
  CHECK_THROWS_AS(loglik_npsqr_complete(npdfsqr, data), ContractError);
  CHECK_THROWS_AS(loglik_npdfsqr_complete(npsqr, data), ContractError);
  const Dataset outside{{1, {0.5}}, {1.5}};
  CHECK_THROWS_AS(loglik(npsqr, outside), DomainError);
  const Dataset wrong_dim{{2, {0.5, 0.5}}, {0.5}};
  CHECK_THROWS_AS(loglik(npsqr, wrong_dim), ShapeError);
  const GridDataset bad_bin{{1, {0.5}}, {5}, {0.0, 0.5, 1.0}, {0.5}};
  CHECK_THROWS_AS(loglik(npsqr, bad_bin), DomainError);
  WeightedGridDataset w{{1, {0.5}}, {0.0}, {{0.5}}, {0.0, 0.5, 1.0}};
  CHECK_THROWS_AS(loglik(npsqr, w), DomainError);
}
