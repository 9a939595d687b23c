#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "bsqr/sampler.hpp"

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

double radical_inverse(std::size_t i, int base) {
  double f = 1.0;
  double r = 0.0;
  for (; i > 0; i /= base) {
    f /= base;
    r += f * static_cast<double>(i % base);
  }
  return r;
}

// Quasi-Monte Carlo integral of the density over the simplex. The largest
// increment of `from` is the dependent coordinate; the others are Halton
// points in a box covering the support (ratios to `from` lie in [1/r^2, r^2]).
double integrate_density(const std::vector<double>& from, double r, std::size_t points) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17};
  const std::size_t n = from.size();
  const auto dep = static_cast<std::size_t>(std::max_element(from.begin(), from.end()) - from.begin());
  std::vector<double> lo(n, 0.0), hi(n, 0.0);
  double volume = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == dep) continue;
    lo[j] = from[j] / (r * r);
    hi[j] = std::min(1.0, from[j] * r * r);
    volume *= hi[j] - lo[j];
  }
  std::vector<double> to(n);
  double sum = 0.0;
  for (std::size_t i = 1; i <= points; ++i) {
    double partial = 0.0;
    std::size_t axis = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == dep) continue;
      partial += (to[j] = lo[j] + (hi[j] - lo[j]) * radical_inverse(i, primes[axis++]));
    }
    if (partial >= 1.0) continue;
    to[dep] = 1.0 - partial;
    sum += proposal_density(to, from, r);
  }
  return volume * sum / static_cast<double>(points);
}

Dataset small_data(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  Dataset d{{1, {}}, {}};
  for (int i = 0; i < 40; ++i) {
    const double x = unit(rng);
    d.x.values.push_back(x);
    d.y.push_back(std::clamp(0.3 + 0.4 * x + 0.1 * (unit(rng) - 0.5), 0.0, 1.0));
  }
  return d;
}

void require_same(const ChainOutput& a, const ChainOutput& b) {
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) REQUIRE(a.samples[i].flatten() == b.samples[i].flatten());
  REQUIRE(a.acceptance_trace == b.acceptance_trace);
  REQUIRE(a.r_trace == b.r_trace);
  REQUIRE(a.accepted_per_iteration == b.accepted_per_iteration);
  REQUIRE(a.loglik_trace == b.loglik_trace);
}

}  // namespace

TEST_CASE("adaptation rule") {
  CHECK_THAT(adapt_r(1.05, 0.10), WithinAbs(1.025, 1e-15));
  CHECK_THAT(adapt_r(1.05, 0.50), WithinAbs(1.10, 1e-15));
  CHECK_THAT(adapt_r(1.05, 0.30), WithinAbs(1.05, 1e-15));
  CHECK_THAT(adapt_r(1.05, 0.15), WithinAbs(1.05, 1e-15));
  CHECK_THAT(adapt_r(1.05, 0.45), WithinAbs(1.05, 1e-15));
  double r = 1.05;
  for (int i = 0; i < 200; ++i) r = adapt_r(r, 0.0);
  CHECK(r > 1.0);
  CHECK_THAT(r - 1.0, WithinAbs(1e-9, 1e-12));
  CHECK_THROWS_AS(adapt_r(1.0, 0.3), DomainError);
}

TEST_CASE("proposal density at a documented point") {
  const std::vector<double> half = {0.5, 0.5};
  CHECK_THAT(proposal_density(half, half, 2.0), WithinRel(10.0 / 3.0, 1e-12));
  CHECK_THAT(log_proposal_density(half, half, 2.0), WithinAbs(std::log(10.0 / 3.0), 1e-12));
}

TEST_CASE("unreachable proposals have zero density") {
  const std::vector<double> from = {0.5, 0.5};
  const std::vector<double> far = {0.9, 0.1};  // ratio spread 9 > r^2 = 4
  CHECK(proposal_density(far, from, 2.0) == 0.0);
  CHECK(log_proposal_density(far, from, 2.0) == kLogZero);
  const std::vector<double> point = {1.0, 0.0, 0.0};
  const std::vector<double> leak = {0.9, 0.1, 0.0};
  CHECK(proposal_density(leak, point, 2.0) == 0.0);
}

TEST_CASE("proposals stay on the simplex and zeros absorb") {
  std::mt19937_64 seed_rng(1);
  Rng rng(2);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto g = dirichlet(2 + rep % 6, seed_rng);
    const auto p = propose_block(g, 1.5, rng);
    CHECK_THAT(std::accumulate(p.increments().begin(), p.increments().end(), 0.0), WithinAbs(1.0, 1e-12));
  }
  const std::vector<double> point = {1, 0, 0, 0};
  const auto p = propose_block(point, 2.0, rng);
  CHECK(std::vector<double>(p.increments().begin(), p.increments().end()) == point);

  const auto g = dirichlet(5, seed_rng);
  const auto near = propose_block(g, 1.0 + 1e-12, rng);
  for (std::size_t j = 0; j < g.size(); ++j) CHECK_THAT(near[j], WithinAbs(g[j], 1e-11));
}

TEST_CASE("proposal density integrates to one") {
  std::mt19937_64 rng(3);
  for (std::size_t n : {2, 3, 6}) {
    const auto from = dirichlet(n, rng);
    for (double r : {1.05, 1.5, 2.0}) {
      const double integral = integrate_density(from, r, 1000000);
      INFO("n = " << n << ", r = " << r);
      CHECK_THAT(integral, WithinAbs(1.0, 0.02));
    }
  }
}

TEST_CASE("proposal histogram matches the density (chi-square, 50 bins)") {
  const std::vector<double> from = {0.5, 0.5};
  const double r = 2.0;
  const double lo = 1.0 / (1.0 + r * r);
  const double hi = 1.0 - lo;
  const int bins = 50;
  const std::size_t draws = 1000000;

  Rng rng(4);
  std::vector<double> count(bins, 0.0);
  for (std::size_t i = 0; i < draws; ++i) {
    const double g = propose_block(from, r, rng)[0];
    const int b = std::min(bins - 1, static_cast<int>((g - lo) / (hi - lo) * bins));
    count[static_cast<std::size_t>(b)] += 1.0;
  }

  // Expected counts by composite Simpson on each bin.
  double chi2 = 0.0;
  const int sub = 200;
  for (int b = 0; b < bins; ++b) {
    const double a = lo + (hi - lo) * b / bins;
    const double w = (hi - lo) / bins / sub;
    double s = 0.0;
    for (int k = 0; k <= sub; ++k) {
      const double g = a + k * w;
      const std::vector<double> to = {g, 1.0 - g};
      const double c = (k == 0 || k == sub) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      s += c * proposal_density(to, from, r);
    }
    const double expected = draws * s * w / 3.0;
    chi2 += (count[b] - expected) * (count[b] - expected) / expected;
  }
  // 95% point of chi-square with 49 degrees of freedom.
  CHECK(chi2 < 66.34);
}

TEST_CASE("forward and reverse acceptance ratios are reciprocal") {
  std::mt19937_64 rng(8);
  Rng prng(9);
  int checked = 0;
  for (int rep = 0; rep < 2000; ++rep) {
    const auto a = dirichlet(2 + rep % 5, rng);
    const auto b = propose_block(a, 1.8, prng);
    const std::vector<double> bv(b.increments().begin(), b.increments().end());
    const double ab = proposal_density(bv, a, 1.8);
    const double ba = proposal_density(a, bv, 1.8);
    REQUIRE(std::isfinite(ab));
    if (!(ab > 0.0 && ba > 0.0)) continue;
    ++checked;
    CHECK_THAT((ba / ab) * (ab / ba), WithinAbs(1.0, 1e-10));
    CHECK_THAT(log_proposal_density(a, bv, 1.8) - log_proposal_density(bv, a, 1.8),
               WithinAbs(std::log(ba / ab), 1e-9));
  }
  CHECK(checked > 1000);
}

TEST_CASE("empirical kernel density at the documented point") {
  const std::vector<double> from = {0.5, 0.5};
  Rng rng(5);
  const std::size_t draws = 1000000;
  const double half_width = 0.005;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    if (std::abs(propose_block(from, 2.0, rng)[0] - 0.5) < half_width) ++hits;
  }
  const double estimate = static_cast<double>(hits) / draws / (2 * half_width);
  CHECK_THAT(estimate, WithinRel(10.0 / 3.0, 0.03));
}

TEST_CASE("impossible proposals are rejected") {
  ModelSpec spec;
  const CoefficientTensor init(spec);
  const auto reference = init.flatten();
  FunctionObjective objective(
      [&](const CoefficientTensor& t) { return t.flatten() == reference ? 0.0 : kLogZero; }, init);
  Rng rng(6);
  for (int i = 0; i < 200; ++i) CHECK_FALSE(mh_block_update(objective, i % init.block_count(), 1.5, rng));
  CHECK(objective.state().flatten() == reference);
}

TEST_CASE("single-iteration bookkeeping") {
  ModelSpec spec;
  spec.d = 2;
  McmcConfig cfg;
  cfg.iterations = 1;
  cfg.burn_in = 0;
  FunctionObjective objective([](const CoefficientTensor&) { return 0.0; }, CoefficientTensor(spec));
  const auto out = run_chain(objective, CoefficientTensor(spec), cfg);
  CHECK(out.blocks_per_iteration == 25);
  REQUIRE(out.accepted_per_iteration.size() == 1);
  CHECK(out.accepted_per_iteration[0] <= 25);
  CHECK(out.samples.size() == 1);
  CHECK(out.r_trace == std::vector<double>{1.05});
}

TEST_CASE("sample count follows burn-in and thinning") {
  ModelSpec spec;
  McmcConfig cfg;
  cfg.iterations = 103;
  cfg.burn_in = 10;
  cfg.thin = 4;
  FunctionObjective objective([](const CoefficientTensor&) { return 0.0; }, CoefficientTensor(spec));
  const auto out = run_chain(objective, CoefficientTensor(spec), cfg);
  CHECK(out.samples.size() == cfg.retained());
  CHECK(out.samples.size() == 23);
  CHECK(out.acceptance_trace.size() == 103);
  // r moves only during burn-in.
  for (std::size_t i = cfg.burn_in + 1; i < out.r_trace.size(); ++i) CHECK(out.r_trace[i] == out.r_trace[cfg.burn_in]);
}

TEST_CASE("uniform prior is recovered under a constant likelihood") {
  ModelSpec spec;  // d = 1, p1 = p2 = 3, m = 2: five blocks of four increments
  McmcConfig cfg;
  cfg.iterations = 50000;
  cfg.burn_in = 1000;
  cfg.seed = 2024;
  FunctionObjective objective([](const CoefficientTensor&) { return 0.0; }, CoefficientTensor(spec));
  const auto out = run_chain(objective, CoefficientTensor(spec), cfg);
  const std::size_t n = out.samples.size();
  const std::size_t batches = 50;
  const std::size_t per_batch = n / batches;
  const std::size_t width = spec.increments_per_block();
  for (std::size_t b = 0; b < out.samples.front().block_count(); ++b) {
    for (std::size_t j = 0; j < width; ++j) {
      std::vector<double> means(batches, 0.0);
      for (std::size_t k = 0; k < batches * per_batch; ++k) means[k / per_batch] += out.samples[k].block(b)[j];
      double mean = 0.0;
      for (double& m : means) mean += (m /= per_batch);
      mean /= batches;
      double var = 0.0;
      for (double m : means) var += (m - mean) * (m - mean);
      const double se = std::sqrt(var / (batches - 1) / batches);
      INFO("block " << b << ", increment " << j << ": mean " << mean << ", se " << se);
      CHECK(std::abs(mean - 0.25) < 3.0 * se);
    }
  }
}

TEST_CASE("chains are reproducible and resume bit-identically") {
  std::mt19937_64 rng(7);
  const auto data = std::make_shared<const AnyDataset>(small_data(rng));
  ModelSpec spec;
  spec.p1 = 4;
  McmcConfig cfg;
  cfg.iterations = 300;
  cfg.burn_in = 50;
  cfg.thin = 3;
  cfg.seed = 99;
  const CoefficientTensor init(spec);

  const auto a = run_chain(data, init, cfg);
  const auto b = run_chain(data, init, cfg);
  require_same(a, b);

  std::string saved;
  ChainHooks hooks;
  hooks.checkpoint_every = 70;
  hooks.on_checkpoint = [&](const ChainCheckpoint& cp) {
    if (cp.next_iteration == 140) {
      std::ostringstream os;
      write_checkpoint(os, cp);
      saved = os.str();
    }
  };
  const auto hooked = run_chain(data, init, cfg, hooks);
  require_same(a, hooked);
  REQUIRE_FALSE(saved.empty());

  std::istringstream is(saved);
  ChainCheckpoint cp = read_checkpoint(is);
  CHECK(cp.next_iteration == 140);
  CachedLoglik fresh(data, init);
  const auto resumed = resume_chain(fresh, cp);
  require_same(a, resumed);

  cfg.seed = 100;
  const auto other = run_chain(data, init, cfg);
  CHECK(other.loglik_trace != a.loglik_trace);
}

TEST_CASE("configuration checks") {
  McmcConfig cfg;
  cfg.burn_in = cfg.iterations;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = McmcConfig{};
  cfg.thin = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = McmcConfig{};
  cfg.acc_low = 0.5;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  std::istringstream garbage("not a checkpoint\n");
  CHECK_THROWS_AS(read_checkpoint(garbage), FormatError);
}
