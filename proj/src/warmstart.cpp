#include "bsqr/warmstart.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bsqr {

void OptimizerTuning::validate() const {
  if (!(s_initial > 0.0 && phi > 0.0 && lambda >= 0.0 && tol_fun_1 > 0.0 && tol_fun_2 > 0.0)) {
    throw DomainError("optimizer tuning values must be positive");
  }
  if (!(rho1 > 1.0 && rho2 > 1.0)) throw DomainError("step decay rates must exceed 1");
  if (max_iter == 0 || max_runs == 0) throw DomainError("optimizer iteration limits must be positive");
  if (!(floor >= 0.0)) throw DomainError("increment floor must be non-negative");
}

std::vector<double> floor_increments(std::span<const double> increments, double floor) {
  const auto n = static_cast<double>(increments.size());
  if (floor * n >= 1.0) throw DomainError("increment floor too large for the block size");
  std::vector<double> out(increments.begin(), increments.end());
  double excess = -1.0;
  double slack = 0.0;
  for (double& g : out) {
    g = std::max(g, floor);
    excess += g;
    slack += g - floor;
  }
  // Take the excess back from the mass above the floor, proportionally.
  if (excess > 0.0 && slack > 0.0) {
    for (double& g : out) g -= excess * (g - floor) / slack;
  }
  // Rounding residue goes to the largest entry so floored entries stay exact.
  double total = 0.0;
  for (double g : out) total += g;
  *std::max_element(out.begin(), out.end()) += 1.0 - total;
  return out;
}

namespace {

void normalise(std::vector<double>& v) {
  double total = 0.0;
  for (double a : v) total += a;
  for (double& a : v) a /= total;
}

CoefficientTensor random_tensor(const CoefficientTensor& like, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> flat(like.flatten().size());
  const std::size_t n = like.increments_per_block();
  for (std::size_t b = 0; b < like.block_count(); ++b) {
    std::vector<double> block(n);
    for (double& g : block) g = expo(rng);
    normalise(block);
    std::copy(block.begin(), block.end(), flat.begin() + static_cast<std::ptrdiff_t>(b * n));
  }
  return CoefficientTensor(like.layout_ptr(), std::move(flat));
}

double sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

CoefficientTensor optimize(BlockObjective& objective, const OptimizerTuning& tuning, Rng& rng,
                           OptimizerReport* report) {
  tuning.validate();
  OptimizerReport local;
  OptimizerReport& rep = report ? *report : local;
  rep = OptimizerReport{};

  const CoefficientTensor centroid(objective.state().layout_ptr(),
                                   std::vector<double>(objective.state().flatten().size(),
                                                       1.0 / static_cast<double>(objective.state().increments_per_block())));
  objective.reset(centroid);
  for (int attempt = 0; attempt < 5 && objective.value() == kLogZero; ++attempt) {
    objective.reset(random_tensor(centroid, rng));
  }
  if (objective.value() == kLogZero) {
    throw ContractError("optimizer: objective is -inf at the centroid and at 5 random starting points");
  }

  const std::size_t blocks = objective.state().block_count();
  const std::size_t n = objective.state().increments_per_block();
  double value = objective.value();
  rep.start_value = value;
  std::vector<double> previous = objective.state().flatten();
  double previous_value = value;

  std::vector<double> candidate(n);
  std::vector<double> best(n);
  for (std::size_t run = 0; run < tuning.max_runs; ++run) {
    const double decay = run == 0 ? tuning.rho1 : tuning.rho2;
    std::vector<double> step(blocks, tuning.s_initial);

    for (std::size_t iter = 0; iter < tuning.max_iter; ++iter) {
      bool active = false;
      for (std::size_t b = 0; b < blocks; ++b) {
        if (step[b] < tuning.phi) continue;
        active = true;
        const std::vector<double> current(objective.state().block(b).begin(), objective.state().block(b).end());
        double best_value = value;
        bool improved = false;
        for (std::size_t give = 0; give < n; ++give) {
          if (current[give] <= 0.0) continue;
          const double amount = std::min(step[b], current[give]);
          for (std::size_t take = 0; take < n; ++take) {
            if (take == give) continue;
            candidate = current;
            candidate[give] = amount == current[give] ? 0.0 : current[give] - amount;
            candidate[take] += amount;
            normalise(candidate);
            const double v = objective.trial(b, candidate);
            ++rep.evaluations;
            if (v > best_value) {
              best_value = v;
              best = candidate;
              improved = true;
            }
          }
        }
        if (improved) {
          objective.accept(b, best);
          value = objective.value();
          ++rep.accepted_moves;
        } else {
          step[b] /= decay;
        }
      }
      if (!active) break;
    }

    if (tuning.lambda > 0.0) {
      const CoefficientTensor before = objective.state();
      std::vector<double> flat = before.flatten();
      for (std::size_t b = 0; b < blocks; ++b) {
        std::vector<double> block(flat.begin() + static_cast<std::ptrdiff_t>(b * n),
                                  flat.begin() + static_cast<std::ptrdiff_t>((b + 1) * n));
        for (double& g : block) {
          if (g < tuning.lambda) g = 0.0;
        }
        normalise(block);
        std::copy(block.begin(), block.end(), flat.begin() + static_cast<std::ptrdiff_t>(b * n));
      }
      if (flat != before.flatten()) {
        objective.reset(CoefficientTensor(before.layout_ptr(), std::move(flat)));
        ++rep.evaluations;
        if (objective.value() >= value) {
          value = objective.value();
        } else {
          objective.reset(before);
        }
      }
    }

    ++rep.runs;
    rep.run_values.push_back(value);
    const std::vector<double>& now = objective.state().flatten();
    const bool converged =
        value - previous_value < tuning.tol_fun_1 && sup_distance(now, previous) < tuning.tol_fun_2;
    previous = now;
    previous_value = value;
    if (converged) break;
  }

  std::vector<double> flat = objective.state().flatten();
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::vector<double> floored =
        floor_increments(std::span<const double>(flat).subspan(b * n, n), tuning.floor);
    std::copy(floored.begin(), floored.end(), flat.begin() + static_cast<std::ptrdiff_t>(b * n));
  }
  CoefficientTensor result(objective.state().layout_ptr(), std::move(flat));
  objective.reset(result);
  rep.final_value = objective.value();
  return result;
}

}  // namespace bsqr
