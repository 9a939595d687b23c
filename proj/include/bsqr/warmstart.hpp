#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bsqr/coeff_model.hpp"
#include "bsqr/error.hpp"
#include "bsqr/likelihood.hpp"

namespace bsqr {

/// Tuning for the greedy multi-simplex coordinate search.
struct OptimizerTuning {
  double s_initial = 1.0;   // initial step size of every run
  double rho1 = 2.0;        // step decay in the first run
  double rho2 = 1.05;       // step decay in later runs
  double phi = 1e-2;        // a block is done once its step falls below this
  double lambda = 1e-3;     // sparsity threshold applied after each run
  double tol_fun_1 = 1e-2;  // run-to-run objective improvement
  double tol_fun_2 = 1e-2;  // run-to-run sup-norm change of the solution
  std::size_t max_iter = 5000;
  std::size_t max_runs = 200;
  double floor = 1e-8;      // minimum increment of the returned tensor

  void validate() const;
};

struct OptimizerReport {
  double start_value = 0.0;
  double final_value = 0.0;  // objective at the returned (floored) tensor
  std::size_t runs = 0;
  std::size_t accepted_moves = 0;
  std::size_t evaluations = 0;
  std::vector<double> run_values;  // objective at the end of each run
};

/// Maximises a black-box objective over the product of simplex blocks.
///
/// Each run restarts every block at step s_initial. A sweep visits blocks in
/// lexicographic order; for a block it tries every ordered (give, take) pair,
/// moving min(step, give) of mass, and takes the best strictly improving move.
/// Without an improving move the block's step is divided by the run's decay
/// rate. The run ends when every step is below phi. Increments below lambda
/// are then zeroed (kept only if that does not lower the objective). Runs
/// repeat until both tolerances hold between successive runs.
///
/// Starts from the simplex centroid. If the objective is -inf there, up to
/// five random starting points are tried before giving up.
CoefficientTensor optimize(BlockObjective& objective, const OptimizerTuning& tuning, Rng& rng,
                           OptimizerReport* report = nullptr);

/// Raises every increment to at least `floor` and renormalises.
std::vector<double> floor_increments(std::span<const double> increments, double floor);

}  // namespace bsqr
