#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bsqr/coeff_model.hpp"
#include "bsqr/error.hpp"
#include "bsqr/likelihood.hpp"

namespace bsqr {

struct McmcConfig {
  std::size_t iterations = 10000;
  std::size_t burn_in = 1000;
  double r_initial = 1.05;
  double acc_low = 0.15;
  double acc_high = 0.45;
  std::uint64_t seed = 1;
  std::size_t thin = 1;

  void validate() const;
  std::size_t retained() const { return (iterations - burn_in) / thin; }
};

/// Halves r - 1 when the cumulative acceptance falls below `low`, doubles it
/// above `high`, and leaves it alone otherwise. r - 1 is not halved below 1e-9.
double adapt_r(double r, double cumulative_acceptance, double low = 0.15, double high = 0.45);

/// Multiplies each increment by an independent U(1/r, r) draw and renormalises.
/// Draws happen in increment order, one per increment, zero increments included.
SimplexBlock propose_block(std::span<const double> block, double r, Rng& rng);

/// Transition density of propose_block from `from` to `to`, with respect to
/// Lebesgue measure on all but the last increment. Zero increments of `from`
/// are excluded; they must be zero in `to` as well.
double log_proposal_density(std::span<const double> to, std::span<const double> from, double r);
double proposal_density(std::span<const double> to, std::span<const double> from, double r);

/// One Metropolis-Hastings update of block `index` under a uniform prior.
/// RNG order: the increment draws of the proposal, then one uniform for the decision.
bool mh_block_update(BlockObjective& objective, std::size_t index, double r, Rng& rng);

struct ChainOutput {
  std::vector<CoefficientTensor> samples;     // post burn-in, thinned
  std::vector<double> acceptance_trace;       // cumulative acceptance ratio after each iteration
  std::vector<double> r_trace;                // r in force during each iteration
  std::vector<std::uint32_t> accepted_per_iteration;
  std::vector<double> loglik_trace;           // objective after each iteration
  std::size_t blocks_per_iteration = 0;
};

/// Complete sampler state between iterations; enough to resume bit-identically.
struct ChainCheckpoint {
  McmcConfig config;
  std::size_t next_iteration = 0;
  double r = 1.05;
  std::uint64_t accepted = 0;
  std::uint64_t decisions = 0;
  std::shared_ptr<CoefficientTensor> state;
  std::string rng_state;
  ChainOutput output;
};

void write_checkpoint(std::ostream& out, const ChainCheckpoint& checkpoint);
ChainCheckpoint read_checkpoint(std::istream& in);

struct ChainHooks {
  std::size_t checkpoint_every = 0;  // iterations; 0 disables
  std::function<void(const ChainCheckpoint&)> on_checkpoint;
};

/// Block Metropolis-Hastings: each iteration sweeps all blocks in
/// lexicographic order. r adapts after every burn-in iteration and is frozen
/// afterwards.
ChainOutput run_chain(BlockObjective& objective, const CoefficientTensor& init, const McmcConfig& config,
                      const ChainHooks& hooks = {});

ChainOutput run_chain(std::shared_ptr<const AnyDataset> data, const CoefficientTensor& init,
                      const McmcConfig& config, const ChainHooks& hooks = {});

/// Continues a checkpointed chain to the configured number of iterations.
ChainOutput resume_chain(BlockObjective& objective, ChainCheckpoint checkpoint, const ChainHooks& hooks = {});

}  // namespace bsqr
