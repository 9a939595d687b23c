#include "bsqr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "text.hpp"

namespace bsqr {

void McmcConfig::validate() const {
  if (iterations == 0) throw DomainError("MCMC needs at least one iteration");
  if (burn_in >= iterations) throw DomainError("burn-in must be shorter than the chain");
  if (thin == 0) throw DomainError("thinning interval must be positive");
  if (!(r_initial > 1.0)) throw DomainError("initial r must exceed 1");
  if (!(acc_low > 0.0 && acc_low < acc_high && acc_high < 1.0)) {
    throw DomainError("acceptance band must satisfy 0 < low < high < 1");
  }
}

namespace {
constexpr double kMinStep = 1e-9;
}

double adapt_r(double r, double cumulative_acceptance, double low, double high) {
  if (!(r > 1.0)) throw DomainError("r must exceed 1");
  // Halving stops at kMinStep so r never rounds to exactly 1.
  if (cumulative_acceptance < low) return 1.0 + std::max((r - 1.0) / 2.0, std::min(r - 1.0, kMinStep));
  if (cumulative_acceptance > high) return 1.0 + 2.0 * (r - 1.0);
  return r;
}

SimplexBlock propose_block(std::span<const double> block, double r, Rng& rng) {
  if (!(r > 1.0)) throw DomainError("r must exceed 1");
  const double lo = 1.0 / r;
  const double width = r - lo;
  std::vector<double> v(block.size());
  double total = 0.0;
  for (std::size_t j = 0; j < block.size(); ++j) {
    v[j] = block[j] * (lo + width * uniform01(rng));
    total += v[j];
  }
  if (!(total > 0.0)) throw ContractError("cannot propose from an all-zero block");
  for (double& a : v) a /= total;
  return SimplexBlock(std::move(v));
}

double log_proposal_density(std::span<const double> to, std::span<const double> from, double r) {
  if (to.size() != from.size()) throw ShapeError("proposal density: block lengths differ");
  if (!(r > 1.0)) throw DomainError("r must exceed 1");
  const double log_r = std::log(r);
  std::size_t n = 0;
  double sum_log_from = 0.0;
  // The normalising total S of the raw draws ranges over [s_lo, s_hi].
  double log_s_hi = std::numeric_limits<double>::infinity();
  double log_s_lo = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < from.size(); ++j) {
    if (from[j] == 0.0) {
      if (to[j] != 0.0) return kLogZero;
      continue;
    }
    if (!(to[j] > 0.0)) return kLogZero;
    ++n;
    const double log_ratio = std::log(from[j]) - std::log(to[j]);
    sum_log_from += std::log(from[j]);
    log_s_hi = std::min(log_s_hi, log_r + log_ratio);
    log_s_lo = std::max(log_s_lo, log_ratio - log_r);
  }
  if (n == 0) throw ContractError("proposal density of an all-zero block");
  if (!(log_s_hi > log_s_lo)) return kLogZero;
  const double dn = static_cast<double>(n);
  // log(D1 - D2) with D1 = s_hi^n, D2 = s_lo^n.
  const double log_diff = dn * log_s_hi + std::log1p(-std::exp(dn * (log_s_lo - log_s_hi)));
  return dn * (log_r - std::log(r * r - 1.0)) - sum_log_from + log_diff - std::log(dn);
}

double proposal_density(std::span<const double> to, std::span<const double> from, double r) {
  return std::exp(log_proposal_density(to, from, r));
}

bool mh_block_update(BlockObjective& objective, std::size_t index, double r, Rng& rng) {
  const std::vector<double> current(objective.state().block(index).begin(),
                                    objective.state().block(index).end());
  const SimplexBlock proposal = propose_block(current, r, rng);
  const double u = uniform01(rng);

  const double log_forward = log_proposal_density(proposal.increments(), current, r);
  if (log_forward == kLogZero) return false;
  const double log_reverse = log_proposal_density(current, proposal.increments(), r);
  const double proposed = objective.trial(index, proposal.increments());
  if (proposed == kLogZero) return false;

  const double log_ratio = proposed - objective.value() + log_reverse - log_forward;
  if (std::log(u) < log_ratio) {
    objective.accept(index, proposal.increments());
    return true;
  }
  return false;
}

namespace {

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_string(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw FormatError("corrupt RNG state in checkpoint");
  return rng;
}

ChainOutput run_from(BlockObjective& objective, ChainCheckpoint cp, const ChainHooks& hooks) {
  const McmcConfig& config = cp.config;
  config.validate();
  objective.reset(*cp.state);
  Rng rng = rng_from_string(cp.rng_state);
  ChainOutput& out = cp.output;
  const std::size_t blocks = objective.state().block_count();
  out.blocks_per_iteration = blocks;

  for (std::size_t it = cp.next_iteration; it < config.iterations; ++it) {
    out.r_trace.push_back(cp.r);
    std::uint32_t accepted = 0;
    for (std::size_t k = 0; k < blocks; ++k) {
      if (mh_block_update(objective, k, cp.r, rng)) ++accepted;
    }
    cp.accepted += accepted;
    cp.decisions += blocks;
    const double cumulative = static_cast<double>(cp.accepted) / static_cast<double>(cp.decisions);
    out.accepted_per_iteration.push_back(accepted);
    out.acceptance_trace.push_back(cumulative);
    out.loglik_trace.push_back(objective.value());
    if (it < config.burn_in) cp.r = adapt_r(cp.r, cumulative, config.acc_low, config.acc_high);
    if (it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0) {
      out.samples.push_back(objective.state());
    }

    if (hooks.checkpoint_every > 0 && hooks.on_checkpoint && (it + 1) % hooks.checkpoint_every == 0 &&
        it + 1 < config.iterations) {
      cp.next_iteration = it + 1;
      *cp.state = objective.state();
      cp.rng_state = rng_to_string(rng);
      hooks.on_checkpoint(cp);
    }
  }
  return std::move(cp.output);
}

}  // namespace

ChainOutput run_chain(BlockObjective& objective, const CoefficientTensor& init, const McmcConfig& config,
                      const ChainHooks& hooks) {
  config.validate();
  ChainCheckpoint cp;
  cp.config = config;
  cp.r = config.r_initial;
  cp.state = std::make_shared<CoefficientTensor>(init);
  cp.rng_state = rng_to_string(Rng(config.seed));
  return run_from(objective, std::move(cp), hooks);
}

ChainOutput run_chain(std::shared_ptr<const AnyDataset> data, const CoefficientTensor& init,
                      const McmcConfig& config, const ChainHooks& hooks) {
  CachedLoglik objective(std::move(data), init);
  return run_chain(objective, init, config, hooks);
}

ChainOutput resume_chain(BlockObjective& objective, ChainCheckpoint checkpoint, const ChainHooks& hooks) {
  if (!checkpoint.state) throw ContractError("checkpoint has no chain state");
  return run_from(objective, std::move(checkpoint), hooks);
}

namespace {

template <class T>
void write_list(std::ostream& out, const char* key, const std::vector<T>& values) {
  out << key << ' ' << values.size();
  for (const T& v : values) {
    if constexpr (std::is_floating_point_v<T>) {
      out << ' ' << text::format(v);
    } else {
      out << ' ' << v;
    }
  }
  out << '\n';
}

std::istringstream keyed_line(std::istream& in, const std::string& key) {
  std::string line;
  while (std::getline(in, line)) {
    if (!text::trim(line).empty()) break;
  }
  std::istringstream is(line);
  std::string got;
  is >> got;
  if (got != key) throw FormatError("checkpoint: expected '" + key + "', found '" + got + "'");
  return is;
}

template <class T>
std::vector<T> read_list(std::istream& in, const std::string& key) {
  std::istringstream is = keyed_line(in, key);
  std::size_t n = 0;
  is >> n;
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string tok;
    if (!(is >> tok)) throw FormatError("checkpoint: truncated list '" + key + "'");
    if constexpr (std::is_floating_point_v<T>) {
      out[i] = text::to_double(tok);
    } else {
      out[i] = static_cast<T>(text::to_int(tok));
    }
  }
  return out;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ChainCheckpoint& cp) {
  const McmcConfig& c = cp.config;
  out << "bsqr-checkpoint 1\n";
  out << "config " << c.iterations << ' ' << c.burn_in << ' ' << text::format(c.r_initial) << ' '
      << text::format(c.acc_low) << ' ' << text::format(c.acc_high) << ' ' << c.seed << ' ' << c.thin << '\n';
  out << "iteration " << cp.next_iteration << '\n';
  out << "r " << text::format(cp.r) << '\n';
  out << "counts " << cp.accepted << ' ' << cp.decisions << '\n';
  out << "rng " << cp.rng_state << '\n';
  out << "state\n";
  write_tensor(out, *cp.state);
  write_list(out, "r_trace", cp.output.r_trace);
  write_list(out, "acceptance_trace", cp.output.acceptance_trace);
  write_list(out, "accepted_per_iteration", cp.output.accepted_per_iteration);
  write_list(out, "loglik_trace", cp.output.loglik_trace);
  out << "samples " << cp.output.samples.size() << '\n';
  for (const auto& s : cp.output.samples) write_tensor(out, s);
}

ChainCheckpoint read_checkpoint(std::istream& in) {
  ChainCheckpoint cp;
  {
    std::istringstream is = keyed_line(in, "bsqr-checkpoint");
    int version = 0;
    is >> version;
    if (version != 1) throw FormatError("unsupported checkpoint version");
  }
  {
    std::istringstream is = keyed_line(in, "config");
    std::string r0, lo, hi;
    McmcConfig& c = cp.config;
    is >> c.iterations >> c.burn_in >> r0 >> lo >> hi >> c.seed >> c.thin;
    if (!is) throw FormatError("checkpoint: malformed config line");
    c.r_initial = text::to_double(r0);
    c.acc_low = text::to_double(lo);
    c.acc_high = text::to_double(hi);
    c.validate();
  }
  keyed_line(in, "iteration") >> cp.next_iteration;
  {
    std::istringstream is = keyed_line(in, "r");
    std::string r;
    is >> r;
    cp.r = text::to_double(r);
  }
  keyed_line(in, "counts") >> cp.accepted >> cp.decisions;
  {
    std::istringstream is = keyed_line(in, "rng");
    std::getline(is, cp.rng_state);
    cp.rng_state = std::string(text::trim(cp.rng_state));
    rng_from_string(cp.rng_state);
  }
  keyed_line(in, "state");
  cp.state = std::make_shared<CoefficientTensor>(read_tensor(in));
  cp.output.r_trace = read_list<double>(in, "r_trace");
  cp.output.acceptance_trace = read_list<double>(in, "acceptance_trace");
  cp.output.accepted_per_iteration = read_list<std::uint32_t>(in, "accepted_per_iteration");
  cp.output.loglik_trace = read_list<double>(in, "loglik_trace");
  std::size_t n = 0;
  keyed_line(in, "samples") >> n;
  cp.output.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) cp.output.samples.push_back(read_tensor(in, cp.state->layout_ptr()));
  cp.output.blocks_per_iteration = cp.state->block_count();
  return cp;
}

}  // namespace bsqr
