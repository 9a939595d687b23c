// Command-line driver: simulate | coarsen | fit | predict | pmse.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "bsqr/datakit.hpp"
#include "bsqr/inference.hpp"
#include "bsqr/io.hpp"

namespace {

using namespace bsqr;

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  return in;
}

// Writes through a temporary file so a crash never leaves a truncated result.
template <class Writer>
void write_file(const std::string& path, Writer&& writer) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    writer(out);
    if (!out.flush()) throw FormatError("write to '" + path + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> split_colon(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ':');) out.push_back(part);
  return out;
}

double to_number(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError(std::string("bad number '") + s + "' in " + what);
}

std::vector<double> parse_levels(const std::string& spec) {
  const auto parts = split_colon(spec);
  if (parts.size() == 3) {
    return level_sequence(to_number(parts[0], "--quantiles"), to_number(parts[1], "--quantiles"),
                          to_number(parts[2], "--quantiles"));
  }
  std::vector<double> out;
  std::stringstream ss(spec);
  for (std::string part; std::getline(ss, part, ',');) out.push_back(to_number(part, "--quantiles"));
  if (out.empty()) throw FormatError("--quantiles needs lo:hi:step or a comma list");
  return out;
}

std::pair<int, int> parse_range(const std::string& spec) {
  const auto parts = split_colon(spec);
  if (parts.size() != 2) throw FormatError("--select-aic needs lo:hi");
  return {static_cast<int>(to_number(parts[0], "--select-aic")), static_cast<int>(to_number(parts[1], "--select-aic"))};
}

struct LoadedData {
  DataKind kind = DataKind::complete;
  TransformSet transforms;
  std::shared_ptr<const AnyDataset> unit;
};

LoadedData load_data(DataKind kind, const std::string& data_path, const std::string& cuts_path,
                     const std::optional<TransformSet>& transforms) {
  LoadedData out;
  out.kind = kind;
  auto in = open_in(data_path);
  switch (kind) {
    case DataKind::complete: {
      RawData raw = read_data_csv(in);
      out.transforms = transforms ? *transforms : derive_transforms(raw);
      out.unit = std::make_shared<const AnyDataset>(to_unit(raw, out.transforms));
      break;
    }
    case DataKind::grid: {
      if (cuts_path.empty()) throw FormatError("--grid needs --cuts");
      if (!transforms) throw FormatError("--grid needs --transforms (written by `coarsen`)");
      auto cuts = open_in(cuts_path);
      RawGrid raw = read_grid_csv(in, cuts);
      out.transforms = *transforms;
      out.unit = std::make_shared<const AnyDataset>(to_unit(raw, out.transforms));
      break;
    }
    case DataKind::weighted_grid: {
      if (!transforms || transforms->rho.empty()) throw FormatError("--weighted-grid needs --transforms with a rho line");
      RawWeightedGrid raw = read_weighted_csv(in);
      out.transforms = *transforms;
      out.unit = std::make_shared<const AnyDataset>(to_unit(raw, out.transforms));
      break;
    }
  }
  return out;
}

std::optional<TransformSet> maybe_transforms(const std::string& path) {
  if (path.empty()) return std::nullopt;
  auto in = open_in(path);
  return read_transforms(in);
}

void write_curves(const std::string& path, const FitResult& fit, const TransformSet& transforms,
                  const std::vector<double>& taus, std::size_t points, PointEstimate estimate) {
  const auto rows = export_curves(fit, transforms, predictor_grid(transforms, points), taus, estimate);
  if (path == "-") {
    write_curves_csv(std::cout, rows);
  } else {
    write_file(path, [&](std::ostream& out) { write_curves_csv(out, rows); });
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Bayesian simultaneous quantile regression with monotone B-splines"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw a dataset from one of the simulation designs");
  std::string study = "1";
  std::size_t n = 100;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  std::string sim_transforms;
  std::string skew = "direct";
  sim->add_option("--study", study, "1, 2 or income")->check(CLI::IsMember({"1", "2", "income"}));
  sim->add_option("--n", n, "Sample size (rows for income)");
  sim->add_option("--seed", sim_seed, "Random seed");
  sim->add_option("--skew", skew, "Study-1 noise form")->check(CLI::IsMember({"direct", "centered"}));
  sim->add_option("--out", sim_out, "Output CSV")->required();
  sim->add_option("--transforms", sim_transforms, "Also write a transforms config");

  // coarsen
  auto* coarse = app.add_subcommand("coarsen", "Turn complete data into quantile-grid data");
  std::string co_data, co_out, co_cuts, co_transforms_in, co_transforms_out;
  int gap = 10;
  coarse->add_option("--data", co_data, "Complete-data CSV")->required();
  coarse->add_option("--gap", gap, "Percentile gap (5, 10, 20, ...)");
  coarse->add_option("--out", co_out, "Grid observations CSV")->required();
  coarse->add_option("--cuts", co_cuts, "Cuts CSV")->required();
  coarse->add_option("--transforms", co_transforms_in, "Transforms config to carry over (default: derived)");
  coarse->add_option("--transforms-out", co_transforms_out, "Write the transforms config for `fit --grid`");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Warm start, AIC selection and posterior sampling");
  std::string data_path, cuts_path, transforms_path, out_path, curves_path, checkpoint_path, resume_path;
  std::string method_text = "npsqr";
  int m1 = 2, m2 = 2;
  std::optional<int> p1, p2;
  std::string select_text;
  McmcConfig mcmc;
  bool grid = false, weighted = false, no_warm = false;
  std::string quantiles = "0.05:0.95:0.05";
  std::string point = "posterior-mean";
  std::size_t curve_points = 50;
  std::size_t checkpoint_every = 1000;
  fit_cmd->add_option("--data", data_path, "Data CSV (complete, grid observations or weighted grid)");
  fit_cmd->add_option("--cuts", cuts_path, "Cuts CSV for --grid");
  fit_cmd->add_option("--transforms", transforms_path, "Transforms config");
  fit_cmd->add_option("--method", method_text, "npsqr or npdfsqr")->check(CLI::IsMember({"npsqr", "npdfsqr"}));
  fit_cmd->add_option("--m1", m1, "Inner spline degree");
  fit_cmd->add_option("--m2", m2, "Outer spline degree");
  fit_cmd->add_option("--p1", p1, "Inner segments (fixed model)");
  fit_cmd->add_option("--p2", p2, "Outer segments (fixed model)");
  fit_cmd->add_option("--select-aic", select_text, "Search p1 = p2 over lo:hi by AIC");
  fit_cmd->add_option("--iters", mcmc.iterations, "MCMC iterations");
  fit_cmd->add_option("--burnin", mcmc.burn_in, "Burn-in iterations");
  fit_cmd->add_option("--thin", mcmc.thin, "Thinning interval");
  fit_cmd->add_option("--seed", mcmc.seed, "Random seed");
  fit_cmd->add_flag("--grid", grid, "Data are quantile-grid observations");
  fit_cmd->add_flag("--weighted-grid", weighted, "Data are a weighted grid table");
  fit_cmd->add_flag("--no-warmstart", no_warm, "Start the chain at the simplex centroid");
  fit_cmd->add_option("--quantiles", quantiles, "Levels for the curve export (lo:hi:step or list)");
  fit_cmd->add_option("--point-estimate", point, "posterior-mean or mle")
      ->check(CLI::IsMember({"posterior-mean", "mle"}));
  fit_cmd->add_option("--out", out_path, "Fit file");
  fit_cmd->add_option("--curves", curves_path, "Curve export CSV");
  fit_cmd->add_option("--curve-points", curve_points, "Predictor grid points per axis for the export");
  fit_cmd->add_option("--checkpoint", checkpoint_path, "Write resumable progress to this file");
  fit_cmd->add_option("--checkpoint-every", checkpoint_every, "Iterations between checkpoints");
  fit_cmd->add_option("--resume", resume_path, "Continue a checkpointed fit");

  // predict
  auto* pred = app.add_subcommand("predict", "Quantile curves from a fit file");
  std::string pred_fit, pred_out = "-", pred_x;
  std::string pred_quantiles = "0.05:0.95:0.05";
  std::string pred_point = "posterior-mean";
  std::size_t pred_points = 50;
  pred->add_option("--fit", pred_fit, "Fit file")->required();
  pred->add_option("--quantiles", pred_quantiles, "Levels (lo:hi:step or list)");
  pred->add_option("--x", pred_x, "Single predictor point, comma separated (original scale)");
  pred->add_option("--points", pred_points, "Grid points per predictor axis");
  pred->add_option("--point-estimate", pred_point, "posterior-mean or mle")
      ->check(CLI::IsMember({"posterior-mean", "mle"}));
  pred->add_option("--out", pred_out, "Curve CSV ('-' for stdout)");

  // pmse
  auto* pm = app.add_subcommand("pmse", "Prediction mean squared error of the median");
  std::string pm_test, pm_fit, pm_point = "posterior-mean";
  pm->add_option("--test", pm_test, "Complete-data test CSV (original scale)")->required();
  pm->add_option("--fit", pm_fit, "Fit file")->required();
  pm->add_option("--point-estimate", pm_point, "posterior-mean or mle")
      ->check(CLI::IsMember({"posterior-mean", "mle"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (sim->parsed()) {
    if (study == "income") {
      const std::vector<double> rho = {0.0, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0};
      const RawWeightedGrid table = simulate_income(n, rho, sim_seed);
      write_file(sim_out, [&](std::ostream& out) { write_weighted_csv(out, table); });
      if (!sim_transforms.empty()) {
        write_file(sim_transforms, [&](std::ostream& out) { write_transforms(out, income_transforms(table, rho)); });
      }
      return 0;
    }
    const SkewNormalForm form = skew == "centered" ? SkewNormalForm::centered : SkewNormalForm::direct;
    const RawData data = study == "1" ? simulate_study1(n, sim_seed, form) : simulate_study2(n, sim_seed);
    write_file(sim_out, [&](std::ostream& out) { write_data_csv(out, data); });
    if (!sim_transforms.empty()) {
      const TransformSet t = study == "1" ? study1_transforms(data) : study2_transforms(data);
      write_file(sim_transforms, [&](std::ostream& out) { write_transforms(out, t); });
    }
    return 0;
  }

  if (coarse->parsed()) {
    auto in = open_in(co_data);
    const RawData data = read_data_csv(in);
    const RawGrid g = coarsen_to_grid(data, gap);
    std::ostringstream obs, cuts;
    write_grid_csv(obs, cuts, g);
    write_file(co_out, [&](std::ostream& out) { out << obs.str(); });
    write_file(co_cuts, [&](std::ostream& out) { out << cuts.str(); });
    if (!co_transforms_out.empty()) {
      const TransformSet t = co_transforms_in.empty() ? derive_transforms(data) : *maybe_transforms(co_transforms_in);
      write_file(co_transforms_out, [&](std::ostream& out) { write_transforms(out, t); });
    }
    return 0;
  }

  if (fit_cmd->parsed()) {
    if (data_path.empty()) throw FormatError("fit needs --data");
    if (grid && weighted) throw FormatError("--grid and --weighted-grid are mutually exclusive");
    const PointEstimate estimate = parse_point_estimate(point);
    const std::vector<double> taus = parse_levels(quantiles);

    FitFile file;
    LoadedData loaded;
    ChainCheckpoint resume_from;
    if (!resume_path.empty()) {
      auto in = open_in(resume_path);
      file = read_fit(in);
      if (file.finished()) throw FormatError("'" + resume_path + "' holds a finished fit");
      loaded = load_data(file.data, data_path, cuts_path, file.transforms);
      resume_from = file.checkpoint;
    } else {
      const DataKind kind = grid ? DataKind::grid : weighted ? DataKind::weighted_grid : DataKind::complete;
      loaded = load_data(kind, data_path, cuts_path, maybe_transforms(transforms_path));
      file.data = kind;
      file.transforms = loaded.transforms;

      FitOptions options;
      options.mcmc = mcmc;
      options.warm_start = !no_warm;
      ModelSpec base;
      base.method = parse_method(method_text);
      base.d = static_cast<int>(loaded.transforms.dim());
      base.m1 = m1;
      base.m2 = m2;
      if ((p1 || p2) && !select_text.empty()) throw FormatError("use either --p1/--p2 or --select-aic");
      if (p1 || p2) {
        base.p1 = p1.value_or(*p2);
        base.p2 = p2.value_or(*p1);
        file.fit = prepare_fit(loaded.unit, base, options);
      } else {
        const auto [lo, hi] = select_text.empty() ? default_p_range(base.method) : parse_range(select_text);
        file.fit = prepare_selection(loaded.unit, base, lo, hi, options);
      }
      for (const auto& c : file.fit.candidates) {
        std::fprintf(stderr, "p1=%d p2=%d %s\n", c.spec.p1, c.spec.p2,
                     c.ok ? ("loglik " + std::to_string(c.loglik) + " aic " + std::to_string(c.aic)).c_str()
                          : ("failed: " + c.error).c_str());
      }
      std::fprintf(stderr, "selected p1=%d p2=%d\n", file.fit.spec.p1, file.fit.spec.p2);
      resume_from.config = file.fit.mcmc;
      resume_from.r = file.fit.mcmc.r_initial;
      resume_from.state = std::make_shared<CoefficientTensor>(file.fit.mle);
      std::ostringstream rng;
      rng << Rng(file.fit.mcmc.seed);
      resume_from.rng_state = rng.str();
    }

    ChainHooks hooks;
    const std::string progress_path = !checkpoint_path.empty() ? checkpoint_path : resume_path;
    if (!progress_path.empty()) {
      hooks.checkpoint_every = checkpoint_every;
      hooks.on_checkpoint = [&](const ChainCheckpoint& cp) {
        FitFile snapshot{file.data, file.transforms, file.fit, cp};
        write_file(progress_path, [&](std::ostream& out) { write_fit(out, snapshot); });
      };
    }
    CachedLoglik objective(loaded.unit, *resume_from.state);
    file.fit.chain = resume_chain(objective, resume_from, hooks);
    file.checkpoint = completed_checkpoint(file.fit);

    const auto& acc = file.fit.chain.acceptance_trace;
    std::fprintf(stderr, "chain done: acceptance %.3f, final r %.4g, %zu samples\n", acc.empty() ? 0.0 : acc.back(),
                 file.fit.chain.r_trace.empty() ? 0.0 : file.fit.chain.r_trace.back(), file.fit.chain.samples.size());

    const std::string final_path = !out_path.empty() ? out_path : progress_path;
    if (!final_path.empty()) write_file(final_path, [&](std::ostream& out) { write_fit(out, file); });
    if (!curves_path.empty()) write_curves(curves_path, file.fit, file.transforms, taus, curve_points, estimate);
    return 0;
  }

  if (pred->parsed()) {
    auto in = open_in(pred_fit);
    const FitFile file = read_fit(in);
    const PointEstimate estimate = parse_point_estimate(pred_point);
    const std::vector<double> taus = parse_levels(pred_quantiles);
    if (pred_x.empty()) {
      write_curves(pred_out, file.fit, file.transforms, taus, pred_points, estimate);
      return 0;
    }
    PredictorMatrix x{file.transforms.dim(), {}};
    std::stringstream ss(pred_x);
    for (std::string part; std::getline(ss, part, ',');) x.values.push_back(to_number(part, "--x"));
    if (x.values.size() != x.dim) throw FormatError("--x needs one value per predictor");
    const auto rows = export_curves(file.fit, file.transforms, x, taus, estimate);
    if (pred_out == "-") {
      write_curves_csv(std::cout, rows);
    } else {
      write_file(pred_out, [&](std::ostream& out) { write_curves_csv(out, rows); });
    }
    return 0;
  }

  if (pm->parsed()) {
    auto fin = open_in(pm_fit);
    const FitFile file = read_fit(fin);
    auto tin = open_in(pm_test);
    const RawData test = read_data_csv(tin);
    std::printf("%.6g\n", pmse(file.fit, test, file.transforms, parse_point_estimate(pm_point)));
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
