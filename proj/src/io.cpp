#include "bsqr/io.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "text.hpp"

namespace bsqr {

namespace {

bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (!t.empty() && t.front() != '#') {
      line = std::string(t);
      return true;
    }
  }
  return false;
}

std::vector<std::string> read_header(std::istream& in, const char* what) {
  std::string line;
  if (!next_content_line(in, line)) throw FormatError(std::string(what) + ": missing header line");
  std::vector<std::string> out;
  for (auto f : text::split(line, ',')) out.emplace_back(f);
  return out;
}

void check_predictor_names(const std::vector<std::string>& header, std::size_t d, const char* what) {
  if (d == 0) throw FormatError(std::string(what) + ": no predictor columns");
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "x" + std::to_string(j + 1) && !(d == 1 && header[j] == "x")) {
      throw FormatError(std::string(what) + ": expected column 'x" + std::to_string(j + 1) + "', found '" +
                        header[j] + "'");
    }
  }
}

void write_predictor_header(std::ostream& out, std::size_t d) {
  for (std::size_t j = 0; j < d; ++j) out << 'x' << j + 1 << ',';
}

// Reads rows of a CSV with a fixed column count, reporting the line number on errors.
template <class Row>
void for_each_row(std::istream& in, std::size_t columns, const char* what, Row&& row) {
  std::string line;
  std::size_t number = 1;
  while (next_content_line(in, line)) {
    ++number;
    const auto fields = text::split(line, ',');
    if (fields.size() != columns) {
      throw FormatError(std::string(what) + ": row " + std::to_string(number) + " has " +
                        std::to_string(fields.size()) + " fields, expected " + std::to_string(columns));
    }
    try {
      row(fields);
    } catch (const FormatError& e) {
      throw FormatError(std::string(what) + ": row " + std::to_string(number) + ": " + e.what());
    }
  }
}

}  // namespace

RawData read_data_csv(std::istream& in) {
  const auto header = read_header(in, "data file");
  if (header.size() < 2 || header.back() != "y") throw FormatError("data file: header must be x1,...,xd,y");
  const std::size_t d = header.size() - 1;
  check_predictor_names(header, d, "data file");
  RawData data{{d, {}}, {}};
  for_each_row(in, d + 1, "data file", [&](const auto& f) {
    for (std::size_t j = 0; j < d; ++j) data.x.values.push_back(text::to_double(f[j]));
    data.y.push_back(text::to_double(f[d]));
  });
  data.validate();
  return data;
}

void write_data_csv(std::ostream& out, const RawData& data) {
  write_predictor_header(out, data.x.dim);
  out << "y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.x.row(i)) out << text::format(v) << ',';
    out << text::format(data.y[i]) << '\n';
  }
}

RawGrid read_grid_csv(std::istream& observations, std::istream& cuts) {
  const auto header = read_header(observations, "grid file");
  if (header.size() < 2 || header.back() != "bin") throw FormatError("grid file: header must be x1,...,xd,bin");
  const std::size_t d = header.size() - 1;
  check_predictor_names(header, d, "grid file");
  RawGrid grid;
  grid.x.dim = d;
  for_each_row(observations, d + 1, "grid file", [&](const auto& f) {
    for (std::size_t j = 0; j < d; ++j) grid.x.values.push_back(text::to_double(f[j]));
    grid.bin.push_back(static_cast<int>(text::to_int(f[d])));
  });

  const auto cut_header = read_header(cuts, "cuts file");
  if (cut_header != std::vector<std::string>{"rho", "cut"}) throw FormatError("cuts file: header must be rho,cut");
  grid.rho.push_back(0.0);
  for_each_row(cuts, 2, "cuts file", [&](const auto& f) {
    grid.rho.push_back(text::to_double(f[0]));
    grid.cuts.push_back(text::to_double(f[1]));
  });
  grid.rho.push_back(1.0);
  grid.validate();
  return grid;
}

void write_grid_csv(std::ostream& observations, std::ostream& cuts, const RawGrid& grid) {
  write_predictor_header(observations, grid.x.dim);
  observations << "bin\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (double v : grid.x.row(i)) observations << text::format(v) << ',';
    observations << grid.bin[i] << '\n';
  }
  cuts << "rho,cut\n";
  for (std::size_t l = 0; l < grid.cuts.size(); ++l) {
    cuts << text::format(grid.rho[l + 1]) << ',' << text::format(grid.cuts[l]) << '\n';
  }
}

RawWeightedGrid read_weighted_csv(std::istream& in) {
  const auto header = read_header(in, "weighted grid file");
  const auto w = std::find(header.begin(), header.end(), "weight");
  if (w == header.end()) throw FormatError("weighted grid file: missing 'weight' column");
  const auto d = static_cast<std::size_t>(w - header.begin());
  check_predictor_names(header, d, "weighted grid file");
  const std::size_t c1 = header.size() - d - 1;
  if (c1 == 0) throw FormatError("weighted grid file: no cut columns");
  for (std::size_t l = 0; l < c1; ++l) {
    if (header[d + 1 + l] != "cut_" + std::to_string(l + 1)) {
      throw FormatError("weighted grid file: expected column 'cut_" + std::to_string(l + 1) + "'");
    }
  }
  RawWeightedGrid grid;
  grid.x.dim = d;
  for_each_row(in, header.size(), "weighted grid file", [&](const auto& f) {
    for (std::size_t j = 0; j < d; ++j) grid.x.values.push_back(text::to_double(f[j]));
    grid.weight.push_back(text::to_double(f[d]));
    std::vector<double> row;
    for (std::size_t l = 0; l < c1; ++l) row.push_back(text::to_double(f[d + 1 + l]));
    grid.cuts.push_back(std::move(row));
  });
  grid.validate(c1 + 2);
  return grid;
}

void write_weighted_csv(std::ostream& out, const RawWeightedGrid& grid) {
  write_predictor_header(out, grid.x.dim);
  out << "weight";
  const std::size_t c1 = grid.cuts.empty() ? 0 : grid.cuts.front().size();
  for (std::size_t l = 0; l < c1; ++l) out << ",cut_" << l + 1;
  out << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (double v : grid.x.row(i)) out << text::format(v) << ',';
    out << text::format(grid.weight[i]);
    for (double c : grid.cuts[i]) out << ',' << text::format(c);
    out << '\n';
  }
}

TransformSet read_transforms(std::istream& in) {
  TransformSet t;
  bool have_y = false;
  std::string line;
  while (next_content_line(in, line)) {
    std::istringstream is(line);
    std::string name;
    is >> name;
    std::string rest;
    std::getline(is, rest);
    if (name == "rho") {
      t.rho.clear();
      std::istringstream rs(rest);
      for (std::string tok; rs >> tok;) t.rho.push_back(text::to_double(tok));
    } else if (name == "y") {
      t.y = Transform::parse(rest);
      have_y = true;
    } else if (name == "x" + std::to_string(t.x.size() + 1) || (name == "x" && t.x.empty())) {
      t.x.push_back(Transform::parse(rest));
    } else {
      throw FormatError("transforms: unexpected entry '" + name + "' (predictors must be listed as x1, x2, ...)");
    }
  }
  if (t.x.empty() || !have_y) throw FormatError("transforms: need at least x1 and y");
  return t;
}

void write_transforms(std::ostream& out, const TransformSet& t) {
  for (std::size_t j = 0; j < t.x.size(); ++j) out << 'x' << j + 1 << ' ' << t.x[j].describe() << '\n';
  out << "y " << t.y.describe() << '\n';
  if (!t.rho.empty()) {
    out << "rho";
    for (double r : t.rho) out << ' ' << text::format(r);
    out << '\n';
  }
}

void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  write_predictor_header(out, rows.empty() ? 1 : rows.front().x.size());
  out << "tau,q_hat\n";
  for (const auto& r : rows) {
    for (double v : r.x) out << text::format(v) << ',';
    out << text::format(r.tau) << ',' << text::format(r.q_hat) << '\n';
  }
}

std::string to_string(DataKind kind) {
  switch (kind) {
    case DataKind::complete: return "complete";
    case DataKind::grid: return "grid";
    case DataKind::weighted_grid: return "weighted-grid";
  }
  return "complete";
}

DataKind parse_data_kind(const std::string& s) {
  if (s == "complete") return DataKind::complete;
  if (s == "grid") return DataKind::grid;
  if (s == "weighted-grid") return DataKind::weighted_grid;
  throw FormatError("unknown data kind '" + s + "'");
}

ChainCheckpoint completed_checkpoint(const FitResult& fit) {
  ChainCheckpoint cp;
  cp.config = fit.mcmc;
  cp.next_iteration = fit.mcmc.iterations;
  cp.r = fit.chain.r_trace.empty() ? fit.mcmc.r_initial : fit.chain.r_trace.back();
  cp.accepted = std::accumulate(fit.chain.accepted_per_iteration.begin(), fit.chain.accepted_per_iteration.end(),
                                std::uint64_t{0});
  cp.decisions = fit.chain.blocks_per_iteration * fit.chain.accepted_per_iteration.size();
  cp.state = std::make_shared<CoefficientTensor>(fit.chain.samples.empty() ? fit.mle : fit.chain.samples.back());
  std::ostringstream rng;
  rng << Rng(fit.mcmc.seed);
  cp.rng_state = rng.str();
  cp.output = fit.chain;
  return cp;
}

namespace {

std::istringstream keyed(std::istream& in, const std::string& key) {
  std::string line;
  if (!next_content_line(in, line)) throw FormatError("fit file: missing '" + key + "'");
  std::istringstream is(line);
  std::string got;
  is >> got;
  if (got != key) throw FormatError("fit file: expected '" + key + "', found '" + got + "'");
  return is;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

void write_fit(std::ostream& out, const FitFile& file) {
  out << "bsqr-fit 1\n";
  out << "data " << to_string(file.data) << '\n';
  std::ostringstream transforms;
  write_transforms(transforms, file.transforms);
  const std::string t = transforms.str();
  out << "transforms " << std::count(t.begin(), t.end(), '\n') << '\n' << t;
  out << "loglik_at_mle " << text::format(file.fit.loglik_at_mle) << '\n';
  out << "aic " << text::format(file.fit.aic) << '\n';
  out << "candidates " << file.fit.candidates.size() << '\n';
  for (const auto& c : file.fit.candidates) {
    out << "candidate " << c.spec.p1 << ' ' << c.spec.p2 << ' ' << (c.ok ? 1 : 0) << ' ' << text::format(c.loglik)
        << ' ' << text::format(c.aic) << ' ' << c.optimizer.runs << ' ' << c.optimizer.evaluations;
    if (!c.ok) out << ' ' << one_line(c.error);
    out << '\n';
  }
  out << "mle\n";
  write_tensor(out, file.fit.mle);
  write_checkpoint(out, file.checkpoint);
}

FitFile read_fit(std::istream& in) {
  {
    auto is = keyed(in, "bsqr-fit");
    int version = 0;
    is >> version;
    if (version != 1) throw FormatError("unsupported fit file version");
  }
  FitFile file;
  {
    auto is = keyed(in, "data");
    std::string kind;
    is >> kind;
    file.data = parse_data_kind(kind);
  }
  {
    auto is = keyed(in, "transforms");
    std::size_t n = 0;
    is >> n;
    std::string block;
    std::string line;
    for (std::size_t i = 0; i < n && std::getline(in, line); ++i) block += line + '\n';
    std::istringstream ts(block);
    file.transforms = read_transforms(ts);
  }
  auto number = [&](const std::string& key) {
    auto is = keyed(in, key);
    std::string tok;
    is >> tok;
    return text::to_double(tok);
  };
  const double ll = number("loglik_at_mle");
  const double aic_value = number("aic");
  std::size_t count = 0;
  keyed(in, "candidates") >> count;
  std::vector<std::string> candidate_lines(count);
  for (auto& line : candidate_lines) {
    auto is = keyed(in, "candidate");
    std::getline(is, line);
  }
  keyed(in, "mle");
  CoefficientTensor mle = read_tensor(in);
  file.checkpoint = read_checkpoint(in);
  file.fit = FitResult{mle.spec(), mle, file.checkpoint.output, file.checkpoint.config, aic_value, ll, {}};

  for (const auto& line : candidate_lines) {
    std::istringstream is(line);
    CandidateReport c;
    c.spec = mle.spec();
    int ok = 0;
    std::string loglik, aic_text;
    is >> c.spec.p1 >> c.spec.p2 >> ok >> loglik >> aic_text >> c.optimizer.runs >> c.optimizer.evaluations;
    if (!is) throw FormatError("fit file: malformed candidate line");
    c.ok = ok != 0;
    c.loglik = text::to_double(loglik);
    c.aic = text::to_double(aic_text);
    std::getline(is, c.error);
    c.error = std::string(text::trim(c.error));
    file.fit.candidates.push_back(std::move(c));
  }
  return file;
}

}  // namespace bsqr
