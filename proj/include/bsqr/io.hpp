#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bsqr/datakit.hpp"
#include "bsqr/inference.hpp"
#include "bsqr/sampler.hpp"

namespace bsqr {

/// Header `x1,...,xd,y`.
RawData read_data_csv(std::istream& in);
void write_data_csv(std::ostream& out, const RawData& data);

/// Observations `x1,...,xd,bin` plus cuts `rho,cut` (interior levels only).
RawGrid read_grid_csv(std::istream& observations, std::istream& cuts);
void write_grid_csv(std::ostream& observations, std::ostream& cuts, const RawGrid& grid);

/// Rows `x1,...,xd,weight,cut_1,...,cut_{c-1}`.
RawWeightedGrid read_weighted_csv(std::istream& in);
void write_weighted_csv(std::ostream& out, const RawWeightedGrid& grid);

/// One line per variable: `x1 linear 0 5`, `y loglinear 7.47 12.55`, and an
/// optional `rho 0 0.2 ... 1`. Blank lines and `#` comments are ignored.
TransformSet read_transforms(std::istream& in);
void write_transforms(std::ostream& out, const TransformSet& transforms);

/// Header `x1,...,xd,tau,q_hat`.
void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows);

enum class DataKind { complete, grid, weighted_grid };

std::string to_string(DataKind kind);
DataKind parse_data_kind(const std::string& text);

/// Everything `fit` produces: the transforms, the selected model, the warm
/// start, and the chain as a checkpoint. An unfinished chain can be resumed.
struct FitFile {
  DataKind data = DataKind::complete;
  TransformSet transforms;
  FitResult fit;
  ChainCheckpoint checkpoint;

  bool finished() const { return checkpoint.next_iteration >= checkpoint.config.iterations; }
};

/// Snapshot of a finished fit for writing.
ChainCheckpoint completed_checkpoint(const FitResult& fit);

void write_fit(std::ostream& out, const FitFile& file);
FitFile read_fit(std::istream& in);

}  // namespace bsqr
