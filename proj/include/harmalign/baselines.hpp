#pragma once

#include <optional>
#include <string>

#include "harmalign/data.hpp"

namespace harmalign {

/// Mutual-nearest-neighbour batch correction. An approximate
/// reimplementation for benchmarking: no cosine normalization, no per-gene
/// scaling, corrections computed in the input space.
struct MnnParams {
  int k = 20;
  /// Smoothing bandwidth; nullopt means the median pairwise distance in Y.
  std::optional<double> sigma;
};

struct MnnResult {
  MatrixXd corrected;
  MatrixXd correction;  // corrected - Y
  Index mutual_pairs = 0;
  Index paired_points = 0;  // rows of Y with at least one mutual neighbour
  double sigma = 0.0;
  std::optional<std::string> warning;

  /// Mean over rows of |correction row|_2.
  double mean_correction_norm() const;
};

/// Returns Y + S V. Row j of V is the mean of (x_i - y_j) over the mutual
/// neighbours x_i of y_j (zero if there are none); S is the row-normalized
/// Gaussian kernel exp(-|y_j - y_l|^2 / (2 sigma^2)) over Y.
MnnResult mnn_correct(const MatrixXd& x, const MatrixXd& y, const MnnParams& params = {});
MnnResult mnn_correct(const DataMatrix& x, const DataMatrix& y, const MnnParams& params = {});

}  // namespace harmalign
