#pragma once

#include <vector>

#include "harmalign/data.hpp"

namespace harmalign {

/// out(i, j) = |a_i - b_j|^2 via the Gram expansion |a|^2 + |b|^2 - 2 a.b,
/// clamped at 0. Identical rows may come out a few ulps above 0.
MatrixXd cross_sq_distances(const MatrixXd& a, const MatrixXd& b);

/// Indices of the k reference rows nearest to each query row, nearest first.
/// Equal distances are ordered by index. With `exclude_diagonal`, reference
/// row i is never a neighbour of query row i (for query == reference).
std::vector<std::vector<Index>> nearest_neighbors(const MatrixXd& sq_dist, Index k,
                                                  bool exclude_diagonal = false);

}  // namespace harmalign
