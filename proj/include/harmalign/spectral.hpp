#pragma once

#include <optional>
#include <string>
#include <vector>

#include "harmalign/graph.hpp"

namespace harmalign {

/// Eigenvalue pair (position, gap) whose separation fell below the tie
/// threshold; the basis is only defined up to rotation inside such pairs.
struct EigenTie {
  Index index = 0;  // ties between index and index + 1
  double gap = 0.0;
};

struct SpectralDiagnostics {
  std::string solver;  // "dense" or "lanczos"
  bool converged = true;
  int restarts = 0;
  double max_residual = 0.0;  // max_j |(I - L) psi_j - lambda_j psi_j|_2, pre-clamp
  std::vector<EigenTie> near_ties;
  Index clamped = 0;  // eigenvalues moved into [0, 1]
};

/// Graph Fourier basis: orthonormal eigenvectors of I - L (columns) with
/// their eigenvalues in descending order, clamped into [0, 1]. The largest
/// magnitude entry of every column is positive.
struct FourierBasis {
  MatrixXd vectors;
  VectorXd values;
  VectorXd raw_values;  // before clamping
  VectorXd degrees;
  SpectralDiagnostics diagnostics;

  Index rank() const { return vectors.cols(); }
  Index size() const { return vectors.rows(); }
};

struct EigenOptions {
  /// Number of leading eigenpairs; nullopt (or >= N) means all of them.
  std::optional<Index> rank;
  /// Relative residual target for the iterative solver.
  double tolerance = 1e-10;
  int max_restarts = 200;
  std::uint64_t seed = 0x5eed;
  double tie_threshold = 1e-10;
};

/// Full decomposition up to this many points; above it the default is a
/// rank-100 truncated decomposition.
inline constexpr Index kFullDecompositionLimit = 2000;
inline constexpr Index kDefaultTruncatedRank = 100;

std::optional<Index> default_rank(Index n_points);

FourierBasis fourier_basis(const KernelGraph& graph, std::optional<Index> rank = std::nullopt);
FourierBasis fourier_basis(const KernelGraph& graph, const EigenOptions& options);

/// Flips columns so that each column's largest-magnitude entry is positive.
/// Returns the applied signs.
VectorXd apply_sign_convention(MatrixXd& vectors);

struct TopEigenpairs {
  VectorXd values;  // descending
  MatrixXd vectors;
  int restarts = 0;
  double max_residual = 0.0;
  bool converged = false;
};

/// Leading (algebraically largest) eigenpairs of a dense symmetric matrix by
/// thick-restart Lanczos with full reorthogonalisation.
TopEigenpairs top_eigenpairs(const MatrixXd& symmetric, Index count,
                             const EigenOptions& options = {});

/// Removes the leading (trivial, eigenvalue 1) eigenpair.
FourierBasis drop_trivial(const FourierBasis& basis);

/// How diffusion coordinates are recovered from the symmetric eigenvectors.
enum class CoordinateScaling {
  /// phi = D^{-1/2} psi.
  inverse_sqrt_degree,
  /// phi = (D / vol)^{-1/2} psi with vol = sum of degrees: right eigenvectors
  /// of P with unit norm under the stationary distribution. Same directions
  /// as inverse_sqrt_degree, but the scale no longer shrinks with N.
  stationary,
  /// phi = D^{1/2} psi.
  sqrt_degree,
};

struct DiffusionEmbedding {
  MatrixXd coords;  // rows = points, columns = harmonics
  VectorXd values;
  int t = 0;
};

/// Diffusion map Phi_t = Phi_0 Lambda^t.
DiffusionEmbedding diffusion_coordinates(const FourierBasis& basis, int t,
                                         CoordinateScaling scaling = CoordinateScaling::inverse_sqrt_degree);

/// Phi_0 alone.
MatrixXd coordinate_frame(const FourierBasis& basis, CoordinateScaling scaling);

}  // namespace harmalign
