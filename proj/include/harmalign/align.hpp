#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "harmalign/data.hpp"
#include "harmalign/filters.hpp"
#include "harmalign/graph.hpp"
#include "harmalign/spectral.hpp"

namespace harmalign {

struct AlignmentParams {
  int bands = 8;
  int diffusion_time = 1;
  KernelParams kernel;
  /// Eigenpairs kept per dataset (trivial one included). nullopt picks
  /// default_rank(N): full up to 2000 points, 100 beyond.
  std::optional<Index> rank;
  /// xi = 1..l by default. With xi = 0 included, every harmonic whose
  /// eigenvalue was clamped to 0 gets weight 1 against every other one, and
  /// on small, nearly complete graphs that noise floor dominates C.
  WindowSet windows = WindowSet::skip_lowest;
  CoordinateScaling scaling = CoordinateScaling::stationary;
  /// Center and scale feature columns to unit variance before the GFT.
  bool standardize_features = false;
  /// Seed for the truncated eigensolver's start vector.
  std::uint64_t seed = 0x5eed;
};

void validate(const AlignmentParams& params);

std::string to_string(KernelKind kind);      // "alg2" | "eq1"
std::string to_string(WindowSet set);        // "all" | "skip-lowest"
std::string to_string(CoordinateScaling s);  // "inverse-sqrt-degree" | "stationary" | "sqrt-degree"
KernelKind parse_kernel_kind(const std::string& name);
WindowSet parse_window_set(const std::string& name);
CoordinateScaling parse_scaling(const std::string& name);

/// Per-dataset half of the pipeline: non-trivial Fourier basis (sign
/// convention applied), coordinate frame Phi_0 and feature coefficients.
struct PreparedDataset {
  FourierBasis basis;
  MatrixXd frame;         // Phi_0, N x r
  MatrixXd coefficients;  // Psi^T X, r x d

  Index size() const { return frame.rows(); }
  Index rank() const { return frame.cols(); }
};

PreparedDataset prepare_dataset(const MatrixXd& points, const AlignmentParams& params);

/// Uses an externally computed basis with the trivial eigenpair already
/// removed. The sign convention is re-applied, so column signs of the input
/// basis do not matter.
PreparedDataset prepare_from_basis(FourierBasis basis, const MatrixXd& points,
                                   const AlignmentParams& params);

/// X^ = Psi^T X.
MatrixXd gft_features(const MatrixXd& basis, const MatrixXd& features);

/// Columns centered and scaled to unit (population) variance; constant
/// columns become zero.
MatrixXd standardize_columns(const MatrixXd& features);

/// C = w o (X^ Y^^T).
MatrixXd bandlimited_correlation(const MatrixXd& x_hat, const MatrixXd& y_hat,
                                 const MatrixXd& weights);

struct OrthogonalizeOptions {
  /// Singular values at or below rank_tolerance * sigma_max count as zero.
  double rank_tolerance = 1e-10;
};

struct Orthogonalized {
  MatrixXd transform;
  Index rank = 0;  // numerical rank of C
};

/// Nearest orthogonal map T = U V^T to C (orthonormal columns if C is tall,
/// orthonormal rows if wide), maximizing tr(T^T C).
///
/// When C is rank deficient the maximizer is not unique. The null spaces are
/// then paired by the orthogonal map closest to the index identity J
/// (J_ij = [i == j]), which makes T = I for any symmetric positive
/// semidefinite C, so self-alignment maps each harmonic onto itself.
Orthogonalized orthogonalize_with_rank(const MatrixXd& correlation,
                                       const OrthogonalizeOptions& options = {});
MatrixXd orthogonalize(const MatrixXd& correlation, const OrthogonalizeOptions& options = {});

/// [[Phi_x, Phi_x T], [Phi_y T^T, Phi_y]] * blockdiag(Lx, Ly)^t.
MatrixXd unified_diffusion_map(const MatrixXd& frame_x, const MatrixXd& frame_y,
                               const VectorXd& values_x, const VectorXd& values_y,
                               const MatrixXd& transform, int t);

struct Block {
  Index start = 0;
  Index size = 0;
};

struct AlignmentDiagnostics {
  SpectralDiagnostics x;
  SpectralDiagnostics y;
  VectorXd x_values;
  VectorXd y_values;
  Index correlation_rank = 0;
  double orthogonality_residual = 0.0;  // max |T^T T - I| on the smaller side
};

struct AlignmentResult {
  MatrixXd correlation;
  MatrixXd transform;
  MatrixXd embedding;
  Block x_rows, y_rows;
  Block x_cols, y_cols;
  AlignmentDiagnostics diagnostics;

  auto x_embedding() const { return embedding.middleRows(x_rows.start, x_rows.size); }
  auto y_embedding() const { return embedding.middleRows(y_rows.start, y_rows.size); }
};

/// max |T^T T - I| (tall or square T) or max |T T^T - I| (wide T).
double orthogonality_residual(const MatrixXd& transform);

AlignmentResult harmonic_alignment(const MatrixXd& x, const MatrixXd& y,
                                   const AlignmentParams& params = {});
AlignmentResult harmonic_alignment(const DataMatrix& x, const DataMatrix& y,
                                   const AlignmentParams& params = {});

/// Correlation, orthogonalization and unified map for two prepared datasets.
AlignmentResult align_prepared(const PreparedDataset& x, const PreparedDataset& y,
                               const AlignmentParams& params);

struct MultiAlignmentResult {
  /// transforms[i][j] maps dataset i's harmonics into dataset j's
  /// (r_i x r_j). transforms[j][i] is an exact transpose copy of
  /// transforms[i][j]; the diagonal holds identities.
  std::vector<std::vector<MatrixXd>> transforms;
  MatrixXd embedding;
  std::vector<Block> rows;
  std::vector<Block> cols;
  std::vector<SpectralDiagnostics> spectra;
  std::vector<VectorXd> values;

  Index count() const { return static_cast<Index>(rows.size()); }
  auto block(Index i, Index j) const {
    return embedding.block(rows[i].start, cols[j].start, rows[i].size, cols[j].size);
  }
  auto dataset_rows(Index i) const { return embedding.middleRows(rows[i].start, rows[i].size); }
};

MultiAlignmentResult multi_alignment(const std::vector<MatrixXd>& datasets,
                                     const AlignmentParams& params = {});
MultiAlignmentResult multi_alignment(const std::vector<DataMatrix>& datasets,
                                     const AlignmentParams& params = {});
MultiAlignmentResult multi_align_prepared(const std::vector<PreparedDataset>& datasets,
                                          const AlignmentParams& params);

}  // namespace harmalign
