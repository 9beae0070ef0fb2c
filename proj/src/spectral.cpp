#include "harmalign/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "harmalign/error.hpp"

namespace harmalign {

std::optional<Index> default_rank(Index n_points) {
  if (n_points <= kFullDecompositionLimit) return std::nullopt;
  return kDefaultTruncatedRank;
}

VectorXd apply_sign_convention(MatrixXd& vectors) {
  VectorXd signs = VectorXd::Ones(vectors.cols());
  for (Index j = 0; j < vectors.cols(); ++j) {
    Index at = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&at);
    if (vectors(at, j) < 0.0) {
      vectors.col(j) = -vectors.col(j);
      signs(j) = -1.0;
    }
  }
  return signs;
}

namespace {

double max_column_residual(const MatrixXd& a, const MatrixXd& vectors, const VectorXd& values) {
  if (vectors.cols() == 0) return 0.0;
  const MatrixXd r = a * vectors - vectors * values.asDiagonal();
  return r.colwise().norm().maxCoeff();
}

TopEigenpairs dense_top(const MatrixXd& a, Index count) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) {
    throw Error("dense symmetric eigensolver failed to converge (N = " +
                std::to_string(a.rows()) + ")");
  }
  TopEigenpairs out;
  out.values = solver.eigenvalues().reverse().head(count);
  out.vectors = solver.eigenvectors().rowwise().reverse().leftCols(count);
  out.converged = true;
  out.max_residual = max_column_residual(a, out.vectors, out.values);
  return out;
}

/// Orthogonalises w against the first `cols` columns of basis, twice.
void reorthogonalize(const MatrixXd& basis, Index cols, VectorXd& w) {
  if (cols == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    const VectorXd coeffs = basis.leftCols(cols).transpose() * w;
    w.noalias() -= basis.leftCols(cols) * coeffs;
  }
}

}  // namespace

TopEigenpairs top_eigenpairs(const MatrixXd& a, Index count, const EigenOptions& options) {
  const Index n = a.rows();
  if (a.cols() != n) throw Error("top_eigenpairs: matrix must be square");
  if (count < 1 || count > n) {
    throw Error("top_eigenpairs: requested " + std::to_string(count) + " of " +
                std::to_string(n) + " eigenpairs");
  }
  const Index subspace = std::min<Index>(n, 2 * count + 32);
  if (subspace >= n - 1) return dense_top(a, count);

  Rng rng(options.seed, static_cast<std::uint64_t>(n));
  MatrixXd basis(n, subspace);
  MatrixXd image(n, subspace);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  v.normalize();

  const double scale = std::max(1.0, a.cwiseAbs().rowwise().sum().maxCoeff());
  const Index keep = std::min<Index>(subspace - 1, count + (subspace - count) / 2);

  TopEigenpairs out;
  Index filled = 0;
  for (int restart = 0;; ++restart) {
    for (Index j = filled; j < subspace; ++j) {
      basis.col(j) = v;
      image.col(j).noalias() = a * v;
      VectorXd w = image.col(j);
      reorthogonalize(basis, j + 1, w);
      double norm = w.norm();
      if (norm < 1e-12 * scale) {
        // Invariant subspace found: continue from a fresh random direction.
        for (Index i = 0; i < n; ++i) w(i) = rng.normal();
        reorthogonalize(basis, j + 1, w);
        norm = w.norm();
      }
      v = w / norm;
    }
    MatrixXd h = basis.transpose() * image;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> small(h);
    if (small.info() != Eigen::Success) throw Error("Lanczos: projected eigenproblem failed");
    const VectorXd theta = small.eigenvalues().reverse();
    const MatrixXd y = small.eigenvectors().rowwise().reverse();

    const MatrixXd ritz = basis * y.leftCols(count);
    const MatrixXd residual =
        image * y.leftCols(count) - ritz * theta.head(count).asDiagonal();
    const double worst = residual.colwise().norm().maxCoeff();

    out.restarts = restart;
    out.max_residual = worst;
    if (worst <= options.tolerance * scale || restart >= options.max_restarts) {
      out.converged = worst <= options.tolerance * scale;
      out.values = theta.head(count);
      out.vectors = ritz;
      return out;
    }

    // Thick restart: keep the leading Ritz vectors and continue the Krylov
    // sequence from the residual direction v, which is orthogonal to them.
    const MatrixXd kept_basis = basis * y.leftCols(keep);
    const MatrixXd kept_image = image * y.leftCols(keep);
    basis.leftCols(keep) = kept_basis;
    image.leftCols(keep) = kept_image;
    reorthogonalize(basis, keep, v);
    v.normalize();
    filled = keep;
  }
}

FourierBasis fourier_basis(const KernelGraph& graph, std::optional<Index> rank) {
  EigenOptions options;
  options.rank = rank;
  return fourier_basis(graph, options);
}

FourierBasis fourier_basis(const KernelGraph& graph, const EigenOptions& options) {
  const Index n = graph.size();
  if (options.rank && *options.rank < 1) throw Error("rank must be positive");
  const Index count = options.rank ? std::min(*options.rank, n) : n;
  const MatrixXd a = normalized_adjacency(graph);

  FourierBasis basis;
  TopEigenpairs top;
  if (count == n) {
    top = dense_top(a, n);
    basis.diagnostics.solver = "dense";
  } else {
    top = top_eigenpairs(a, count, options);
    basis.diagnostics.solver = "lanczos";
  }
  basis.diagnostics.converged = top.converged;
  basis.diagnostics.restarts = top.restarts;
  basis.diagnostics.max_residual = top.max_residual;

  basis.vectors = std::move(top.vectors);
  apply_sign_convention(basis.vectors);
  basis.raw_values = top.values;
  basis.values = top.values.cwiseMax(0.0).cwiseMin(1.0);
  basis.diagnostics.clamped = (basis.values.array() != basis.raw_values.array()).count();
  for (Index j = 0; j + 1 < count; ++j) {
    const double gap = basis.raw_values(j) - basis.raw_values(j + 1);
    if (gap < options.tie_threshold) basis.diagnostics.near_ties.push_back({j, gap});
  }
  basis.degrees = graph.degrees;
  return basis;
}

FourierBasis drop_trivial(const FourierBasis& basis) {
  const Index r = basis.rank();
  if (r < 2) {
    throw Error("drop_trivial needs at least 2 eigenpairs, basis has " + std::to_string(r));
  }
  FourierBasis out;
  out.vectors = basis.vectors.rightCols(r - 1);
  out.values = basis.values.tail(r - 1);
  out.raw_values = basis.raw_values.tail(r - 1);
  out.degrees = basis.degrees;
  out.diagnostics = basis.diagnostics;
  out.diagnostics.near_ties.clear();
  for (const auto& tie : basis.diagnostics.near_ties) {
    if (tie.index >= 1) out.diagnostics.near_ties.push_back({tie.index - 1, tie.gap});
  }
  if (basis.values(0) != basis.raw_values(0)) --out.diagnostics.clamped;
  return out;
}

MatrixXd coordinate_frame(const FourierBasis& basis, CoordinateScaling scaling) {
  switch (scaling) {
    case CoordinateScaling::inverse_sqrt_degree:
      return basis.degrees.array().sqrt().inverse().matrix().asDiagonal() * basis.vectors;
    case CoordinateScaling::stationary: {
      const double volume = basis.degrees.sum();
      return (basis.degrees.array() / volume).sqrt().inverse().matrix().asDiagonal() *
             basis.vectors;
    }
    case CoordinateScaling::sqrt_degree:
      return basis.degrees.array().sqrt().matrix().asDiagonal() * basis.vectors;
  }
  throw Error("unknown coordinate scaling");
}

DiffusionEmbedding diffusion_coordinates(const FourierBasis& basis, int t,
                                         CoordinateScaling scaling) {
  if (t < 0) throw Error("diffusion time must be non-negative");
  DiffusionEmbedding out;
  out.coords = coordinate_frame(basis, scaling);
  out.values = basis.values;
  out.t = t;
  if (t > 0) {
    const VectorXd powers = basis.values.array().pow(static_cast<double>(t));
    out.coords = out.coords * powers.asDiagonal();
  }
  return out;
}

}  // namespace harmalign
