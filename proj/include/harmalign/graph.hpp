#pragma once

#include <optional>
#include <variant>

#include "harmalign/data.hpp"

namespace harmalign {

struct FixedBandwidth {
  double sigma = 1.0;
};

/// Per-point bandwidth equal to the distance to the k-th nearest neighbour.
struct AdaptiveBandwidth {
  int k = 20;
};

using BandwidthSpec = std::variant<FixedBandwidth, AdaptiveBandwidth>;

enum class KernelKind {
  /// 0.5 * (exp(-d^2 / 2 eps_i) + exp(-d^2 / 2 eps_j)), eps = sigma^2.
  symmetric_gaussian,
  /// G(i,j) / (|G(i,.)|_1 |G(j,.)|_1) with G = exp(-d^2 / sigma).
  anisotropic,
};

struct KernelParams {
  KernelKind kind = KernelKind::symmetric_gaussian;
  BandwidthSpec bandwidth = AdaptiveBandwidth{20};
  /// Density-normalisation exponent. Only the value implied by `kind` is
  /// implemented (0 for symmetric_gaussian, 1 for anisotropic); anything
  /// else raises Unsupported.
  std::optional<double> anisotropy;
};

void validate(const KernelParams& params, Index n_points);

/// Kernel matrix W, its row sums and the normalized Laplacian
/// L = I - D^{-1/2} W D^{-1/2}. All matrices are dense and exactly symmetric.
struct KernelGraph {
  MatrixXd weights;
  VectorXd degrees;
  MatrixXd laplacian;

  Index size() const { return weights.rows(); }
};

/// Squared Euclidean distances, computed entry by entry so the result is
/// exactly symmetric and equivariant under row permutations.
MatrixXd pairwise_sq_distances(const MatrixXd& points);

/// Distance from each point to its k-th nearest neighbour (self excluded).
VectorXd adaptive_bandwidth(const MatrixXd& points, int k);
inline VectorXd adaptive_bandwidth(const DataMatrix& data, int k) {
  return adaptive_bandwidth(data.values, k);
}

KernelGraph gauss_kernel_graph(const MatrixXd& points, const BandwidthSpec& bandwidth);
inline KernelGraph gauss_kernel_graph(const DataMatrix& data, const BandwidthSpec& bandwidth) {
  return gauss_kernel_graph(data.values, bandwidth);
}

KernelGraph anisotropic_kernel_graph(const MatrixXd& points, double sigma);
inline KernelGraph anisotropic_kernel_graph(const DataMatrix& data, double sigma) {
  return anisotropic_kernel_graph(data.values, sigma);
}

/// Dispatches on params.kind. For the anisotropic kernel an adaptive
/// bandwidth is reduced to the global sigma = 2 * median(eps_i), which
/// matches exp(-d^2 / 2 eps) at the median bandwidth.
KernelGraph build_graph(const MatrixXd& points, const KernelParams& params);

/// Builds the degree vector and Laplacian for an arbitrary symmetric,
/// non-negative kernel matrix.
KernelGraph graph_from_weights(MatrixXd weights);

/// Row-stochastic P = D^{-1} W.
MatrixXd diffusion_operator(const KernelGraph& graph);

/// I - L = D^{-1/2} W D^{-1/2}, evaluated directly from W (not as I - L) and
/// mirrored so it is exactly symmetric.
MatrixXd normalized_adjacency(const KernelGraph& graph);

}  // namespace harmalign
