#include "harmalign/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "harmalign/error.hpp"

namespace harmalign {

namespace {

void require_bandwidth_ok(const BandwidthSpec& bandwidth, Index n_points) {
  if (const auto* fixed = std::get_if<FixedBandwidth>(&bandwidth)) {
    if (!(fixed->sigma > 0.0) || !std::isfinite(fixed->sigma)) {
      throw Error("fixed bandwidth must be positive, got " + format_double(fixed->sigma));
    }
  } else {
    const int k = std::get<AdaptiveBandwidth>(bandwidth).k;
    if (k < 1 || k >= n_points) {
      throw Error("adaptive bandwidth needs 1 <= k < N (k = " + std::to_string(k) +
                  ", N = " + std::to_string(n_points) + ")");
    }
  }
}

double median(VectorXd v) {
  const auto n = static_cast<std::size_t>(v.size());
  auto* begin = v.data();
  std::nth_element(begin, begin + n / 2, begin + n);
  const double upper = begin[n / 2];
  if (n % 2 == 1) return upper;
  return 0.5 * (upper + *std::max_element(begin, begin + n / 2));
}

}  // namespace

void validate(const KernelParams& params, Index n_points) {
  require_bandwidth_ok(params.bandwidth, n_points);
  if (params.anisotropy) {
    const double implied = params.kind == KernelKind::anisotropic ? 1.0 : 0.0;
    if (*params.anisotropy != implied) {
      throw Unsupported("anisotropy " + format_double(*params.anisotropy) +
                        " is not supported for this kernel (only " + format_double(implied) +
                        ")");
    }
  }
}

MatrixXd pairwise_sq_distances(const MatrixXd& points) {
  const Index n = points.rows();
  // Row-major copy keeps each point contiguous for the inner loop.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = points;
  MatrixXd out(n, n);
  for (Index i = 0; i < n; ++i) {
    out(i, i) = 0.0;
    const auto xi = rows.row(i);
    for (Index j = i + 1; j < n; ++j) {
      const double d = (xi - rows.row(j)).squaredNorm();
      out(i, j) = d;
      out(j, i) = d;
    }
  }
  return out;
}

namespace {

VectorXd kth_neighbour_distance(const MatrixXd& sq_dist, int k) {
  const Index n = sq_dist.rows();
  VectorXd out(n);
  std::vector<double> row(static_cast<std::size_t>(n - 1));
  for (Index i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (Index j = 0; j < n; ++j) {
      if (j != i) row[m++] = sq_dist(i, j);
    }
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    out(i) = std::sqrt(row[static_cast<std::size_t>(k - 1)]);
  }
  return out;
}

VectorXd adaptive_bandwidth_from(const MatrixXd& sq_dist, int k) {
  const Index n = sq_dist.rows();
  if (k < 1 || k >= n) {
    throw Error("adaptive bandwidth needs 1 <= k < N (k = " + std::to_string(k) +
                ", N = " + std::to_string(n) + ")");
  }
  VectorXd sigma = kth_neighbour_distance(sq_dist, k);
  for (Index i = 0; i < n; ++i) {
    if (!(sigma(i) > 0.0)) {
      throw Error("zero adaptive bandwidth at point " + std::to_string(i + 1) + ": " +
                  std::to_string(k) +
                  " or more duplicate points; deduplicate the data or use a fixed bandwidth");
    }
  }
  return sigma;
}

KernelGraph symmetric_gaussian(const MatrixXd& sq_dist, const VectorXd& sigma) {
  const Index n = sq_dist.rows();
  const VectorXd eps = sigma.array().square();
  MatrixXd w(n, n);
  for (Index i = 0; i < n; ++i) {
    w(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      const double d = sq_dist(i, j);
      const double v = 0.5 * (std::exp(-d / (2.0 * eps(i))) + std::exp(-d / (2.0 * eps(j))));
      w(i, j) = v;
      w(j, i) = v;
    }
  }
  return graph_from_weights(std::move(w));
}

KernelGraph anisotropic_from(const MatrixXd& sq_dist, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error("anisotropic kernel needs sigma > 0, got " + format_double(sigma));
  }
  const Index n = sq_dist.rows();
  MatrixXd g = (-sq_dist.array() / sigma).exp().matrix();
  const VectorXd r = g.rowwise().sum();
  MatrixXd k(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = g(i, i) / (r(i) * r(i));
    for (Index j = i + 1; j < n; ++j) {
      const double v = g(i, j) / (r(i) * r(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return graph_from_weights(std::move(k));
}

}  // namespace

VectorXd adaptive_bandwidth(const MatrixXd& points, int k) {
  if (k < 1 || k >= points.rows()) {
    throw Error("adaptive bandwidth needs 1 <= k < N (k = " + std::to_string(k) +
                ", N = " + std::to_string(points.rows()) + ")");
  }
  return adaptive_bandwidth_from(pairwise_sq_distances(points), k);
}

KernelGraph gauss_kernel_graph(const MatrixXd& points, const BandwidthSpec& bandwidth) {
  require_bandwidth_ok(bandwidth, points.rows());
  const MatrixXd sq_dist = pairwise_sq_distances(points);
  VectorXd sigma;
  if (const auto* fixed = std::get_if<FixedBandwidth>(&bandwidth)) {
    sigma = VectorXd::Constant(points.rows(), fixed->sigma);
  } else {
    sigma = adaptive_bandwidth_from(sq_dist, std::get<AdaptiveBandwidth>(bandwidth).k);
  }
  return symmetric_gaussian(sq_dist, sigma);
}

KernelGraph anisotropic_kernel_graph(const MatrixXd& points, double sigma) {
  return anisotropic_from(pairwise_sq_distances(points), sigma);
}

KernelGraph build_graph(const MatrixXd& points, const KernelParams& params) {
  validate(params, points.rows());
  if (params.kind == KernelKind::symmetric_gaussian) {
    return gauss_kernel_graph(points, params.bandwidth);
  }
  const MatrixXd sq_dist = pairwise_sq_distances(points);
  double sigma = 0.0;
  if (const auto* fixed = std::get_if<FixedBandwidth>(&params.bandwidth)) {
    sigma = fixed->sigma;
  } else {
    const VectorXd local =
        adaptive_bandwidth_from(sq_dist, std::get<AdaptiveBandwidth>(params.bandwidth).k);
    sigma = 2.0 * median(local.array().square().matrix());
  }
  return anisotropic_from(sq_dist, sigma);
}

KernelGraph graph_from_weights(MatrixXd weights) {
  const Index n = weights.rows();
  if (weights.cols() != n) throw Error("kernel matrix must be square");
  VectorXd degrees = weights.rowwise().sum();
  for (Index i = 0; i < n; ++i) {
    if (!(degrees(i) > 0.0)) {
      throw Error("zero degree at point " + std::to_string(i + 1) +
                  " (kernel underflow; increase the bandwidth)");
    }
  }
  const VectorXd inv_sqrt = degrees.array().sqrt().inverse();
  MatrixXd laplacian(n, n);
  for (Index i = 0; i < n; ++i) {
    laplacian(i, i) = 1.0 - weights(i, i) * inv_sqrt(i) * inv_sqrt(i);
    for (Index j = i + 1; j < n; ++j) {
      const double v = -weights(i, j) * inv_sqrt(i) * inv_sqrt(j);
      laplacian(i, j) = v;
      laplacian(j, i) = v;
    }
  }
  return KernelGraph{std::move(weights), std::move(degrees), std::move(laplacian)};
}

MatrixXd diffusion_operator(const KernelGraph& graph) {
  if ((graph.degrees.array() <= 0.0).any()) throw Error("zero-degree row in kernel graph");
  return graph.degrees.cwiseInverse().asDiagonal() * graph.weights;
}

MatrixXd normalized_adjacency(const KernelGraph& graph) {
  const Index n = graph.size();
  const VectorXd inv_sqrt = graph.degrees.array().sqrt().inverse();
  MatrixXd a(n, n);
  for (Index i = 0; i < n; ++i) {
    a(i, i) = graph.weights(i, i) * inv_sqrt(i) * inv_sqrt(i);
    for (Index j = i + 1; j < n; ++j) {
      const double v = graph.weights(i, j) * inv_sqrt(i) * inv_sqrt(j);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

}  // namespace harmalign
