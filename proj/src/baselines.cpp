#include "harmalign/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "harmalign/error.hpp"
#include "harmalign/neighbors.hpp"

namespace harmalign {

double MnnResult::mean_correction_norm() const {
  if (correction.rows() == 0) return 0.0;
  return correction.rowwise().norm().mean();
}

namespace {

double median_pairwise_distance(const MatrixXd& sq_dist) {
  const Index n = sq_dist.rows();
  std::vector<double> upper;
  upper.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index j = 1; j < n; ++j) {
    for (Index i = 0; i < j; ++i) upper.push_back(std::sqrt(sq_dist(i, j)));
  }
  const auto mid = upper.begin() + static_cast<std::ptrdiff_t>(upper.size() / 2);
  std::nth_element(upper.begin(), mid, upper.end());
  double m = *mid;
  if (upper.size() % 2 == 0) m = 0.5 * (m + *std::max_element(upper.begin(), mid));
  return m;
}

}  // namespace

MnnResult mnn_correct(const MatrixXd& x, const MatrixXd& y, const MnnParams& params) {
  if (x.cols() != y.cols()) {
    throw Error("mnn_correct: feature counts differ (" + std::to_string(x.cols()) + " vs " +
                std::to_string(y.cols()) + ")");
  }
  const Index nx = x.rows();
  const Index ny = y.rows();
  if (params.k < 1 || params.k >= std::min(nx, ny)) {
    throw Error("mnn_correct: need 1 <= k < min(N1, N2) = " + std::to_string(std::min(nx, ny)) +
                ", got k = " + std::to_string(params.k));
  }
  if (params.sigma && !(*params.sigma > 0.0 && std::isfinite(*params.sigma))) {
    throw Error("mnn_correct: sigma must be positive, got " + format_double(*params.sigma));
  }

  const MatrixXd xy = cross_sq_distances(x, y);
  const auto x_to_y = nearest_neighbors(xy, params.k);
  const auto y_to_x = nearest_neighbors(xy.transpose(), params.k);

  MnnResult out;
  MatrixXd raw = MatrixXd::Zero(ny, y.cols());
  for (Index j = 0; j < ny; ++j) {
    Index count = 0;
    for (Index i : y_to_x[static_cast<std::size_t>(j)]) {
      const auto& back = x_to_y[static_cast<std::size_t>(i)];
      if (std::find(back.begin(), back.end(), j) == back.end()) continue;
      raw.row(j) += x.row(i) - y.row(j);
      ++count;
    }
    if (count > 0) {
      raw.row(j) /= static_cast<double>(count);
      ++out.paired_points;
      out.mutual_pairs += count;
    }
  }

  const MatrixXd yy = cross_sq_distances(y, y);
  out.sigma = params.sigma ? *params.sigma : median_pairwise_distance(yy);
  if (out.mutual_pairs == 0) {
    out.warning = "no mutual nearest neighbours at k = " + std::to_string(params.k) +
                  "; Y returned unchanged";
    out.corrected = y;
    out.correction = MatrixXd::Zero(ny, y.cols());
    return out;
  }
  if (!(out.sigma > 0.0)) {
    throw Error("mnn_correct: median pairwise distance in Y is zero; pass sigma explicitly");
  }

  MatrixXd smoothing = (-yy.array() / (2.0 * out.sigma * out.sigma)).exp().matrix();
  const VectorXd rows = smoothing.rowwise().sum();
  smoothing = rows.cwiseInverse().asDiagonal() * smoothing;
  out.correction = smoothing * raw;
  out.corrected = y + out.correction;
  return out;
}

MnnResult mnn_correct(const DataMatrix& x, const DataMatrix& y, const MnnParams& params) {
  return mnn_correct(x.values, y.values, params);
}

}  // namespace harmalign
