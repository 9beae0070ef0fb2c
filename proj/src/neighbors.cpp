#include "harmalign/neighbors.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "harmalign/error.hpp"

namespace harmalign {

MatrixXd cross_sq_distances(const MatrixXd& a, const MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw Error("distance between " + std::to_string(a.cols()) + "- and " +
                std::to_string(b.cols()) + "-column embeddings");
  }
  MatrixXd out = (-2.0 * a) * b.transpose();
  out.colwise() += a.rowwise().squaredNorm();
  out.rowwise() += b.rowwise().squaredNorm().transpose();
  return out.cwiseMax(0.0);
}

std::vector<std::vector<Index>> nearest_neighbors(const MatrixXd& sq_dist, Index k,
                                                  bool exclude_diagonal) {
  const Index available = sq_dist.cols() - (exclude_diagonal ? 1 : 0);
  if (k < 1 || k > available) {
    throw Error("need 1 <= k <= " + std::to_string(available) + " neighbours, got k = " +
                std::to_string(k));
  }
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(sq_dist.rows()));
  std::vector<Index> order;
  for (Index i = 0; i < sq_dist.rows(); ++i) {
    order.resize(static_cast<std::size_t>(sq_dist.cols()));
    std::iota(order.begin(), order.end(), Index{0});
    if (exclude_diagonal && i < sq_dist.cols()) order.erase(order.begin() + i);
    const auto closer = [&](Index p, Index q) {
      const double dp = sq_dist(i, p);
      const double dq = sq_dist(i, q);
      return dp < dq || (dp == dq && p < q);
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);
    out[static_cast<std::size_t>(i)].assign(order.begin(), order.begin() + k);
  }
  return out;
}

}  // namespace harmalign
