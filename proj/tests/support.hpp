#pragma once

// Independent reference implementations used as test oracles. None of these
// call into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Cyclic Jacobi eigensolver for small symmetric matrices. Returns
/// eigenvalues in descending order with matching eigenvector columns.
inline std::pair<VectorXd, MatrixXd> jacobi_eigen(MatrixXd a, int sweeps = 100) {
  const Index n = a.rows();
  MatrixXd v = MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i) > a(j, j); });
  VectorXd values(n);
  MatrixXd vectors(n, n);
  for (Index k = 0; k < n; ++k) {
    values(k) = a(order[k], order[k]);
    vectors.col(k) = v.col(order[k]);
  }
  return {values, vectors};
}

/// Gram-Schmidt orthonormalisation of the columns of a (full column rank).
inline MatrixXd gram_schmidt(MatrixXd a) {
  for (Index j = 0; j < a.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Index i = 0; i < j; ++i) a.col(j) -= a.col(i).dot(a.col(j)) * a.col(i);
    }
    a.col(j).normalize();
  }
  return a;
}

inline MatrixXd gaussian(Index rows, Index cols, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(gen);
  return m;
}

inline double sq_dist(const MatrixXd& a, Index i, const MatrixXd& b, Index j) {
  double s = 0.0;
  for (Index c = 0; c < a.cols(); ++c) s += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
  return s;
}

/// Brute-force k nearest rows of b to row i of a (ties by index).
inline std::vector<Index> knn(const MatrixXd& a, Index i, const MatrixXd& b, Index k,
                              Index exclude = -1) {
  std::vector<std::pair<double, Index>> all;
  for (Index j = 0; j < b.rows(); ++j) {
    if (j != exclude) all.push_back({sq_dist(a, i, b, j), j});
  }
  std::sort(all.begin(), all.end());
  std::vector<Index> out;
  for (Index m = 0; m < k; ++m) out.push_back(all[static_cast<std::size_t>(m)].second);
  return out;
}

/// Majority vote over brute-force neighbours; count ties go to the smaller
/// summed distance, then to the lower label.
inline int knn_vote(const MatrixXd& test, Index i, const MatrixXd& train,
                    const std::vector<int>& train_labels, int k) {
  std::vector<int> counts(64, 0);
  std::vector<double> dist(64, 0.0);
  for (Index j : knn(test, i, train, k)) {
    const int l = train_labels[static_cast<std::size_t>(j)];
    ++counts[l];
    dist[l] += std::sqrt(sq_dist(test, i, train, j));
  }
  int best = -1;
  for (int l = 0; l < 64; ++l) {
    if (counts[l] == 0) continue;
    if (best < 0 || counts[l] > counts[best] ||
        (counts[l] == counts[best] && dist[l] < dist[best])) {
      best = l;
    }
  }
  return best;
}

inline double knn_accuracy(const MatrixXd& train, const std::vector<int>& train_labels,
                           const MatrixXd& test, const std::vector<int>& test_labels, int k) {
  int hits = 0;
  for (Index i = 0; i < test.rows(); ++i) {
    hits += knn_vote(test, i, train, train_labels, k) == test_labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(test.rows());
}

/// Reference SplitMix64 (Vigna), sequential form.
struct SplitMix64 {
  std::uint64_t state;
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    return mix(state);
  }
};

/// Scalar itersine window straight from its definition.
inline double window(double lambda, int xi, int l) {
  const double pi = std::acos(-1.0);
  const double x = l * lambda - xi;
  if (std::abs(x) >= 1.0) return 0.0;
  const double c = std::cos(pi / 2 * x);
  return std::sin(pi / 2 * c * c);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("harmalign-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
