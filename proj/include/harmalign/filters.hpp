#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "harmalign/data.hpp"
#include "harmalign/error.hpp"

namespace harmalign {

/// Itersine window w_xi(lambda) = sin(pi/2 cos^2(pi/2 (l lambda - xi))) on
/// |l lambda - xi| < 1, zero elsewhere. Any real lambda is accepted.
inline double itersine_window(double lambda, int xi, int bands) {
  const double x = bands * lambda - xi;
  if (!(std::abs(x) < 1.0)) return 0.0;
  const double c = std::cos(0.5 * std::numbers::pi * x);
  return std::sin(0.5 * std::numbers::pi * c * c);
}

/// Which translates enter the bandlimiting sum.
enum class WindowSet {
  /// xi = 0..l: the l + 1 windows that tile [0, 1]. w_ii = 1 for every
  /// eigenvalue in [0, 1].
  all,
  /// xi = 1..l, the literal bandlimiting sum. Eigenvalues below 1/l lose
  /// weight, down to zero at lambda = 0.
  skip_lowest,
};

inline int first_window(WindowSet set) { return set == WindowSet::all ? 0 : 1; }

inline void require_bands(int bands) {
  if (bands < 1) throw Error("band count must be >= 1, got " + std::to_string(bands));
}

/// Windows evaluated at every eigenvalue: row i, column xi - first_window.
inline MatrixXd window_matrix(const VectorXd& values, int bands, WindowSet set = WindowSet::all) {
  require_bands(bands);
  const int first = first_window(set);
  MatrixXd out(values.size(), bands + 1 - first);
  for (Index i = 0; i < values.size(); ++i) {
    for (int xi = first; xi <= bands; ++xi) out(i, xi - first) = itersine_window(values(i), xi, bands);
  }
  return out;
}

/// Sum of squared windows at lambda; identically 1 on [0, 1] for WindowSet::all.
inline double window_energy(double lambda, int bands, WindowSet set = WindowSet::all) {
  require_bands(bands);
  double sum = 0.0;
  for (int xi = first_window(set); xi <= bands; ++xi) {
    const double w = itersine_window(lambda, xi, bands);
    sum += w * w;
  }
  return sum;
}

/// Joint bandlimiting weights w(i, j) = sum_xi w_xi(lx_i) w_xi(ly_j).
/// Summed in xi order by hand (not a GEMM) so that swapping the arguments
/// gives exactly the transpose.
inline MatrixXd bandlimiting_weights(const VectorXd& lx, const VectorXd& ly, int bands,
                                     WindowSet set = WindowSet::all) {
  const MatrixXd a = window_matrix(lx, bands, set);
  const MatrixXd b = window_matrix(ly, bands, set);
  MatrixXd out = MatrixXd::Zero(lx.size(), ly.size());
  for (Index j = 0; j < ly.size(); ++j) {
    for (Index i = 0; i < lx.size(); ++i) {
      double sum = 0.0;
      for (Index k = 0; k < a.cols(); ++k) sum += a(i, k) * b(j, k);
      out(i, j) = sum;
    }
  }
  return out;
}

}  // namespace harmalign
