#include <doctest.h>

#include <cmath>
#include <random>

#include "harmalign/error.hpp"
#include "harmalign/graph.hpp"
#include "support.hpp"

using namespace harmalign;

namespace {

MatrixXd line(std::initializer_list<double> xs) {
  MatrixXd m(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

MatrixXd random_points(Index n, Index d, unsigned seed) {
  std::mt19937_64 gen(seed);
  return oracle::gaussian(n, d, gen);
}

void check_graph_invariants(const KernelGraph& g) {
  const Index n = g.size();
  CHECK((g.weights - g.weights.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  for (Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Index j = 0; j < n; ++j) row += g.weights(i, j);
    CHECK(std::abs(g.degrees(i) - row) <= 1e-10 * row);
  }
  MatrixXd expected(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      expected(i, j) = (i == j ? 1.0 : 0.0) -
                       g.weights(i, j) / std::sqrt(g.degrees(i) * g.degrees(j));
  CHECK((g.laplacian - expected).cwiseAbs().maxCoeff() <= 1e-12);
  const auto [values, vectors] = oracle::jacobi_eigen(g.laplacian);
  CHECK(values.maxCoeff() <= 2.0 + 1e-10);
  CHECK(values.minCoeff() >= -1e-10);
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("adaptive bandwidth on a line") {
    const MatrixXd x = line({0, 1, 3});
    const VectorXd k1 = adaptive_bandwidth(x, 1);
    CHECK(k1(0) == doctest::Approx(1));
    CHECK(k1(1) == doctest::Approx(1));
    CHECK(k1(2) == doctest::Approx(2));
    const VectorXd k2 = adaptive_bandwidth(x, 2);
    CHECK(k2(0) == doctest::Approx(3));
    CHECK(k2(1) == doctest::Approx(2));
    CHECK(k2(2) == doctest::Approx(3));
  }

  TEST_CASE("adaptive bandwidth errors") {
    CHECK_THROWS_AS(adaptive_bandwidth(line({0, 1, 3}), 3), Error);
    CHECK_THROWS_AS(adaptive_bandwidth(line({0, 1, 3}), 0), Error);
    try {
      adaptive_bandwidth(line({0, 0, 3}), 1);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("fixed bandwidth") != std::string::npos);
    }
  }

  TEST_CASE("fixed-bandwidth kernel at squared distance 2 eps is exp(-1)") {
    const double sigma = 0.7;
    MatrixXd x(2, 1);
    x << 0.0, std::sqrt(2.0) * sigma;
    const auto g = gauss_kernel_graph(x, FixedBandwidth{sigma});
    CHECK(g.weights(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(g.weights(0, 0) == 1.0);
    CHECK(g.weights(1, 1) == 1.0);
  }

  TEST_CASE("adaptive kernel matches the formula entry by entry") {
    const MatrixXd x = random_points(12, 3, 1);
    const int k = 4;
    const auto g = gauss_kernel_graph(x, AdaptiveBandwidth{k});
    // Oracle bandwidths by sorting full distance rows.
    VectorXd eps(12);
    for (Index i = 0; i < 12; ++i) {
      std::vector<double> d;
      for (Index j = 0; j < 12; ++j)
        if (j != i) d.push_back(std::sqrt(oracle::sq_dist(x, i, x, j)));
      std::sort(d.begin(), d.end());
      eps(i) = d[k - 1] * d[k - 1];
    }
    for (Index i = 0; i < 12; ++i) {
      for (Index j = 0; j < 12; ++j) {
        const double d2 = oracle::sq_dist(x, i, x, j);
        const double w = 0.5 * (std::exp(-d2 / (2 * eps(i))) + std::exp(-d2 / (2 * eps(j))));
        CHECK(g.weights(i, j) == doctest::Approx(w).epsilon(1e-13));
      }
    }
    check_graph_invariants(g);
  }

  TEST_CASE("two-point all-ones kernel: hand Laplacian and spectrum") {
    MatrixXd w(2, 2);
    w << 1, 1, 1, 1;
    const auto g = graph_from_weights(w);
    MatrixXd expected(2, 2);
    expected << 0.5, -0.5, -0.5, 0.5;
    CHECK((g.laplacian - expected).cwiseAbs().maxCoeff() <= 1e-15);
    const auto [values, vectors] = oracle::jacobi_eigen(g.laplacian);
    CHECK(values(0) == doctest::Approx(1.0));
    CHECK(std::abs(values(1)) <= 1e-15);
    const MatrixXd p = diffusion_operator(g);
    CHECK((p.array() - 0.5).abs().maxCoeff() == 0.0);
  }

  TEST_CASE("invariants on random data, both kernels and bandwidth modes") {
    const MatrixXd x = random_points(20, 4, 2);
    check_graph_invariants(gauss_kernel_graph(x, AdaptiveBandwidth{5}));
    check_graph_invariants(gauss_kernel_graph(x, FixedBandwidth{1.3}));
    check_graph_invariants(anisotropic_kernel_graph(x, 2.0));
    // Scaling every bandwidth by the same constant keeps the invariants.
    check_graph_invariants(gauss_kernel_graph(x, FixedBandwidth{3.9}));
    check_graph_invariants(anisotropic_kernel_graph(x, 18.0));
  }

  TEST_CASE("anisotropic kernel: direct evaluation on the line {0, 1, 2}") {
    const auto g = anisotropic_kernel_graph(line({0, 1, 2}), 1.0);
    const double e1 = std::exp(-1.0), e4 = std::exp(-4.0);
    const double r[3] = {1 + e1 + e4, 1 + 2 * e1, 1 + e1 + e4};
    const double gm[3][3] = {{1, e1, e4}, {e1, 1, e1}, {e4, e1, 1}};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(g.weights(i, j) == doctest::Approx(gm[i][j] / (r[i] * r[j])).epsilon(1e-14));
  }

  TEST_CASE("anisotropic kernel: equidistant points give a constant off-diagonal") {
    // Vertices of a regular simplex: all pairwise distances equal.
    const MatrixXd x = MatrixXd::Identity(4, 4);
    const auto g = anisotropic_kernel_graph(x, 0.8);
    const double off = g.weights(0, 1);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j)
        if (i != j) CHECK(g.weights(i, j) == doctest::Approx(off).epsilon(1e-14));
    CHECK_THROWS_AS(anisotropic_kernel_graph(x, 0.0), Error);
    CHECK_THROWS_AS(anisotropic_kernel_graph(x, -1.0), Error);
  }

  TEST_CASE("diffusion operator is row stochastic with a constant top eigenvector") {
    const auto g = gauss_kernel_graph(random_points(15, 2, 3), AdaptiveBandwidth{4});
    const MatrixXd p = diffusion_operator(g);
    CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);

    Eigen::EigenSolver<MatrixXd> general(p);
    Index top = 0;
    general.eigenvalues().real().maxCoeff(&top);
    CHECK(general.eigenvalues()(top).real() == doctest::Approx(1.0));
    VectorXd v = general.eigenvectors().col(top).real();
    v /= v(0);
    CHECK((v.array() - 1.0).abs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("spectrum of I - L equals the spectrum of P") {
    for (unsigned seed = 0; seed < 5; ++seed) {
      const auto g = gauss_kernel_graph(random_points(18, 3, 10 + seed), AdaptiveBandwidth{5});
      const MatrixXd a = MatrixXd::Identity(18, 18) - g.laplacian;
      const auto [sym, vectors] = oracle::jacobi_eigen(a);
      Eigen::EigenSolver<MatrixXd> general(diffusion_operator(g));
      std::vector<double> pv;
      for (Index i = 0; i < 18; ++i) {
        CHECK(std::abs(general.eigenvalues()(i).imag()) <= 1e-8);
        pv.push_back(general.eigenvalues()(i).real());
      }
      std::sort(pv.rbegin(), pv.rend());
      for (Index i = 0; i < 18; ++i) CHECK(std::abs(sym(i) - pv[i]) <= 1e-8);
    }
  }

  TEST_CASE("normalized adjacency is exactly symmetric and equals I - L") {
    const auto g = gauss_kernel_graph(random_points(25, 3, 4), AdaptiveBandwidth{6});
    const MatrixXd a = normalized_adjacency(g);
    CHECK(a == a.transpose());
    CHECK((a - (MatrixXd::Identity(25, 25) - g.laplacian)).cwiseAbs().maxCoeff() <= 1e-14);
  }

  TEST_CASE("permutation equivariance is exact") {
    const MatrixXd x = random_points(30, 3, 5);
    std::vector<Index> perm(30);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 gen(9);
    std::shuffle(perm.begin(), perm.end(), gen);
    MatrixXd px(30, 3);
    for (Index i = 0; i < 30; ++i) px.row(i) = x.row(perm[i]);
    const auto g = gauss_kernel_graph(x, AdaptiveBandwidth{7});
    const auto pg = gauss_kernel_graph(px, AdaptiveBandwidth{7});
    bool exact = true;
    for (Index i = 0; i < 30; ++i)
      for (Index j = 0; j < 30; ++j) exact = exact && pg.weights(i, j) == g.weights(perm[i], perm[j]);
    CHECK(exact);
  }

  TEST_CASE("degenerate inputs") {
    MatrixXd w = MatrixXd::Identity(3, 3);
    w(2, 2) = 0.0;
    CHECK_THROWS_AS(graph_from_weights(w), Error);
    CHECK_THROWS_AS(gauss_kernel_graph(line({0, 1, 2}), FixedBandwidth{0.0}), Error);
    CHECK_THROWS_AS(gauss_kernel_graph(line({0, 1, 2}), AdaptiveBandwidth{3}), Error);
    // Far-apart points underflow the kernel: only self-loops remain, degrees stay positive.
    const auto g = gauss_kernel_graph(line({0, 1e6}), FixedBandwidth{1e-3});
    CHECK(g.weights(0, 1) == 0.0);
    CHECK(g.degrees(0) == 1.0);
  }

  TEST_CASE("anisotropy knob accepts only the value implied by the kernel") {
    const MatrixXd x = random_points(10, 2, 6);
    KernelParams p;
    p.bandwidth = AdaptiveBandwidth{3};
    p.anisotropy = 0.0;
    CHECK_NOTHROW(build_graph(x, p));
    p.anisotropy = 0.5;
    CHECK_THROWS_AS(build_graph(x, p), Unsupported);
    p.kind = KernelKind::anisotropic;
    CHECK_THROWS_AS(build_graph(x, p), Unsupported);
    p.anisotropy = 1.0;
    CHECK_NOTHROW(build_graph(x, p));
  }

  TEST_CASE("anisotropic kernel with adaptive bandwidth uses sigma = 2 median(eps)") {
    const MatrixXd x = random_points(11, 2, 7);
    KernelParams p;
    p.kind = KernelKind::anisotropic;
    p.bandwidth = AdaptiveBandwidth{3};
    const VectorXd s = adaptive_bandwidth(x, 3);
    std::vector<double> eps(s.data(), s.data() + s.size());
    for (double& e : eps) e *= e;
    std::sort(eps.begin(), eps.end());
    const auto expected = anisotropic_kernel_graph(x, 2.0 * eps[5]);
    CHECK((build_graph(x, p).weights - expected.weights).cwiseAbs().maxCoeff() <= 1e-15);
  }
}
