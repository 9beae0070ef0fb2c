#include "harmalign/align.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <string>

#include "harmalign/error.hpp"

namespace harmalign {

void validate(const AlignmentParams& params) {
  require_bands(params.bands);
  if (params.diffusion_time < 0) {
    throw Error("diffusion time must be >= 0, got " + std::to_string(params.diffusion_time));
  }
  if (params.rank && *params.rank < 2) {
    throw Error("rank must be >= 2 (the trivial eigenpair is dropped), got " +
                std::to_string(*params.rank));
  }
}

std::string to_string(KernelKind kind) {
  return kind == KernelKind::symmetric_gaussian ? "alg2" : "eq1";
}

std::string to_string(WindowSet set) { return set == WindowSet::all ? "all" : "skip-lowest"; }

std::string to_string(CoordinateScaling s) {
  switch (s) {
    case CoordinateScaling::inverse_sqrt_degree:
      return "inverse-sqrt-degree";
    case CoordinateScaling::stationary:
      return "stationary";
    case CoordinateScaling::sqrt_degree:
      return "sqrt-degree";
  }
  return "?";
}

KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "alg2") return KernelKind::symmetric_gaussian;
  if (name == "eq1") return KernelKind::anisotropic;
  throw Error("unknown kernel '" + name + "' (expected alg2 or eq1)");
}

WindowSet parse_window_set(const std::string& name) {
  if (name == "all") return WindowSet::all;
  if (name == "skip-lowest") return WindowSet::skip_lowest;
  throw Error("unknown window set '" + name + "' (expected all or skip-lowest)");
}

CoordinateScaling parse_scaling(const std::string& name) {
  if (name == "inverse-sqrt-degree") return CoordinateScaling::inverse_sqrt_degree;
  if (name == "stationary") return CoordinateScaling::stationary;
  if (name == "sqrt-degree") return CoordinateScaling::sqrt_degree;
  throw Error("unknown scaling '" + name +
              "' (expected inverse-sqrt-degree, stationary or sqrt-degree)");
}

MatrixXd gft_features(const MatrixXd& basis, const MatrixXd& features) {
  if (basis.rows() != features.rows()) {
    throw Error("gft_features: basis has " + std::to_string(basis.rows()) + " rows, data has " +
                std::to_string(features.rows()));
  }
  return basis.transpose() * features;
}

MatrixXd standardize_columns(const MatrixXd& features) {
  MatrixXd out = features.rowwise() - features.colwise().mean();
  for (Index j = 0; j < out.cols(); ++j) {
    const double sd = std::sqrt(out.col(j).squaredNorm() / static_cast<double>(out.rows()));
    if (sd > 0.0) out.col(j) /= sd;
  }
  return out;
}

PreparedDataset prepare_from_basis(FourierBasis basis, const MatrixXd& points,
                                   const AlignmentParams& params) {
  validate(params);
  if (basis.size() != points.rows()) {
    throw Error("basis has " + std::to_string(basis.size()) + " rows, data has " +
                std::to_string(points.rows()));
  }
  apply_sign_convention(basis.vectors);
  PreparedDataset out;
  out.frame = coordinate_frame(basis, params.scaling);
  out.coefficients = params.standardize_features
                         ? gft_features(basis.vectors, standardize_columns(points))
                         : gft_features(basis.vectors, points);
  out.basis = std::move(basis);
  return out;
}

PreparedDataset prepare_dataset(const MatrixXd& points, const AlignmentParams& params) {
  validate(params);
  EigenOptions options;
  options.rank = params.rank ? params.rank : default_rank(points.rows());
  options.seed = params.seed;
  const KernelGraph graph = build_graph(points, params.kernel);
  return prepare_from_basis(drop_trivial(fourier_basis(graph, options)), points, params);
}

MatrixXd bandlimited_correlation(const MatrixXd& x_hat, const MatrixXd& y_hat,
                                 const MatrixXd& weights) {
  if (x_hat.cols() != y_hat.cols()) {
    throw Error("bandlimited_correlation: feature counts differ (" + std::to_string(x_hat.cols()) +
                " vs " + std::to_string(y_hat.cols()) + ")");
  }
  if (weights.rows() != x_hat.rows() || weights.cols() != y_hat.rows()) {
    throw Error("bandlimited_correlation: weights are " + std::to_string(weights.rows()) + "x" +
                std::to_string(weights.cols()) + ", expected " + std::to_string(x_hat.rows()) +
                "x" + std::to_string(y_hat.rows()));
  }
  MatrixXd c = x_hat * y_hat.transpose();
  c.array() *= weights.array();
  return c;
}

Orthogonalized orthogonalize_with_rank(const MatrixXd& c, const OrthogonalizeOptions& options) {
  if (!c.allFinite()) throw Error("orthogonalize: correlation matrix has non-finite entries");
  const Index rows = c.rows();
  const Index cols = c.cols();
  Eigen::BDCSVD<MatrixXd> svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw Error("orthogonalize: SVD failed");
  const VectorXd& sigma = svd.singularValues();
  const double cutoff = sigma.size() > 0 ? options.rank_tolerance * sigma(0) : 0.0;
  Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > cutoff) ++rank;

  const MatrixXd& u = svd.matrixU();
  const MatrixXd& v = svd.matrixV();
  Orthogonalized out;
  out.rank = rank;
  out.transform = u.leftCols(rank) * v.leftCols(rank).transpose();
  if (rank < std::min(rows, cols)) {
    const auto u_null = u.rightCols(rows - rank);
    const auto v_null = v.rightCols(cols - rank);
    const MatrixXd pairing = u_null.transpose() * MatrixXd::Identity(rows, cols) * v_null;
    Eigen::BDCSVD<MatrixXd> polar(pairing, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (polar.info() != Eigen::Success) throw Error("orthogonalize: SVD failed");
    out.transform += u_null * (polar.matrixU() * polar.matrixV().transpose()) * v_null.transpose();
  }
  return out;
}

MatrixXd orthogonalize(const MatrixXd& c, const OrthogonalizeOptions& options) {
  return orthogonalize_with_rank(c, options).transform;
}

double orthogonality_residual(const MatrixXd& t) {
  if (t.size() == 0) return 0.0;
  if (t.rows() >= t.cols()) {
    return (t.transpose() * t - MatrixXd::Identity(t.cols(), t.cols())).cwiseAbs().maxCoeff();
  }
  return (t * t.transpose() - MatrixXd::Identity(t.rows(), t.rows())).cwiseAbs().maxCoeff();
}

namespace {

/// frame * transform * diag(values)^t; shared by the pairwise and the
/// multi-dataset assembly so both produce identical bits.
MatrixXd coordinate_block(const MatrixXd& frame, const MatrixXd* transform,
                          const VectorXd& values, int t) {
  MatrixXd out = transform ? MatrixXd(frame * *transform) : frame;
  if (t > 0) out = out * values.array().pow(static_cast<double>(t)).matrix().asDiagonal();
  return out;
}

}  // namespace

MatrixXd unified_diffusion_map(const MatrixXd& frame_x, const MatrixXd& frame_y,
                               const VectorXd& values_x, const VectorXd& values_y,
                               const MatrixXd& transform, int t) {
  const Index rx = frame_x.cols();
  const Index ry = frame_y.cols();
  if (values_x.size() != rx || values_y.size() != ry || transform.rows() != rx ||
      transform.cols() != ry) {
    throw Error("unified_diffusion_map: shape mismatch (frames " + std::to_string(rx) + ", " +
                std::to_string(ry) + " columns; T " + std::to_string(transform.rows()) + "x" +
                std::to_string(transform.cols()) + ")");
  }
  if (t < 0) throw Error("diffusion time must be >= 0");
  const Index nx = frame_x.rows();
  const Index ny = frame_y.rows();
  const MatrixXd adjoint = transform.transpose();
  MatrixXd out(nx + ny, rx + ry);
  out.topLeftCorner(nx, rx) = coordinate_block(frame_x, nullptr, values_x, t);
  out.topRightCorner(nx, ry) = coordinate_block(frame_x, &transform, values_y, t);
  out.bottomLeftCorner(ny, rx) = coordinate_block(frame_y, &adjoint, values_x, t);
  out.bottomRightCorner(ny, ry) = coordinate_block(frame_y, nullptr, values_y, t);
  return out;
}

AlignmentResult align_prepared(const PreparedDataset& x, const PreparedDataset& y,
                               const AlignmentParams& params) {
  validate(params);
  const MatrixXd weights =
      bandlimiting_weights(x.basis.values, y.basis.values, params.bands, params.windows);
  AlignmentResult out;
  out.correlation = bandlimited_correlation(x.coefficients, y.coefficients, weights);
  Orthogonalized ortho = orthogonalize_with_rank(out.correlation);
  out.transform = std::move(ortho.transform);
  out.embedding = unified_diffusion_map(x.frame, y.frame, x.basis.values, y.basis.values,
                                        out.transform, params.diffusion_time);
  out.x_rows = {0, x.size()};
  out.y_rows = {x.size(), y.size()};
  out.x_cols = {0, x.rank()};
  out.y_cols = {x.rank(), y.rank()};
  out.diagnostics.x = x.basis.diagnostics;
  out.diagnostics.y = y.basis.diagnostics;
  out.diagnostics.x_values = x.basis.values;
  out.diagnostics.y_values = y.basis.values;
  out.diagnostics.correlation_rank = ortho.rank;
  out.diagnostics.orthogonality_residual = orthogonality_residual(out.transform);
  return out;
}

namespace {

void require_same_width(const std::vector<const MatrixXd*>& datasets) {
  for (std::size_t i = 1; i < datasets.size(); ++i) {
    if (datasets[i]->cols() != datasets[0]->cols()) {
      throw Error("datasets must have the same number of features: dataset 1 has " +
                  std::to_string(datasets[0]->cols()) + ", dataset " + std::to_string(i + 1) +
                  " has " + std::to_string(datasets[i]->cols()));
    }
  }
}

std::vector<PreparedDataset> prepare_all(const std::vector<const MatrixXd*>& datasets,
                                         const AlignmentParams& params) {
  std::vector<std::future<PreparedDataset>> jobs;
  for (const MatrixXd* data : datasets) {
    jobs.push_back(std::async(std::launch::async,
                              [data, &params] { return prepare_dataset(*data, params); }));
  }
  std::vector<PreparedDataset> out;
  for (auto& job : jobs) out.push_back(job.get());
  return out;
}

}  // namespace

AlignmentResult harmonic_alignment(const MatrixXd& x, const MatrixXd& y,
                                   const AlignmentParams& params) {
  validate(params);
  require_same_width({&x, &y});
  const auto prepared = prepare_all({&x, &y}, params);
  return align_prepared(prepared[0], prepared[1], params);
}

AlignmentResult harmonic_alignment(const DataMatrix& x, const DataMatrix& y,
                                   const AlignmentParams& params) {
  return harmonic_alignment(x.values, y.values, params);
}

MultiAlignmentResult multi_align_prepared(const std::vector<PreparedDataset>& datasets,
                                          const AlignmentParams& params) {
  validate(params);
  const auto n = datasets.size();
  if (n < 2) throw Error("multi-alignment needs at least 2 datasets, got " + std::to_string(n));
  for (std::size_t i = 1; i < n; ++i) {
    if (datasets[i].coefficients.cols() != datasets[0].coefficients.cols()) {
      throw Error("datasets must have the same number of features");
    }
  }

  MultiAlignmentResult out;
  out.transforms.assign(n, std::vector<MatrixXd>(n));
  Index row = 0;
  Index col = 0;
  for (const auto& d : datasets) {
    out.rows.push_back({row, d.size()});
    out.cols.push_back({col, d.rank()});
    out.spectra.push_back(d.basis.diagnostics);
    out.values.push_back(d.basis.values);
    row += d.size();
    col += d.rank();
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.transforms[i][i] = MatrixXd::Identity(datasets[i].rank(), datasets[i].rank());
    for (std::size_t j = i + 1; j < n; ++j) {
      const MatrixXd weights = bandlimiting_weights(datasets[i].basis.values,
                                                    datasets[j].basis.values, params.bands,
                                                    params.windows);
      out.transforms[i][j] = orthogonalize(
          bandlimited_correlation(datasets[i].coefficients, datasets[j].coefficients, weights));
      out.transforms[j][i] = out.transforms[i][j].transpose();
    }
  }

  out.embedding.resize(row, col);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const MatrixXd* transform = i == j ? nullptr : &out.transforms[i][j];
      out.embedding.block(out.rows[i].start, out.cols[j].start, out.rows[i].size,
                          out.cols[j].size) =
          coordinate_block(datasets[i].frame, transform, datasets[j].basis.values,
                           params.diffusion_time);
    }
  }
  return out;
}

MultiAlignmentResult multi_alignment(const std::vector<MatrixXd>& datasets,
                                     const AlignmentParams& params) {
  validate(params);
  if (datasets.size() < 2) {
    throw Error("multi-alignment needs at least 2 datasets, got " +
                std::to_string(datasets.size()));
  }
  std::vector<const MatrixXd*> pointers;
  for (const auto& d : datasets) pointers.push_back(&d);
  require_same_width(pointers);
  return multi_align_prepared(prepare_all(pointers, params), params);
}

MultiAlignmentResult multi_alignment(const std::vector<DataMatrix>& datasets,
                                     const AlignmentParams& params) {
  std::vector<MatrixXd> values;
  values.reserve(datasets.size());
  for (const auto& d : datasets) values.push_back(d.values);
  return multi_alignment(values, params);
}

}  // namespace harmalign
