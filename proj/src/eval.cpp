#include "harmalign/eval.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <future>
#include <map>
#include <numbers>
#include <sstream>

#include "harmalign/error.hpp"
#include "harmalign/neighbors.hpp"

namespace harmalign {

MatrixXd random_orthogonal(Index d, Rng& rng) {
  if (d < 1) throw Error("random_orthogonal: dimension must be >= 1");
  const MatrixXd gaussian = rng.normal_matrix(d, d);
  const Eigen::HouseholderQR<MatrixXd> qr(gaussian);
  MatrixXd q = qr.householderQ();
  const VectorXd r = qr.matrixQR().diagonal();
  for (Index j = 0; j < d; ++j) {
    if (r(j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Corruption partial_corruption(const MatrixXd& orthogonal, double preserved_pct, Rng& rng) {
  const Index d = orthogonal.rows();
  if (orthogonal.cols() != d) throw Error("partial_corruption: matrix must be square");
  if (!(preserved_pct >= 0.0 && preserved_pct <= 100.0)) {
    throw Error("preserved percentage must be in [0, 100], got " + format_double(preserved_pct));
  }
  const auto count = static_cast<Index>(std::lround(preserved_pct * static_cast<double>(d) / 100.0));
  Corruption out{orthogonal, rng.sample_without_replacement(d, count)};
  std::sort(out.preserved.begin(), out.preserved.end());
  for (Index j : out.preserved) {
    out.matrix.col(j).setZero();
    out.matrix(j, j) = 1.0;
  }
  return out;
}

DataMatrix synth_dataset(int classes, int per_class, Index d, double spread, Rng& rng) {
  if (classes < 2) throw Error("synth_dataset: need at least 2 classes");
  if (d < classes) throw Error("synth_dataset: need d >= classes");
  if (per_class < 1) throw Error("synth_dataset: need at least 1 point per class");
  if (!(spread >= 0.0)) throw Error("synth_dataset: spread must be >= 0");

  MatrixXd means;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) {
      throw Error("synth_dataset: could not place class means " + format_double(2 * spread) +
                  " apart; reduce the spread");
    }
    means = rng.normal_matrix(classes, d);
    means.rowwise().normalize();
    double closest = std::numeric_limits<double>::infinity();
    for (int a = 0; a < classes; ++a) {
      for (int b = a + 1; b < classes; ++b) {
        closest = std::min(closest, (means.row(a) - means.row(b)).norm());
      }
    }
    if (closest >= 2.0 * spread) break;
  }

  const Index n = static_cast<Index>(classes) * per_class;
  MatrixXd values = spread * rng.normal_matrix(n, d);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i / per_class);
    values.row(i) += means.row(c);
    labels[static_cast<std::size_t>(i)] = c;
  }
  return make_data_matrix(std::move(values), std::move(labels), "synthetic");
}

DataMatrix synth_curve(Index n, Index d, double frequency, Rng& rng) {
  if (n < 2 || d < 1) throw Error("synth_curve: need n >= 2 and d >= 1");
  VectorXd z(n);
  for (Index i = 0; i < n; ++i) z(i) = rng.uniform();
  VectorXd omega(d);
  VectorXd phase(d);
  for (Index j = 0; j < d; ++j) omega(j) = frequency * rng.normal();
  for (Index j = 0; j < d; ++j) phase(j) = 2.0 * std::numbers::pi * rng.uniform();
  const double scale = std::sqrt(2.0 / static_cast<double>(d));
  MatrixXd values(n, d);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) values(i, j) = scale * std::sin(z(i) * omega(j) + phase(j));
    labels[static_cast<std::size_t>(i)] = std::min(9, static_cast<int>(10.0 * z(i)));
  }
  return make_data_matrix(std::move(values), std::move(labels), "curve");
}

namespace {

/// Majority label among `neighbours` (row i of sq_dist); ties go to the
/// smaller summed distance, then the lower label.
int vote(const MatrixXd& sq_dist, Index i, const std::vector<Index>& neighbours,
         const std::vector<int>& labels) {
  std::map<int, std::pair<int, double>> tally;
  for (Index j : neighbours) {
    auto& [count, distance] = tally[labels[static_cast<std::size_t>(j)]];
    ++count;
    distance += std::sqrt(sq_dist(i, j));
  }
  int best = tally.begin()->first;
  auto [best_count, best_distance] = tally.begin()->second;
  for (const auto& [label, entry] : tally) {
    if (entry.first > best_count || (entry.first == best_count && entry.second < best_distance)) {
      best = label;
      best_count = entry.first;
      best_distance = entry.second;
    }
  }
  return best;
}

void require_knn_inputs(const MatrixXd& train, const std::vector<int>& labels,
                        const MatrixXd& test, int k) {
  if (static_cast<Index>(labels.size()) != train.rows()) {
    throw Error("kNN: " + std::to_string(labels.size()) + " labels for " +
                std::to_string(train.rows()) + " training rows");
  }
  if (train.cols() != test.cols()) {
    throw Error("kNN: train has " + std::to_string(train.cols()) + " columns, test has " +
                std::to_string(test.cols()));
  }
  if (k < 1 || k > train.rows()) {
    throw Error("kNN: k = " + std::to_string(k) + " but the training set has " +
                std::to_string(train.rows()) + " rows");
  }
}

std::vector<Index> sorted(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  return v;
}

double mean_overlap(const std::vector<std::vector<Index>>& a,
                    const std::vector<std::vector<Index>>& b, int k) {
  double total = 0.0;
  std::vector<Index> common;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto sa = sorted(a[i]);
    const auto sb = sorted(b[i]);
    common.clear();
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
    total += static_cast<double>(common.size()) / k;
  }
  return total / static_cast<double>(a.size());
}

void require_overlap_inputs(const MatrixXd& a, const MatrixXd& b, int k) {
  if (a.rows() != b.rows()) {
    throw Error("overlap needs equal row counts (" + std::to_string(a.rows()) + " vs " +
                std::to_string(b.rows()) + ")");
  }
  if (k < 1 || k >= a.rows()) {
    throw Error("overlap needs 1 <= k < N (k = " + std::to_string(k) + ", N = " +
                std::to_string(a.rows()) + ")");
  }
}

}  // namespace

std::vector<int> knn_predict(const MatrixXd& train, const std::vector<int>& train_labels,
                             const MatrixXd& test, int k) {
  require_knn_inputs(train, train_labels, test, k);
  const MatrixXd d = cross_sq_distances(test, train);
  const auto neighbours = nearest_neighbors(d, k);
  std::vector<int> out(static_cast<std::size_t>(test.rows()));
  for (Index i = 0; i < test.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = vote(d, i, neighbours[static_cast<std::size_t>(i)], train_labels);
  }
  return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw Error("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                std::to_string(truth.size()) + " labels");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

Classification knn_classify(const MatrixXd& train, const std::vector<int>& train_labels,
                            const MatrixXd& test, const std::vector<int>& test_labels, int k) {
  Classification out;
  out.predictions = knn_predict(train, train_labels, test, k);
  out.accuracy = accuracy(out.predictions, test_labels);
  return out;
}

double neighborhood_overlap(const MatrixXd& a, const MatrixXd& b, int k) {
  require_overlap_inputs(a, b, k);
  const auto na = nearest_neighbors(cross_sq_distances(a, a), k, true);
  const auto nb = nearest_neighbors(cross_sq_distances(b, b), k, true);
  return mean_overlap(na, nb, k);
}

double cross_neighborhood_overlap(const MatrixXd& a, const MatrixXd& b, int k) {
  require_overlap_inputs(a, b, k);
  const auto na = nearest_neighbors(cross_sq_distances(a, b), k, true);
  const auto nb = nearest_neighbors(cross_sq_distances(b, b), k, true);
  return mean_overlap(na, nb, k);
}

double self_match_rate(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows()) throw Error("self_match_rate needs equal row counts");
  const auto nearest = nearest_neighbors(cross_sq_distances(a, b), 1);
  Index hits = 0;
  for (Index i = 0; i < a.rows(); ++i) hits += nearest[static_cast<std::size_t>(i)][0] == i;
  return static_cast<double>(hits) / static_cast<double>(a.rows());
}

MatrixXd class_average_reconstruction(const MatrixXd& test_aligned, const MatrixXd& train_aligned,
                                      const MatrixXd& train_data,
                                      const std::vector<int>& train_labels, int k) {
  require_knn_inputs(train_aligned, train_labels, test_aligned, k);
  if (train_data.rows() != train_aligned.rows()) {
    throw Error("reconstruction: train data and train embedding differ in row count");
  }
  const MatrixXd d = cross_sq_distances(test_aligned, train_aligned);
  const auto neighbours = nearest_neighbors(d, k);
  MatrixXd out = MatrixXd::Zero(test_aligned.rows(), train_data.cols());
  for (Index i = 0; i < test_aligned.rows(); ++i) {
    const auto& hood = neighbours[static_cast<std::size_t>(i)];
    const int label = vote(d, i, hood, train_labels);
    int count = 0;
    for (Index j : hood) {
      if (train_labels[static_cast<std::size_t>(j)] != label) continue;
      out.row(i) += train_data.row(j);
      ++count;
    }
    out.row(i) /= count;
  }
  return out;
}

VectorXd row_correlations(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error("row_correlations: shapes differ");
  }
  VectorXd out(a.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    const VectorXd x = a.row(i).array() - a.row(i).mean();
    const VectorXd y = b.row(i).array() - b.row(i).mean();
    const double denom = x.norm() * y.norm();
    out(i) = denom > 0.0 ? x.dot(y) / denom : 0.0;
  }
  return out;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::none:
      return "none";
    case Method::harmonic:
      return "harmonic";
    case Method::mnn:
      return "mnn";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "none" || name == "unaligned") return Method::none;
  if (name == "harmonic") return Method::harmonic;
  if (name == "mnn") return Method::mnn;
  throw Error("unknown method '" + name + "' (expected none, harmonic or mnn)");
}

void validate(const ExperimentConfig& config) {
  validate(config.align);
  if (config.trials < 1) throw Error("trials must be >= 1");
  if (config.methods.empty()) throw Error("at least one method is required");
  if (config.n1 < 2 || config.n2 < 2) throw Error("dataset sizes must be >= 2");
  if (config.knn < 1) throw Error("kNN k must be >= 1");
  if (config.synthetic.classes < 2) throw Error("need at least 2 classes");
  if (config.synthetic.dims < config.synthetic.classes) throw Error("need dims >= classes");
  for (double p : config.preserved_pcts) {
    if (!(p >= 0.0 && p <= 100.0)) throw Error("preserved percentages must lie in [0, 100]");
  }
  if (config.preserved_pcts.empty()) throw Error("the corruption sweep is empty");
  if (!(config.transfer_preserved_pct >= 0.0 && config.transfer_preserved_pct <= 100.0)) {
    throw Error("preserved percentages must lie in [0, 100]");
  }
  if (config.ratios.empty()) throw Error("the transfer ratio list is empty");
  for (int r : config.ratios) {
    if (r < 1) throw Error("transfer ratios must be >= 1");
  }
}

Report::Json to_json(const AlignmentParams& params) {
  Report::Json j;
  j["bands"] = params.bands;
  j["t"] = params.diffusion_time;
  j["kernel"] = to_string(params.kernel.kind);
  if (const auto* fixed = std::get_if<FixedBandwidth>(&params.kernel.bandwidth)) {
    j["sigma"] = fixed->sigma;
  } else {
    j["knn_bandwidth"] = std::get<AdaptiveBandwidth>(params.kernel.bandwidth).k;
  }
  j["anisotropy"] = params.kernel.anisotropy ? Report::Json(*params.kernel.anisotropy)
                                             : Report::Json(nullptr);
  j["rank"] = params.rank ? Report::Json(*params.rank) : Report::Json(nullptr);
  j["windows"] = to_string(params.windows);
  j["scaling"] = to_string(params.scaling);
  j["standardize"] = params.standardize_features;
  j["eigen_seed"] = params.seed;
  return j;
}

Report::Json to_json(const MnnParams& params) {
  Report::Json j;
  j["k"] = params.k;
  j["sigma"] = params.sigma ? Report::Json(*params.sigma) : Report::Json("median");
  j["note"] =
      "approximate MNN reimplementation: no cosine normalization, no per-gene scaling";
  return j;
}

Report::Json config_to_json(const ExperimentConfig& config) {
  Report::Json j;
  j["version"] = std::string(kVersion);
  if (config.data_path) {
    j["data"] = config.data_path->string();
  } else {
    j["data"] = "synthetic";
    j["classes"] = config.synthetic.classes;
    j["dims"] = config.synthetic.dims;
    j["spread"] = config.synthetic.spread;
  }
  j["n1"] = config.n1;
  j["n2"] = config.n2;
  Report::Json methods = Report::Json::array();
  for (Method m : config.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["align"] = to_json(config.align);
  j["mnn"] = to_json(config.mnn);
  j["trials"] = config.trials;
  j["knn"] = config.knn;
  j["seed"] = config.seed;
  j["preserved_pcts"] = config.preserved_pcts;
  j["ratios"] = config.ratios;
  j["transfer_preserved_pct"] = config.transfer_preserved_pct;
  return j;
}

double method_accuracy(Method method, const DataMatrix& train, const DataMatrix& test,
                       const ExperimentConfig& config, Report::Json* diagnostics) {
  if (!train.has_labels() || !test.has_labels()) {
    throw Error("experiments need labeled data");
  }
  switch (method) {
    case Method::none:
      return knn_classify(train.values, *train.labels, test.values, *test.labels, config.knn)
          .accuracy;
    case Method::harmonic: {
      const AlignmentResult r = harmonic_alignment(train, test, config.align);
      if (diagnostics) {
        (*diagnostics)["correlation_rank"] = r.diagnostics.correlation_rank;
        (*diagnostics)["orthogonality_residual"] = r.diagnostics.orthogonality_residual;
        (*diagnostics)["converged"] = r.diagnostics.x.converged && r.diagnostics.y.converged;
      }
      return knn_classify(r.x_embedding(), *train.labels, r.y_embedding(), *test.labels,
                          config.knn)
          .accuracy;
    }
    case Method::mnn: {
      const MnnResult r = mnn_correct(train, test, config.mnn);
      if (diagnostics && r.warning) (*diagnostics)["warning"] = *r.warning;
      return knn_classify(train.values, *train.labels, r.corrected, *test.labels, config.knn)
          .accuracy;
    }
  }
  throw Error("unknown method");
}

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t pct_key(double p) { return std::bit_cast<std::uint64_t>(p); }

/// Labeled pool of `total` points for one trial, in random order.
DataMatrix draw_pool(const ExperimentConfig& config, const std::optional<DataMatrix>& file,
                     Index total, Rng& rng) {
  if (file) {
    if (total > file->rows()) {
      throw Error("data file has " + std::to_string(file->rows()) + " rows, experiment needs " +
                  std::to_string(total));
    }
    return select_rows(*file, rng.sample_without_replacement(file->rows(), total), "pool");
  }
  const auto& s = config.synthetic;
  const int per_class = static_cast<int>((total + s.classes - 1) / s.classes);
  const DataMatrix all = synth_dataset(s.classes, per_class, s.dims, s.spread, rng);
  auto order = rng.permutation(all.rows());
  order.resize(static_cast<std::size_t>(total));
  return select_rows(all, order, "pool");
}

std::vector<Index> range(Index start, Index count) {
  std::vector<Index> out(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = start + i;
  return out;
}

DataMatrix corrupted(const DataMatrix& data, const MatrixXd& corruption) {
  return make_data_matrix(data.values * corruption, data.labels, data.name + "-corrupted");
}

std::optional<DataMatrix> load_source(const ExperimentConfig& config) {
  if (!config.data_path) return std::nullopt;
  DataMatrix data = load_matrix(*config.data_path);
  if (!data.has_labels()) {
    throw Error(config.data_path->string() + ": experiments need a 'label' column");
  }
  return data;
}

Report::Json mean_rows(const Report::Json& trials, const std::string& key) {
  // Keyed by (key value, method) in first-seen order.
  Report::Json out = Report::Json::array();
  std::vector<std::pair<Report::Json, std::string>> seen;
  for (const auto& row : trials) {
    std::pair<Report::Json, std::string> id{row[key], row["method"].get<std::string>()};
    if (std::find(seen.begin(), seen.end(), id) == seen.end()) seen.push_back(id);
  }
  for (const auto& [value, method] : seen) {
    double sum = 0.0;
    int count = 0;
    for (const auto& row : trials) {
      if (row[key] == value && row["method"] == method) {
        sum += row["accuracy"].get<double>();
        ++count;
      }
    }
    Report::Json agg;
    agg[key] = value;
    agg["method"] = method;
    agg["mean_accuracy"] = sum / count;
    agg["trials"] = count;
    out.push_back(agg);
  }
  return out;
}

/// Runs fn(trial) for every trial concurrently and concatenates the
/// returned rows in trial order.
template <typename Fn>
Report::Json run_trials(int trials, Fn fn) {
  std::vector<std::future<Report::Json>> jobs;
  for (int trial = 0; trial < trials; ++trial) {
    jobs.push_back(std::async(std::launch::async, fn, trial));
  }
  Report::Json rows = Report::Json::array();
  for (auto& job : jobs) {
    for (auto& row : job.get()) rows.push_back(std::move(row));
  }
  return rows;
}

Report::Json timed_row(Method method, const DataMatrix& train, const DataMatrix& test,
                       const ExperimentConfig& config) {
  Report::Json row;
  Report::Json diag = Report::Json::object();
  const auto start = Clock::now();
  row["method"] = to_string(method);
  row["accuracy"] = method_accuracy(method, train, test, config, &diag);
  row["seconds"] = std::chrono::duration<double>(Clock::now() - start).count();
  if (!diag.empty()) row["diagnostics"] = diag;
  return row;
}

}  // namespace

Report corruption_experiment(const ExperimentConfig& config) {
  validate(config);
  const auto file = load_source(config);
  Report report;
  report.params() = config_to_json(config);
  report.params()["mode"] = "corruption";

  const Rng base(config.seed);
  report.trials() = run_trials(config.trials, [&](int trial) {
    const auto t = static_cast<std::uint64_t>(trial);
    Rng data_rng = base.derive({t, 0});
    Rng rotation_rng = base.derive({t, 1});
    const DataMatrix pool = draw_pool(config, file, config.n1 + config.n2, data_rng);
    const DataMatrix x = select_rows(pool, range(0, config.n1), "x");
    const DataMatrix y = select_rows(pool, range(config.n1, config.n2), "y");
    const MatrixXd rotation = random_orthogonal(x.cols(), rotation_rng);

    Report::Json rows = Report::Json::array();
    for (double p : config.preserved_pcts) {
      Rng column_rng = base.derive({t, 2, pct_key(p)});
      const DataMatrix yc = corrupted(y, partial_corruption(rotation, p, column_rng).matrix);
      for (Method m : config.methods) {
        Report::Json row;
        row["p"] = p;
        row["trial"] = trial;
        row.update(timed_row(m, x, yc, config));
        rows.push_back(std::move(row));
      }
    }
    return rows;
  });
  report.aggregates() = mean_rows(report.trials(), "p");
  report.diagnostics()["mnn"] = to_json(config.mnn)["note"];
  return report;
}

Report transfer_experiment(const ExperimentConfig& config) {
  validate(config);
  const auto file = load_source(config);
  Report report;
  report.params() = config_to_json(config);
  report.params()["mode"] = "transfer";

  const int max_ratio = *std::max_element(config.ratios.begin(), config.ratios.end());
  const Index test_pool = config.n1 * max_ratio;
  const Rng base(config.seed);
  report.trials() = run_trials(config.trials, [&](int trial) {
    const auto t = static_cast<std::uint64_t>(trial);
    Rng data_rng = base.derive({t, 0});
    Rng rotation_rng = base.derive({t, 1});
    Rng column_rng = base.derive({t, 2, pct_key(config.transfer_preserved_pct)});
    const DataMatrix pool = draw_pool(config, file, config.n1 + test_pool, data_rng);
    const DataMatrix x = select_rows(pool, range(0, config.n1), "x");
    const MatrixXd rotation = random_orthogonal(x.cols(), rotation_rng);
    const MatrixXd corruption =
        partial_corruption(rotation, config.transfer_preserved_pct, column_rng).matrix;
    const DataMatrix tests = corrupted(select_rows(pool, range(config.n1, test_pool)), corruption);

    Report::Json rows = Report::Json::array();
    for (int ratio : config.ratios) {
      const DataMatrix y = select_rows(tests, range(0, config.n1 * ratio), "y");
      for (Method m : config.methods) {
        Report::Json row;
        row["ratio"] = ratio;
        row["trial"] = trial;
        row["test_size"] = y.rows();
        row.update(timed_row(m, x, y, config));
        rows.push_back(std::move(row));
      }
    }
    return rows;
  });
  report.aggregates() = mean_rows(report.trials(), "ratio");
  report.diagnostics()["preserved_pct"] = config.transfer_preserved_pct;
  report.diagnostics()["mnn"] = to_json(config.mnn)["note"];
  return report;
}

std::string plot_csv(const Report& report) {
  const bool transfer = report.params().value("mode", "") == "transfer";
  std::ostringstream out;
  out << (transfer ? "ratio" : "p") << ",method,trial,accuracy\n";
  for (const auto& row : report.trials()) {
    if (transfer) {
      out << row["ratio"].get<int>();
    } else {
      out << format_double(row["p"].get<double>());
    }
    out << ',' << row["method"].get<std::string>() << ',' << row["trial"].get<int>() << ','
        << format_double(row["accuracy"].get<double>()) << '\n';
  }
  return out.str();
}

}  // namespace harmalign
