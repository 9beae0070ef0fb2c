#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "harmalign/align.hpp"
#include "harmalign/baselines.hpp"
#include "harmalign/data.hpp"

namespace harmalign {

/// Haar-distributed orthogonal matrix: QR of a standard Gaussian matrix with
/// the columns of Q multiplied by sign(R_ii).
MatrixXd random_orthogonal(Index d, Rng& rng);

struct Corruption {
  MatrixXd matrix;
  std::vector<Index> preserved;  // identity columns, ascending
};

/// Replaces round(p d / 100) uniformly chosen columns of O_0 by the matching
/// identity columns. p is the percentage of preserved features.
Corruption partial_corruption(const MatrixXd& orthogonal, double preserved_pct, Rng& rng);

/// Gaussian clusters around unit-norm random means (redrawn until every pair
/// of means is at least 2 * spread apart) with covariance spread^2 I.
/// Rows are grouped by class.
DataMatrix synth_dataset(int classes, int per_class, Index d, double spread, Rng& rng);

/// Points on a closed-form smooth 1-D curve in R^d: latent z ~ U[0, 1]
/// mapped through random Fourier features sqrt(2 / d) sin(z w_j + b_j),
/// w_j ~ N(0, frequency^2), b_j ~ U[0, 2 pi). Labels are floor(10 z).
DataMatrix synth_curve(Index n, Index d, double frequency, Rng& rng);

struct Classification {
  std::vector<int> predictions;
  double accuracy = 0.0;
};

/// Lazy k-NN vote. Ties between classes go to the class with the smaller
/// summed distance, then to the lower label.
std::vector<int> knn_predict(const MatrixXd& train, const std::vector<int>& train_labels,
                             const MatrixXd& test, int k);
Classification knn_classify(const MatrixXd& train, const std::vector<int>& train_labels,
                            const MatrixXd& test, const std::vector<int>& test_labels, int k);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Mean over rows i of |kNN_A(i) & kNN_B(i)| / k, neighbourhoods taken within
/// each embedding (self excluded); rows correspond by index.
double neighborhood_overlap(const MatrixXd& a, const MatrixXd& b, int k);

/// Cross-dataset variant: for every i, the k rows of `b` nearest to a_i
/// versus the k rows of `b` nearest to b_i, both excluding b_i itself.
/// Measures whether a point lands among its counterpart's neighbours.
double cross_neighborhood_overlap(const MatrixXd& a, const MatrixXd& b, int k);

/// Fraction of rows i whose nearest row of `b` is b_i.
double self_match_rate(const MatrixXd& a, const MatrixXd& b);

/// Row i is the mean of train_data rows among the k nearest train_aligned
/// rows that carry the neighbourhood's winning label.
MatrixXd class_average_reconstruction(const MatrixXd& test_aligned, const MatrixXd& train_aligned,
                                      const MatrixXd& train_data,
                                      const std::vector<int>& train_labels, int k);

/// Pearson correlation of corresponding rows.
VectorXd row_correlations(const MatrixXd& a, const MatrixXd& b);

enum class Method { none, harmonic, mnn };

std::string to_string(Method method);
Method parse_method(const std::string& name);

struct SyntheticSource {
  int classes = 10;
  Index dims = 100;
  double spread = 0.15;
};

struct ExperimentConfig {
  /// CSV with a label column; when unset the synthetic source is used.
  std::optional<std::filesystem::path> data_path;
  SyntheticSource synthetic;
  Index n1 = 1000;
  Index n2 = 1000;
  std::vector<Method> methods{Method::none, Method::harmonic, Method::mnn};
  AlignmentParams align;
  MnnParams mnn;
  int trials = 3;
  int knn = 5;
  std::uint64_t seed = 1;
  /// Corruption sweep: percentages of preserved (identity) columns.
  std::vector<double> preserved_pcts{0,  5,  10, 15, 20, 25, 30, 35, 40, 45, 50,
                                     55, 60, 65, 70, 75, 80, 85, 90, 95, 100};
  /// Transfer: test-set sizes as multiples of n1, at one preserved percentage.
  std::vector<int> ratios{1, 2, 4, 8};
  double transfer_preserved_pct = 35;
};

void validate(const ExperimentConfig& config);

Report::Json to_json(const AlignmentParams& params);
Report::Json to_json(const MnnParams& params);

/// Full effective configuration as JSON (embedded in every report).
Report::Json config_to_json(const ExperimentConfig& config);

/// One trial of one method: accuracy of classifying `test` (corrupted,
/// labels used only for scoring) from the labeled reference `train`.
double method_accuracy(Method method, const DataMatrix& train, const DataMatrix& test,
                       const ExperimentConfig& config, Report::Json* diagnostics = nullptr);

/// Sweep over preserved percentages. Trial rows carry p, method, trial, accuracy.
Report corruption_experiment(const ExperimentConfig& config);

/// Imbalanced transfer. Per trial one labeled reference of n1 points, one
/// corruption and one pool of test points; the test set for ratio r is the
/// first r * n1 points of that pool, so ratios differ only in size.
Report transfer_experiment(const ExperimentConfig& config);

/// "p,method,trial,accuracy" (corruption) or "ratio,method,trial,accuracy"
/// (transfer) rows from a report.
std::string plot_csv(const Report& report);

}  // namespace harmalign
