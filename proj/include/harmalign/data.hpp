#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace harmalign {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr std::string_view kVersion = "0.3.0";

/// Points-by-features matrix with optional non-negative integer class labels.
///
/// Construct through make_data_matrix() (or load_matrix()) so the invariants
/// are checked: at least two rows, at least one column, every entry finite,
/// and one label per row when labels are present.
struct DataMatrix {
  MatrixXd values;
  std::optional<std::vector<int>> labels;
  std::string name;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  bool has_labels() const { return labels.has_value(); }
};

DataMatrix make_data_matrix(MatrixXd values,
                            std::optional<std::vector<int>> labels = std::nullopt,
                            std::string name = {});

/// Returns the subset of rows in the given order, labels included.
DataMatrix select_rows(const DataMatrix& data, const std::vector<Index>& rows,
                       std::string name = {});

enum class MatrixFormat { csv, raw_f64 };

/// Reads a matrix from disk.
///
/// CSV: comma separated, '.' decimal point, at most one header line (detected
/// when its first cell does not parse as a number). A header column named
/// "label" is read as integer class labels instead of a feature.
/// raw-f64: two little-endian uint64 (rows, cols) followed by rows*cols
/// little-endian doubles in row-major order.
DataMatrix load_matrix(const std::filesystem::path& path,
                       MatrixFormat format = MatrixFormat::csv);

/// Writes `text` to `path` through a temporary file in the same directory
/// followed by a rename.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// CSV with an optional header line; values use round-trip formatting.
void write_output(const MatrixXd& matrix, const std::filesystem::path& path,
                  const std::vector<std::string>& header = {});
/// CSV with generated feature names plus a trailing "label" column when the
/// matrix carries labels.
void write_output(const DataMatrix& data, const std::filesystem::path& path);
void write_raw_f64(const MatrixXd& matrix, const std::filesystem::path& path);

/// Counter-based pseudo random generator (SplitMix64).
///
/// Output n is mix(key + (n + 1) * 0x9E3779B97F4A7C15) where mix is the
/// SplitMix64 finalizer and key is derived from the seed and stream id.
/// Integer outputs are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, bound), bound > 0, without modulo bias.
  std::uint64_t below(std::uint64_t bound);

  /// Independent generator keyed by this seed and the given path.
  Rng derive(std::initializer_list<std::uint64_t> path) const;

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<Index> permutation(Index n);
  /// `count` distinct indices from 0..n-1, in draw order.
  std::vector<Index> sample_without_replacement(Index n, Index count);

  MatrixXd normal_matrix(Index rows, Index cols);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_normal_;
};

/// Structured experiment/run report: effective parameters, per-trial rows,
/// aggregate statistics and free-form diagnostics. Serialized as JSON.
class Report {
 public:
  using Json = nlohmann::ordered_json;

  Report();

  Json& params() { return doc_["params"]; }
  const Json& params() const { return doc_.at("params"); }
  Json& trials() { return doc_["trials"]; }
  const Json& trials() const { return doc_.at("trials"); }
  Json& aggregates() { return doc_["aggregates"]; }
  const Json& aggregates() const { return doc_.at("aggregates"); }
  Json& diagnostics() { return doc_["diagnostics"]; }
  const Json& diagnostics() const { return doc_.at("diagnostics"); }

  void add_trial(Json row) { trials().push_back(std::move(row)); }

  std::string dump() const;
  static Report parse(std::string_view text);

  const Json& document() const { return doc_; }
  bool operator==(const Report& other) const { return doc_ == other.doc_; }

 private:
  Json doc_;
};

void write_output(const Report& report, const std::filesystem::path& path);
Report read_report(const std::filesystem::path& path);

}  // namespace harmalign
