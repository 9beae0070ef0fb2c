#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "harmalign/align.hpp"
#include "harmalign/error.hpp"
#include "harmalign/eval.hpp"

namespace harmalign::cli {
namespace {

using Clock = std::chrono::steady_clock;
using Json = Report::Json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Alignment flags shared by every subcommand.
struct AlignFlags {
  int bands = 8;
  int t = 1;
  int knn_bandwidth = 20;
  double sigma = 0.0;
  Index rank = 0;
  std::string kernel = "alg2";
  double anisotropy = 0.0;
  std::string scaling = "stationary";
  std::string windows = "skip-lowest";
  bool standardize = false;
  std::uint64_t seed = AlignmentParams{}.seed;

  CLI::Option* sigma_opt = nullptr;
  CLI::Option* rank_opt = nullptr;
  CLI::Option* anisotropy_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

void add_align_flags(CLI::App* app, AlignFlags& f, bool with_seed) {
  app->add_option("--bands", f.bands, "number of itersine windows l")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--t", f.t, "diffusion time")->check(CLI::NonNegativeNumber)->capture_default_str();
  auto* knn = app->add_option("--knn-bandwidth", f.knn_bandwidth,
                              "adaptive bandwidth: distance to the k-th neighbour")
                  ->check(CLI::PositiveNumber)
                  ->capture_default_str();
  f.sigma_opt = app->add_option("--sigma", f.sigma, "fixed kernel bandwidth (replaces --knn-bandwidth)")
                    ->check(CLI::PositiveNumber);
  f.sigma_opt->excludes(knn);
  f.rank_opt = app->add_option("--rank", f.rank,
                               "eigenpairs per dataset, trivial one included (default: all up to "
                               "2000 points, else 100)")
                   ->check(CLI::Range(Index{2}, std::numeric_limits<Index>::max()));
  app->add_option("--kernel", f.kernel, "alg2 (adaptive symmetric Gaussian) or eq1 (anisotropic)")
      ->check(CLI::IsMember({"alg2", "eq1"}))
      ->capture_default_str();
  f.anisotropy_opt = app->add_option(
      "--anisotropy", f.anisotropy,
      "density normalisation exponent; only the kernel's own value (0 for alg2, 1 for eq1) is "
      "supported");
  app->add_option("--scaling", f.scaling, "coordinate scaling of the diffusion frame")
      ->check(CLI::IsMember({"inverse-sqrt-degree", "stationary", "sqrt-degree"}))
      ->capture_default_str();
  app->add_option("--windows", f.windows, "window set used for the bandlimiting weights")
      ->check(CLI::IsMember({"all", "skip-lowest"}))
      ->capture_default_str();
  app->add_flag("--standardize", f.standardize, "scale feature columns to unit variance first");
  if (with_seed) {
    f.seed_opt = app->add_option("--seed", f.seed, "seed of the truncated eigensolver")
                     ->capture_default_str();
  }
}

AlignmentParams to_params(const AlignFlags& f) {
  AlignmentParams p;
  p.bands = f.bands;
  p.diffusion_time = f.t;
  p.kernel.kind = parse_kernel_kind(f.kernel);
  if (f.sigma_opt->count() > 0) {
    p.kernel.bandwidth = FixedBandwidth{f.sigma};
  } else {
    p.kernel.bandwidth = AdaptiveBandwidth{f.knn_bandwidth};
  }
  if (f.anisotropy_opt->count() > 0) p.kernel.anisotropy = f.anisotropy;
  if (f.rank_opt->count() > 0) p.rank = f.rank;
  p.windows = parse_window_set(f.windows);
  p.scaling = parse_scaling(f.scaling);
  p.standardize_features = f.standardize;
  p.seed = f.seed;
  return p;
}

struct AlignArgs {
  std::string x, y, out, report;
  AlignFlags flags;
};

struct MultiArgs {
  std::vector<std::string> inputs;
  std::string out, report;
  AlignFlags flags;
};

struct ExperimentArgs {
  std::string mode;
  std::string data;
  std::string report;
  std::string plot;
  ExperimentConfig config;
  std::vector<std::string> methods{"none", "harmonic", "mnn"};
  std::vector<double> preserved;
  double mnn_sigma = 0.0;
  AlignFlags flags;
  CLI::Option* preserved_opt = nullptr;
  CLI::Option* mnn_sigma_opt = nullptr;
};

struct Cli {
  CLI::App app{"Harmonic alignment of datasets with corresponding features", "harmalign"};
  CLI::App* align = nullptr;
  CLI::App* multi = nullptr;
  CLI::App* experiment = nullptr;
  AlignArgs align_args;
  MultiArgs multi_args;
  ExperimentArgs exp_args;
  std::map<CLI::App*, std::string> config_paths;

  Cli() {
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    align = app.add_subcommand("align", "align two datasets");
    align->add_option("--x", align_args.x, "first dataset (CSV)");
    align->add_option("--y", align_args.y, "second dataset (CSV)");
    align->add_option("--out", align_args.out, "unified embedding CSV");
    align->add_option("--report", align_args.report, "JSON report");
    add_align_flags(align, align_args.flags, true);
    add_config(align);

    multi = app.add_subcommand("multi-align", "align two or more datasets jointly");
    multi->add_option("--inputs", multi_args.inputs, "datasets (CSV), at least two");
    multi->add_option("--out", multi_args.out, "block embedding CSV");
    multi->add_option("--report", multi_args.report, "JSON report");
    add_align_flags(multi, multi_args.flags, true);
    add_config(multi);

    experiment = app.add_subcommand("experiment", "corruption or transfer experiment");
    auto& e = exp_args;
    auto& c = e.config;
    experiment->add_option("--mode", e.mode, "corruption or transfer")
        ->check(CLI::IsMember({"corruption", "transfer"}));
    experiment->add_option("--data", e.data,
                           "labeled CSV (column 'label'); synthetic clusters when omitted");
    experiment->add_option("--classes", c.synthetic.classes, "synthetic classes")
        ->capture_default_str();
    experiment->add_option("--dims", c.synthetic.dims, "synthetic feature count")
        ->capture_default_str();
    experiment->add_option("--spread", c.synthetic.spread, "synthetic cluster standard deviation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    experiment->add_option("--n1", c.n1, "reference (labeled) size")->capture_default_str();
    experiment->add_option("--n2", c.n2, "corrupted dataset size (corruption mode)")
        ->capture_default_str();
    experiment->add_option("--methods", e.methods, "comma-separated: none, harmonic, mnn")
        ->delimiter(',')
        ->check(CLI::IsMember({"none", "unaligned", "harmonic", "mnn"}))
        ->capture_default_str();
    experiment->add_option("--trials", c.trials, "trials per setting")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    experiment->add_option("--knn", c.knn, "k of the lazy kNN classifier")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    experiment->add_option("--seed", c.seed, "experiment seed")->capture_default_str();
    e.preserved_opt =
        experiment
            ->add_option("--preserved-pct", e.preserved,
                         "percent of feature columns preserved: the sweep (corruption) or a "
                         "single value (transfer, default 35)")
            ->delimiter(',')
            ->check(CLI::Range(0.0, 100.0));
    experiment->add_option("--ratios", c.ratios, "transfer test sizes as multiples of n1")
        ->delimiter(',')
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    experiment->add_option("--mnn-k", c.mnn.k, "MNN neighbour count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    e.mnn_sigma_opt =
        experiment->add_option("--mnn-sigma", e.mnn_sigma, "MNN smoothing bandwidth (default: median distance)")
            ->check(CLI::PositiveNumber);
    experiment->add_option("--report", e.report, "JSON report");
    experiment->add_option("--plot", e.plot,
                           "plot CSV (default: report path with extension .csv)");
    add_align_flags(experiment, e.flags, false);
    add_config(experiment);
  }

  void add_config(CLI::App* sub) {
    sub->add_option("--config", config_paths[sub],
                    "flat key = value file using flag names; flags override it");
  }
};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

/// `key = value` lines; blank lines and lines starting with '#' are skipped.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(number) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

CLI::App* active_subcommand(const Cli& cli) {
  for (CLI::App* sub : {cli.align, cli.multi, cli.experiment}) {
    if (sub->parsed()) return sub;
  }
  return nullptr;
}

/// Config-file entries for options not given on the command line, as
/// "--key=value" arguments.
std::vector<std::string> config_arguments(const Cli& cli) {
  CLI::App* sub = active_subcommand(cli);
  if (!sub) return {};
  const std::string& path = cli.config_paths.at(sub);
  if (path.empty()) return {};
  std::vector<std::string> out;
  for (const auto& [key, value] : read_config(path)) {
    if (key == "config") throw UsageError(path + ": config files cannot include other config files");
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw UsageError(path + ": unknown key '" + key + "' for " + sub->get_name());
    if (opt->count() == 0) out.push_back("--" + key + "=" + value);
  }
  return out;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(flag + " is required");
}

DataMatrix load(const std::string& path) { return load_matrix(path); }

/// dataset,row[,label],e1..eK with the original row index of every point.
std::string embedding_csv(const std::vector<const DataMatrix*>& data, const std::vector<Block>& rows,
                          const MatrixXd& embedding) {
  bool labels = true;
  for (const auto* d : data) labels = labels && d->has_labels();
  std::string out = "dataset,row";
  if (labels) out += ",label";
  for (Index j = 0; j < embedding.cols(); ++j) out += ",e" + std::to_string(j + 1);
  out += '\n';
  for (std::size_t s = 0; s < data.size(); ++s) {
    for (Index i = 0; i < rows[s].size; ++i) {
      out += std::to_string(s) + ',' + std::to_string(i);
      if (labels) out += ',' + std::to_string((*data[s]->labels)[static_cast<std::size_t>(i)]);
      const Index r = rows[s].start + i;
      for (Index j = 0; j < embedding.cols(); ++j) {
        out += ',';
        out += format_double(embedding(r, j));
      }
      out += '\n';
    }
  }
  return out;
}

Json spectrum_json(std::size_t dataset, const std::string& path, const SpectralDiagnostics& d,
                   const VectorXd& values) {
  Json j;
  j["dataset"] = dataset;
  j["path"] = path;
  j["rank"] = values.size();
  j["solver"] = d.solver;
  j["converged"] = d.converged;
  j["restarts"] = d.restarts;
  j["max_residual"] = d.max_residual;
  j["clamped"] = d.clamped;
  j["near_ties"] = d.near_ties.size();
  j["eigenvalues"] = std::vector<double>(values.data(), values.data() + values.size());
  return j;
}

void warn_unconverged(const SpectralDiagnostics& d, const std::string& path, std::ostream& err) {
  if (!d.converged) {
    err << "warning: eigensolver did not converge for " << path << " (max residual "
        << d.max_residual << ")\n";
  }
}

int cmd_align(const Cli& cli, std::ostream& out, std::ostream& err) {
  const auto& a = cli.align_args;
  require(a.x, "--x");
  require(a.y, "--y");
  require(a.out, "--out");
  const AlignmentParams params = to_params(a.flags);
  validate(params);

  auto start = Clock::now();
  const DataMatrix x = load(a.x);
  const DataMatrix y = load(a.y);
  const double load_time = seconds_since(start);

  start = Clock::now();
  const AlignmentResult r = harmonic_alignment(x, y, params);
  const double align_time = seconds_since(start);
  warn_unconverged(r.diagnostics.x, a.x, err);
  warn_unconverged(r.diagnostics.y, a.y, err);

  start = Clock::now();
  write_text_atomic(a.out, embedding_csv({&x, &y}, {r.x_rows, r.y_rows}, r.embedding));
  const double write_time = seconds_since(start);

  std::optional<double> self_match;
  if (x.rows() == y.rows()) self_match = self_match_rate(r.x_embedding(), r.y_embedding());

  if (!a.report.empty()) {
    Report report;
    report.params()["command"] = "align";
    report.params()["version"] = std::string(kVersion);
    report.params()["inputs"] = {a.x, a.y};
    report.params()["out"] = a.out;
    report.params()["align"] = to_json(params);
    report.diagnostics()["spectra"] = {
        spectrum_json(0, a.x, r.diagnostics.x, r.diagnostics.x_values),
        spectrum_json(1, a.y, r.diagnostics.y, r.diagnostics.y_values)};
    report.diagnostics()["correlation_rank"] = r.diagnostics.correlation_rank;
    report.diagnostics()["orthogonality_residual"] = r.diagnostics.orthogonality_residual;
    report.diagnostics()["timings"] = {
        {"load_seconds", load_time}, {"align_seconds", align_time}, {"write_seconds", write_time}};
    report.aggregates()["rows"] = r.embedding.rows();
    report.aggregates()["dimensions"] = r.embedding.cols();
    report.aggregates()["self_match_rate"] = self_match ? Json(*self_match) : Json(nullptr);
    write_output(report, a.report);
  }
  out << "aligned " << x.rows() << " + " << y.rows() << " points into " << r.embedding.cols()
      << " coordinates";
  if (self_match) out << "; self-match rate " << *self_match;
  out << '\n';
  return kExitOk;
}

int cmd_multi(const Cli& cli, std::ostream& out, std::ostream& err) {
  const auto& a = cli.multi_args;
  if (a.inputs.size() < 2) throw UsageError("--inputs needs at least two datasets");
  require(a.out, "--out");
  const AlignmentParams params = to_params(a.flags);
  validate(params);

  auto start = Clock::now();
  std::vector<DataMatrix> data;
  for (const auto& path : a.inputs) data.push_back(load(path));
  const double load_time = seconds_since(start);

  start = Clock::now();
  const MultiAlignmentResult r = multi_alignment(data, params);
  const double align_time = seconds_since(start);
  for (std::size_t i = 0; i < data.size(); ++i) warn_unconverged(r.spectra[i], a.inputs[i], err);

  start = Clock::now();
  std::vector<const DataMatrix*> ptrs;
  for (const auto& d : data) ptrs.push_back(&d);
  write_text_atomic(a.out, embedding_csv(ptrs, r.rows, r.embedding));
  const double write_time = seconds_since(start);

  Json matches = Json::array();
  for (Index i = 0; i < r.count(); ++i) {
    for (Index j = i + 1; j < r.count(); ++j) {
      if (r.rows[i].size != r.rows[j].size) continue;
      matches.push_back({{"a", i}, {"b", j},
                         {"self_match_rate", self_match_rate(r.dataset_rows(i), r.dataset_rows(j))}});
    }
  }

  if (!a.report.empty()) {
    Report report;
    report.params()["command"] = "multi-align";
    report.params()["version"] = std::string(kVersion);
    report.params()["inputs"] = a.inputs;
    report.params()["out"] = a.out;
    report.params()["align"] = to_json(params);
    Json spectra = Json::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
      spectra.push_back(spectrum_json(i, a.inputs[i], r.spectra[i], r.values[i]));
    }
    report.diagnostics()["spectra"] = spectra;
    double residual = 0.0;
    for (Index i = 0; i < r.count(); ++i) {
      for (Index j = i + 1; j < r.count(); ++j) {
        residual = std::max(residual, orthogonality_residual(r.transforms[i][j]));
      }
    }
    report.diagnostics()["orthogonality_residual"] = residual;
    report.diagnostics()["timings"] = {
        {"load_seconds", load_time}, {"align_seconds", align_time}, {"write_seconds", write_time}};
    report.aggregates()["rows"] = r.embedding.rows();
    report.aggregates()["dimensions"] = r.embedding.cols();
    report.aggregates()["self_match_rates"] = matches;
    write_output(report, a.report);
  }
  out << "aligned " << data.size() << " datasets (" << r.embedding.rows() << " points) into "
      << r.embedding.cols() << " coordinates\n";
  return kExitOk;
}

int cmd_experiment(const Cli& cli, std::ostream& out) {
  const auto& e = cli.exp_args;
  require(e.mode, "--mode");
  require(e.report, "--report");
  ExperimentConfig config = e.config;
  if (!e.data.empty()) config.data_path = e.data;
  config.methods.clear();
  for (const auto& m : e.methods) config.methods.push_back(parse_method(m));
  config.align = to_params(e.flags);
  if (e.mnn_sigma_opt->count() > 0) config.mnn.sigma = e.mnn_sigma;
  const bool transfer = e.mode == "transfer";
  if (e.preserved_opt->count() > 0) {
    if (transfer) {
      if (e.preserved.size() != 1) throw UsageError("transfer mode takes one --preserved-pct value");
      config.transfer_preserved_pct = e.preserved[0];
    } else {
      config.preserved_pcts = e.preserved;
    }
  }

  const Report report = transfer ? transfer_experiment(config) : corruption_experiment(config);
  write_output(report, e.report);
  std::filesystem::path plot = e.plot;
  if (plot.empty()) plot = std::filesystem::path(e.report).replace_extension(".csv");
  write_text_atomic(plot, plot_csv(report));

  const std::string key = transfer ? "ratio" : "p";
  for (const auto& row : report.aggregates()) {
    out << key << '=' << row[key].dump() << ' ' << row["method"].get<std::string>() << ' '
        << format_double(row["mean_accuracy"].get<double>()) << '\n';
  }
  return kExitOk;
}

int parse_error(const Cli& cli, const CLI::ParseError& e, std::ostream& out, std::ostream& err) {
  if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
    // --help or --version.
    const CLI::App* sub = active_subcommand(cli);
    if (dynamic_cast<const CLI::CallForVersion*>(&e)) {
      out << e.what() << '\n';
    } else {
      out << (sub ? sub->help() : cli.app.help());
    }
    return kExitOk;
  }
  err << "usage error: " << e.what() << "\nrun with --help for the list of flags\n";
  return kExitUsage;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> extra;
  {
    // First pass: locate the subcommand and its config file.
    Cli cli;
    try {
      cli.app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
      extra = config_arguments(cli);
    } catch (const CLI::ParseError& e) {
      return parse_error(cli, e, out, err);
    } catch (const UsageError& e) {
      err << "usage error: " << e.what() << '\n';
      return kExitUsage;
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());

  Cli cli;
  try {
    cli.app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    return parse_error(cli, e, out, err);
  }
  try {
    if (cli.align->parsed()) return cmd_align(cli, out, err);
    if (cli.multi->parsed()) return cmd_multi(cli, out, err);
    return cmd_experiment(cli, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace harmalign::cli
