#include "harmalign/data.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include <unistd.h>

#include "harmalign/error.hpp"

namespace harmalign {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_double(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

bool iequals(std::string_view a, std::string_view b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    return std::tolower(static_cast<unsigned char>(x)) ==
           std::tolower(static_cast<unsigned char>(y));
  });
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

DataMatrix load_csv(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      lines.push_back(rest.substr(0, nl));
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  }
  if (lines.empty()) throw Error(path.string() + ": no rows");

  auto first = split_cells(lines.front());
  const bool has_header = !parse_double(first.front()).has_value();
  std::optional<std::size_t> label_column;
  if (has_header) {
    for (std::size_t c = 0; c < first.size(); ++c) {
      if (iequals(first[c], "label")) label_column = c;
    }
  }
  const std::size_t width = first.size();
  const std::size_t data_begin = has_header ? 1 : 0;
  const auto n_rows = static_cast<Index>(lines.size() - data_begin);
  if (n_rows == 0) throw Error(path.string() + ": no rows");
  const auto n_features = static_cast<Index>(width - (label_column ? 1 : 0));

  MatrixXd values(n_rows, n_features);
  std::vector<int> labels;
  if (label_column) labels.reserve(static_cast<std::size_t>(n_rows));

  for (Index r = 0; r < n_rows; ++r) {
    const std::size_t line_no = static_cast<std::size_t>(r) + data_begin + 1;
    const auto cells = split_cells(lines[static_cast<std::size_t>(r) + data_begin]);
    if (cells.size() != width) {
      throw Error(path.string() + ": ragged row " + std::to_string(r + 1) + " (line " +
                  std::to_string(line_no) + "): expected " + std::to_string(width) +
                  " cells, found " + std::to_string(cells.size()));
    }
    Index feature = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const auto parsed = parse_double(cells[c]);
      const std::string where = "row " + std::to_string(r + 1) + ", column " +
                                std::to_string(c + 1) + " (line " + std::to_string(line_no) +
                                ")";
      if (!parsed) {
        throw Error(path.string() + ": non-numeric cell '" + std::string(cells[c]) + "' at " +
                    where);
      }
      if (!std::isfinite(*parsed)) {
        throw Error(path.string() + ": non-finite value at " + where);
      }
      if (label_column && c == *label_column) {
        if (*parsed < 0 || std::floor(*parsed) != *parsed || *parsed > 1e9) {
          throw Error(path.string() + ": label must be a non-negative integer at " + where);
        }
        labels.push_back(static_cast<int>(*parsed));
      } else {
        values(r, feature++) = *parsed;
      }
    }
  }
  std::optional<std::vector<int>> maybe_labels;
  if (label_column) maybe_labels = std::move(labels);
  return make_data_matrix(std::move(values), std::move(maybe_labels), path.stem().string());
}

std::uint64_t load_le_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void store_le_u64(std::uint64_t v, char* p) {
  for (int i = 0; i < 8; ++i) {
    p[i] = static_cast<char>(v & 0xFF);
    v >>= 8;
  }
}

DataMatrix load_raw(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16) throw Error(path.string() + ": raw-f64 header truncated");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t rows = load_le_u64(p);
  const std::uint64_t cols = load_le_u64(p + 8);
  if (rows == 0) throw Error(path.string() + ": no rows");
  if (cols != 0 && rows > (bytes.size() - 16) / 8 / cols) {
    throw Error(path.string() + ": raw-f64 payload shorter than header declares");
  }
  if (bytes.size() != 16 + rows * cols * 8) {
    throw Error(path.string() + ": raw-f64 size mismatch, header declares " +
                std::to_string(rows) + "x" + std::to_string(cols));
  }
  MatrixXd values(static_cast<Index>(rows), static_cast<Index>(cols));
  const unsigned char* q = p + 16;
  for (std::uint64_t r = 0; r < rows; ++r) {
    for (std::uint64_t c = 0; c < cols; ++c, q += 8) {
      const double v = std::bit_cast<double>(load_le_u64(q));
      if (!std::isfinite(v)) {
        throw Error(path.string() + ": non-finite value at row " + std::to_string(r + 1) +
                    ", column " + std::to_string(c + 1));
      }
      values(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
  }
  return make_data_matrix(std::move(values), std::nullopt, path.stem().string());
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

DataMatrix make_data_matrix(MatrixXd values, std::optional<std::vector<int>> labels,
                            std::string name) {
  if (values.rows() < 2) {
    throw Error("data matrix '" + name + "' needs at least 2 rows, got " +
                std::to_string(values.rows()));
  }
  if (values.cols() < 1) throw Error("data matrix '" + name + "' has no feature columns");
  if (!values.allFinite()) {
    for (Index r = 0; r < values.rows(); ++r) {
      for (Index c = 0; c < values.cols(); ++c) {
        if (!std::isfinite(values(r, c))) {
          throw Error("data matrix '" + name + "': non-finite value at row " +
                      std::to_string(r + 1) + ", column " + std::to_string(c + 1));
        }
      }
    }
  }
  if (labels) {
    if (static_cast<Index>(labels->size()) != values.rows()) {
      throw Error("data matrix '" + name + "': " + std::to_string(labels->size()) +
                  " labels for " + std::to_string(values.rows()) + " rows");
    }
    if (std::any_of(labels->begin(), labels->end(), [](int l) { return l < 0; })) {
      throw Error("data matrix '" + name + "': negative label");
    }
  }
  return DataMatrix{std::move(values), std::move(labels), std::move(name)};
}

DataMatrix select_rows(const DataMatrix& data, const std::vector<Index>& rows,
                       std::string name) {
  MatrixXd values(static_cast<Index>(rows.size()), data.cols());
  std::optional<std::vector<int>> labels;
  if (data.labels) labels.emplace().reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    values.row(static_cast<Index>(i)) = data.values.row(rows[i]);
    if (labels) labels->push_back((*data.labels)[static_cast<std::size_t>(rows[i])]);
  }
  return make_data_matrix(std::move(values), std::move(labels),
                          name.empty() ? data.name : std::move(name));
}

DataMatrix load_matrix(const fs::path& path, MatrixFormat format) {
  if (!fs::exists(path)) throw Error("no such file: " + path.string());
  return format == MatrixFormat::csv ? load_csv(path) : load_raw(path);
}

void write_text_atomic(const fs::path& path, std::string_view text) {
  static std::atomic<unsigned> counter{0};
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp" +
                              std::to_string(::getpid()) + "." + std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw Error("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw Error("cannot replace " + path.string() + ": " + ec.message());
  }
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {

std::string csv_text(const MatrixXd& m, const std::vector<std::string>& header,
                     const std::vector<int>* labels) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 12 + 64);
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c) out += ',';
      out += header[c];
    }
    out += '\n';
  }
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    if (labels) {
      out += ',';
      out += std::to_string((*labels)[static_cast<std::size_t>(r)]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace

void write_output(const MatrixXd& matrix, const fs::path& path,
                  const std::vector<std::string>& header) {
  if (!header.empty() && static_cast<Index>(header.size()) != matrix.cols()) {
    throw Error("CSV header has " + std::to_string(header.size()) + " names for " +
                std::to_string(matrix.cols()) + " columns");
  }
  write_text_atomic(path, csv_text(matrix, header, nullptr));
}

void write_output(const DataMatrix& data, const fs::path& path) {
  std::vector<std::string> header;
  for (Index c = 0; c < data.cols(); ++c) header.push_back("f" + std::to_string(c + 1));
  if (data.labels) header.emplace_back("label");
  write_text_atomic(path, csv_text(data.values, header, data.labels ? &*data.labels : nullptr));
}

void write_raw_f64(const MatrixXd& matrix, const fs::path& path) {
  std::string bytes(16 + static_cast<std::size_t>(matrix.size()) * 8, '\0');
  store_le_u64(static_cast<std::uint64_t>(matrix.rows()), bytes.data());
  store_le_u64(static_cast<std::uint64_t>(matrix.cols()), bytes.data() + 8);
  char* q = bytes.data() + 16;
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c, q += 8) {
      store_le_u64(std::bit_cast<std::uint64_t>(matrix(r, c)), q);
    }
  }
  write_text_atomic(path, bytes);
}

// --- Rng -------------------------------------------------------------------

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(seed ^ mix64(stream + kGolden))) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_normal_) {
    const double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw Error("Rng::below: bound must be positive");
  // Lemire's nearly divisionless rejection.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

Rng Rng::derive(std::initializer_list<std::uint64_t> path) const {
  std::uint64_t k = key_;
  for (const auto p : path) k = mix64(k ^ mix64(p + kGolden));
  return Rng(k, stream_);
}

std::vector<Index> Rng::permutation(Index n) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

std::vector<Index> Rng::sample_without_replacement(Index n, Index count) {
  if (count < 0 || count > n) throw Error("cannot sample " + std::to_string(count) +
                                          " of " + std::to_string(n) + " items");
  std::vector<Index> pool(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Index>(below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

MatrixXd Rng::normal_matrix(Index rows, Index cols) {
  MatrixXd m(rows, cols);
  // Row-major fill so the draw order does not depend on storage order.
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = normal();
  }
  return m;
}

// --- Report ----------------------------------------------------------------

Report::Report() {
  doc_["params"] = Json::object();
  doc_["trials"] = Json::array();
  doc_["aggregates"] = Json::object();
  doc_["diagnostics"] = Json::object();
}

std::string Report::dump() const { return doc_.dump(2); }

Report Report::parse(std::string_view text) {
  Report report;
  Json parsed;
  try {
    parsed = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
  if (!parsed.is_object()) throw Error("malformed report: top level is not an object");
  for (auto& [key, value] : parsed.items()) report.doc_[key] = value;
  return report;
}

void write_output(const Report& report, const fs::path& path) {
  write_text_atomic(path, report.dump() + "\n");
}

Report read_report(const fs::path& path) { return Report::parse(read_file(path)); }

}  // namespace harmalign
