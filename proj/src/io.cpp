#include "rmtspca/io.hpp"

#include "rmtspca/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rmtspca::io {
namespace {

[[noreturn]] void fail(Errc code, const std::string& message) {
  throw Error(code, "io", message);
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::IoError, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view token, const std::string& where) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
    fail(Errc::FormatError, "cannot parse '" + std::string(token) + "' as a number " + where);
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string format_number(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

}  // namespace

MatrixFormat parse_format(std::string_view name) {
  const std::string n = lower(std::string(name));
  if (n == "auto") return MatrixFormat::Auto;
  if (n == "mtx" || n == "matrix-market") return MatrixFormat::MatrixMarket;
  if (n == "csv" || n == "tsv" || n == "delimited") return MatrixFormat::Delimited;
  fail(Errc::FormatError, "unknown matrix format '" + std::string(name) + "'");
}

Matrix read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) fail(Errc::FormatError, "'" + path.string() + "' is empty");
  std::istringstream header(lower(line));
  std::string banner, object, layout, field, symmetry;
  header >> banner >> object >> layout >> field >> symmetry;
  if (banner != "%%matrixmarket" || object != "matrix") {
    fail(Errc::FormatError, "'" + path.string() + "' lacks a Matrix Market banner");
  }
  if (layout != "coordinate" && layout != "array") fail(Errc::FormatError, "unknown layout " + layout);
  if (field != "real" && field != "integer" && field != "double" && field != "pattern") {
    fail(Errc::FormatError, "unsupported field " + field);
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    fail(Errc::FormatError, "unsupported symmetry " + symmetry);
  }
  const bool symmetric = symmetry == "symmetric";
  const bool pattern = field == "pattern";

  do {
    if (!std::getline(in, line)) fail(Errc::FormatError, "missing size line");
  } while (trim(line).empty() || trim(line).front() == '%');

  std::istringstream size_line(line);
  long long rows = 0, cols = 0, entries = 0;
  size_line >> rows >> cols;
  if (layout == "coordinate") size_line >> entries;
  if (!size_line || rows < 1 || cols < 1) fail(Errc::FormatError, "bad size line '" + line + "'");

  Matrix m = Matrix::Zero(rows, cols);
  long long read = 0;
  long long line_no = 0;
  const long long expected =
      layout == "coordinate" ? entries : (symmetric ? rows * (rows + 1) / 2 : rows * cols);
  Index ai = 0, aj = 0;
  while (read < expected && std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '%') continue;
    std::istringstream row{std::string(t)};
    if (layout == "coordinate") {
      long long i = 0, j = 0;
      std::string value = "1";
      row >> i >> j;
      if (!pattern) row >> value;
      if (!row && !(pattern && row.eof())) fail(Errc::FormatError, "bad entry '" + line + "'");
      if (i < 1 || i > rows || j < 1 || j > cols) fail(Errc::FormatError, "entry out of range: " + line);
      const double v = parse_double(value, "in " + path.string());
      m(i - 1, j - 1) += v;
      if (symmetric && i != j) m(j - 1, i - 1) += v;
    } else {
      std::string value;
      row >> value;
      const double v = parse_double(value, "in " + path.string());
      m(ai, aj) = v;
      if (symmetric) m(aj, ai) = v;
      if (++ai == rows) {
        ++aj;
        ai = symmetric ? aj : 0;
      }
    }
    ++read;
  }
  if (read < expected) {
    fail(Errc::FormatError, "'" + path.string() + "' ends after " + std::to_string(read) + " of " +
                                std::to_string(expected) + " entries");
  }
  return m;
}

void write_matrix_market(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out = open_out(path);
  out << "%%MatrixMarket matrix array real general\n" << m.rows() << ' ' << m.cols() << '\n';
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) out << format_number(m(i, j)) << '\n';
  }
  if (!out) fail(Errc::IoError, "failed writing '" + path.string() + "'");
}

LabeledMatrix read_delimited(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  LabeledMatrix out;
  char delimiter = '\t';
  bool have_header = false;
  std::vector<double> values;
  Index rows = 0;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!have_header) {
      delimiter = line.find('\t') != std::string::npos ? '\t' : ',';
      for (std::string_view name : split(line, delimiter)) out.column_names.emplace_back(trim(name));
      have_header = true;
      continue;
    }
    const auto fields = split(line, delimiter);
    if (fields.size() != out.column_names.size()) {
      fail(Errc::FormatError, path.string() + ":" + std::to_string(line_no) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(out.column_names.size()));
    }
    for (std::string_view f : fields) {
      values.push_back(parse_double(f, "at " + path.string() + ":" + std::to_string(line_no)));
    }
    ++rows;
  }
  if (!have_header) fail(Errc::FormatError, "'" + path.string() + "' has no header line");
  if (rows == 0) fail(Errc::FormatError, "'" + path.string() + "' has no data rows");
  const Index cols = static_cast<Index>(out.column_names.size());
  out.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
  return out;
}

void write_delimited(const std::filesystem::path& path, const Matrix& m,
                     const std::vector<std::string>& column_names, char delimiter) {
  if (!column_names.empty() && static_cast<Index>(column_names.size()) != m.cols()) {
    fail(Errc::DimensionMismatch, "column names do not match the matrix width");
  }
  std::ofstream out = open_out(path);
  for (Index j = 0; j < m.cols(); ++j) {
    if (j > 0) out << delimiter;
    out << (column_names.empty() ? "V" + std::to_string(j + 1) : column_names[static_cast<std::size_t>(j)]);
  }
  out << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << delimiter;
      out << format_number(m(i, j));
    }
    out << '\n';
  }
  if (!out) fail(Errc::IoError, "failed writing '" + path.string() + "'");
}

LabeledMatrix read_matrix(const std::filesystem::path& path, MatrixFormat format) {
  if (!std::filesystem::exists(path)) fail(Errc::IoError, "'" + path.string() + "' does not exist");
  if (format == MatrixFormat::Auto) {
    const std::string ext = lower(path.extension().string());
    format = ext == ".mtx" ? MatrixFormat::MatrixMarket : MatrixFormat::Delimited;
  }
  if (format == MatrixFormat::MatrixMarket) {
    LabeledMatrix out;
    out.values = read_matrix_market(path);
    for (Index j = 0; j < out.values.cols(); ++j) out.column_names.push_back("V" + std::to_string(j + 1));
    return out;
  }
  return read_delimited(path);
}

void write_vector(const std::filesystem::path& path, const Vector& v, const std::string& name) {
  write_delimited(path, v, {name});
}

Vector read_vector(const std::filesystem::path& path) {
  const LabeledMatrix m = read_delimited(path);
  if (m.values.cols() != 1) fail(Errc::FormatError, "'" + path.string() + "' is not a single column");
  return m.values.col(0);
}

}  // namespace rmtspca::io
