#include "rmtspca/preprocess.hpp"

#include "rmtspca/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace rmtspca {
namespace {

[[noreturn]] void fail(Errc code, const std::string& message) {
  throw Error(code, "preprocess", message);
}

double median_of(Vector v) {
  const Index n = v.size();
  std::sort(v.data(), v.data() + n);
  return n % 2 == 1 ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
}

}  // namespace

std::string_view stage_name(Stage stage) noexcept {
  switch (stage) {
    case Stage::RawCounts: return "raw-counts";
    case Stage::SizeNormalized: return "size-normalized";
    case Stage::LogTransformed: return "log-transformed";
    case Stage::Whitened: return "whitened";
    case Stage::Biwhitened: return "biwhitened";
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::RawCounts, Stage::SizeNormalized, Stage::LogTransformed, Stage::Whitened,
                  Stage::Biwhitened}) {
    if (stage_name(s) == name) return s;
  }
  fail(Errc::FormatError, "unknown stage '" + std::string(name) + "'");
}

DataMatrix::DataMatrix(Matrix values, Stage stage) : values_(std::move(values)), stage_(stage) {
  if (values_.rows() < 2 || values_.cols() < 2) {
    fail(Errc::PreconditionViolation, "a data matrix needs at least 2 rows and 2 columns, got " +
                                          std::to_string(values_.rows()) + "x" +
                                          std::to_string(values_.cols()));
  }
  if (!values_.allFinite()) fail(Errc::DomainError, "data matrix has non-finite entries");
  if (stage_ == Stage::RawCounts && values_.minCoeff() < 0.0) {
    fail(Errc::DomainError, "raw counts must be nonnegative");
  }
}

namespace preprocess {

DataMatrix library_size_normalize(const DataMatrix& x, std::optional<double> target_sum) {
  if (x.stage() != Stage::RawCounts) {
    fail(Errc::PreconditionViolation, "library size normalization expects raw counts");
  }
  const Vector sums = x.values().rowwise().sum();
  for (Index i = 0; i < sums.size(); ++i) {
    if (!(sums(i) > 0.0)) fail(Errc::ZeroRowSum, "row " + std::to_string(i) + " sums to zero");
  }
  const double target = target_sum.value_or(median_of(sums));
  if (!(target > 0.0)) fail(Errc::PreconditionViolation, "target sum must be positive");
  Matrix out = (target / sums.array()).matrix().asDiagonal() * x.values();
  return DataMatrix(std::move(out), Stage::SizeNormalized);
}

DataMatrix log1p_transform(const DataMatrix& x) {
  const auto& v = x.values();
  for (Index j = 0; j < v.cols(); ++j) {
    for (Index i = 0; i < v.rows(); ++i) {
      if (!(v(i, j) > -1.0)) {
        fail(Errc::DomainError, "entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                    ") is <= -1, log1p undefined");
      }
    }
  }
  Matrix out = v.array().log1p().matrix();
  return DataMatrix(std::move(out), Stage::LogTransformed);
}

DataMatrix gene_zscore(const DataMatrix& x) {
  Matrix out = x.values();
  const double denom = static_cast<double>(out.rows() - 1);
  for (Index j = 0; j < out.cols(); ++j) {
    auto col = out.col(j);
    col.array() -= col.mean();
    const double var = col.squaredNorm() / denom;
    if (!(var > 0.0)) fail(Errc::ZeroVariance, "column " + std::to_string(j) + " has zero variance");
    col /= std::sqrt(var);
  }
  return DataMatrix(std::move(out), Stage::Whitened);
}

DataMatrix cell_zscore(const DataMatrix& x) {
  Matrix out = x.values();
  const double denom = static_cast<double>(out.cols() - 1);
  for (Index i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    row.array() -= row.mean();
    const double var = row.squaredNorm() / denom;
    if (!(var > 0.0)) fail(Errc::ZeroVariance, "row " + std::to_string(i) + " has zero variance");
    row /= std::sqrt(var);
  }
  return DataMatrix(std::move(out), Stage::Whitened);
}

DataMatrix cell_l2_normalize(const DataMatrix& x) {
  Matrix out = x.values();
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (!(norm > 0.0)) fail(Errc::ZeroNorm, "row " + std::to_string(i) + " has zero norm");
    out.row(i) /= norm;
  }
  return DataMatrix(std::move(out), Stage::Whitened);
}

std::vector<Index> select_hvg(const DataMatrix& x, Index k) {
  const Index p = x.p();
  if (k < 1 || k > p) {
    fail(Errc::BadK, "k must lie in [1, " + std::to_string(p) + "], got " + std::to_string(k));
  }
  const auto& v = x.values();
  const Vector variance =
      ((v.rowwise() - v.colwise().mean()).colwise().squaredNorm() / double(v.rows() - 1))
          .transpose();
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return variance(a) > variance(b); });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

DataMatrix select_columns(const DataMatrix& x, const std::vector<Index>& columns) {
  Matrix out(x.n(), static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] < 0 || columns[j] >= x.p()) {
      fail(Errc::DimensionMismatch, "column index " + std::to_string(columns[j]) + " out of range");
    }
    out.col(static_cast<Index>(j)) = x.values().col(columns[j]);
  }
  return DataMatrix(std::move(out), x.stage());
}

}  // namespace preprocess
}  // namespace rmtspca
