#pragma once

#include "rmtspca/types.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace rmtspca {

enum class Stage { RawCounts, SizeNormalized, LogTransformed, Whitened, Biwhitened };

std::string_view stage_name(Stage stage) noexcept;
Stage parse_stage(std::string_view name);

/// Dense n x p measurement matrix (cells in rows, genes in columns) together
/// with the preprocessing stage it has reached.
class DataMatrix {
 public:
  DataMatrix(Matrix values, Stage stage);

  const Matrix& values() const noexcept { return values_; }
  Stage stage() const noexcept { return stage_; }
  Index n() const noexcept { return values_.rows(); }
  Index p() const noexcept { return values_.cols(); }
  double q() const noexcept { return static_cast<double>(p()) / static_cast<double>(n()); }

 private:
  Matrix values_;
  Stage stage_;
};

namespace preprocess {

/// Scale every row to sum to `target_sum`. Without a target the median of
/// the input row sums is used.
DataMatrix library_size_normalize(const DataMatrix& x, std::optional<double> target_sum = {});

DataMatrix log1p_transform(const DataMatrix& x);

// Variances below use the unbiased (n - 1) convention.
DataMatrix gene_zscore(const DataMatrix& x);
DataMatrix cell_zscore(const DataMatrix& x);
DataMatrix cell_l2_normalize(const DataMatrix& x);

/// Indices (ascending) of the k columns with the largest sample variance.
/// Ties go to the lower index.
std::vector<Index> select_hvg(const DataMatrix& x, Index k);

DataMatrix select_columns(const DataMatrix& x, const std::vector<Index>& columns);

}  // namespace preprocess
}  // namespace rmtspca
