#pragma once

#include "rmtspca/types.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rmtspca::io {

enum class MatrixFormat { Auto, MatrixMarket, Delimited };
MatrixFormat parse_format(std::string_view name);

struct LabeledMatrix {
  Matrix values;
  std::vector<std::string> column_names;
};

/// Matrix Market coordinate (real/integer/pattern; general or symmetric)
/// or array file.
Matrix read_matrix_market(const std::filesystem::path& path);
/// Dense array format, values printed with 17 significant digits.
void write_matrix_market(const std::filesystem::path& path, const Matrix& m);

/// Delimited text (comma or tab) whose first line is a header of column
/// names. Lines starting with '#' are skipped.
LabeledMatrix read_delimited(const std::filesystem::path& path);
void write_delimited(const std::filesystem::path& path, const Matrix& m,
                     const std::vector<std::string>& column_names = {}, char delimiter = '\t');

LabeledMatrix read_matrix(const std::filesystem::path& path, MatrixFormat format = MatrixFormat::Auto);

void write_vector(const std::filesystem::path& path, const Vector& v, const std::string& name);
Vector read_vector(const std::filesystem::path& path);

}  // namespace rmtspca::io
