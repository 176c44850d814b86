#pragma once
// Plain-text numeric file I/O: vectors (one value per line or whitespace
// separated) and matrices (one row per line). Values are written with 17
// significant digits so a read-back reproduces the exact doubles.

#include <string>

#include "piecewise/common.hpp"
#include "piecewise/linalg.hpp"

namespace pw {

Vec load_vec_text(const std::string& path);
void save_vec_text(const std::string& path, const Vec& v);

Matrix load_matrix_text(const std::string& path);
void save_matrix_text(const std::string& path, const Matrix& m);

}  // namespace pw
