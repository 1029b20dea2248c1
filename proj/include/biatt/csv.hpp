#pragma once

#include <string>

#include "biatt/types.hpp"

namespace biatt {

// Headered CSV: frame index column plus one column per matrix column. NaN
// cells are written empty (used as padding markers in attention dumps).
void write_matrix_csv(const std::string& path, const Tensor& matrix, const std::string& col_prefix,
                      int col_offset = 0);

}  // namespace biatt
