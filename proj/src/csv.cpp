#include "biatt/csv.hpp"

#include <cmath>
#include <fstream>

namespace biatt {

void write_matrix_csv(const std::string& path, const Tensor& matrix, const std::string& col_prefix,
                      int col_offset) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write CSV: " + path);
    f.precision(17);
    f << "frame";
    for (int c = 0; c < matrix.cols; ++c) f << ',' << col_prefix << (c + col_offset);
    f << '\n';
    for (int r = 0; r < matrix.rows; ++r) {
        f << r;
        for (int c = 0; c < matrix.cols; ++c) {
            f << ',';
            const double v = matrix.at(r, c);
            if (!std::isnan(v)) f << v;
        }
        f << '\n';
    }
    if (!f) throw IoError("CSV write failed: " + path);
}

}  // namespace biatt
