#pragma once

#include <string>

#include "dampopt/types.hpp"

namespace dampopt {

// Matrix Market exchange format, dense and coordinate flavours, real and
// integer fields, general and symmetric storage.  Symmetric coordinate files
// are mirrored on read; write_matrix_market always emits array/general.
Mat read_matrix_market(const std::string& path);
void write_matrix_market(const std::string& path, const Mat& a,
                         const std::string& comment = "");

}  // namespace dampopt
