#pragma once

#include "embalign/types.hpp"

#include <string>
#include <string_view>

namespace embalign::io {

/// Numeric CSV, one row per line, comma separated. A first line that does
/// not parse as numbers is treated as a header and skipped. Throws a Data
/// error naming the line on ragged rows or unparsable / non-finite cells.
Matrix parse_csv(std::string_view text);

}  // namespace embalign::io
