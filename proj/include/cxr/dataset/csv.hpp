#pragma once

#include <istream>
#include <string>
#include <vector>

namespace cxr {

using CsvRow = std::vector<std::string>;

/// RFC 4180 reader: quoted fields may hold the delimiter, doubled quotes and newlines.
std::vector<CsvRow> read_delimited(std::istream& in, char delimiter = ',');

}  // namespace cxr
