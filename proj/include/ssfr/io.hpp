#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ssfr/types.hpp"

namespace ssfr::io {

/// Writes via a sibling temp file and rename; creates parent directories.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_text(const std::filesystem::path& path);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;  // empty when the file has no header row
  RowMatrix values;
};

/// Comma separated, '.' decimal. The first row is a header when none of its
/// cells parses as a number. Non-finite or non-numeric cells raise ParseError
/// with 1-based row/column; ragged rows raise FormatError.
CsvTable read_csv(const std::filesystem::path& path);

std::string to_csv(const RowMatrix& values, const std::vector<std::string>& header = {});

}  // namespace ssfr::io
