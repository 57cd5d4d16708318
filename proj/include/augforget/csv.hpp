#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace augforget {

/// Nine significant digits, printf "%.9g".
std::string format_real(double v);

/// Writes an RFC-4180 style CSV with "\n" line endings. Cells containing a comma,
/// quote or line break are quoted. Every row must have the header's width.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Same bytes write_csv() would put on disk.
std::string render_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

} // namespace augforget
