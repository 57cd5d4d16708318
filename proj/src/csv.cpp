#include "augforget/csv.hpp"

#include "augforget/error.hpp"

#include <cstdio>
#include <fstream>

namespace augforget {

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace {

void append_cell(std::string& out, const std::string& cell) {
    if (cell.find_first_of(",\"\r\n") == std::string::npos) {
        out += cell;
        return;
    }
    out += '"';
    for (const char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

void append_row(std::string& out, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        append_cell(out, row[i]);
    }
    out += '\n';
}

} // namespace

std::string render_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    append_row(out, header);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != header.size()) {
            throw Error(ErrorKind::shape_mismatch, "CSV row " + std::to_string(r) + " has " +
                                                       std::to_string(rows[r].size()) + " cells, header has " +
                                                       std::to_string(header.size()));
        }
        append_row(out, rows[r]);
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    const std::string text = render_csv(header, rows);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, path.string() + ": cannot open for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::io, path.string() + ": write failed");
}

} // namespace augforget
