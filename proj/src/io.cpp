#include "ssfr/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "ssfr/error.hpp"

namespace ssfr::io {

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool parse_number(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return res.ec == std::errc() && res.ptr == cell.data() + cell.size();
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  const std::string file = path.string();
  CsvTable table;
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line_no == 1 && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    auto cells = split_line(line);
    if (rows == 0 && table.header.empty() && values.empty()) {
      bool any_numeric = false;
      double tmp;
      for (auto c : cells) any_numeric = any_numeric || parse_number(c, tmp);
      if (!any_numeric) {
        for (auto c : cells) table.header.emplace_back(c);
        cols = cells.size();
        if (end == text.size()) break;
        continue;
      }
    }
    if (cols == 0) cols = cells.size();
    if (cells.size() != cols)
      throw FormatError(file + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                        " columns, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v;
      if (!parse_number(cells[c], v))
        throw ParseError(file, line_no, c + 1, "non-numeric cell '" + std::string(cells[c]) + "'");
      if (!std::isfinite(v))
        throw ParseError(file, line_no, c + 1, "non-finite cell '" + std::string(cells[c]) + "'");
      values.push_back(v);
    }
    ++rows;
    if (end == text.size()) break;
  }
  table.values = RowMatrix(static_cast<Index>(rows), static_cast<Index>(cols));
  if (rows > 0) std::copy(values.begin(), values.end(), table.values.data());
  return table;
}

std::string to_csv(const RowMatrix& values, const std::vector<std::string>& header) {
  std::string out;
  out.reserve(static_cast<std::size_t>(values.size()) * 20 + 64);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  if (!header.empty()) out += '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (j) out += ',';
      out += format_double(values(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace ssfr::io
