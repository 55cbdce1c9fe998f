#include "screff/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace screff {

std::string format_double(double v) {
  char buf[40];
  // std::to_chars emits the shortest decimal form that parses back exactly
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

void atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open for writing: " + tmp);
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw ConfigError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw ConfigError("rename failed: " + path + " (" +
                      std::strerror(errno) + ")");
  }
}

namespace {

std::string quote_cell(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

void write_csv(const std::string& path, std::span<const std::string> header,
               std::span<const std::vector<std::string>> rows) {
  std::string content;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k) content += ',';
    content += quote_cell(header[k]);
  }
  content += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("write_csv: row width differs from header");
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) content += ',';
      content += quote_cell(row[k]);
    }
    content += '\n';
  }
  atomic_write_text(path, content);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool in_quotes = false;
  bool cell_started = false;
  std::size_t line = 1;
  auto end_cell = [&] {
    row.push_back(cell);
    cell.clear();
    cell_started = false;
  };
  auto end_row = [&] {
    if (cell_started || !row.empty()) {
      end_cell();
      rows.push_back(std::move(row));
      row.clear();
    }
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        cell += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!cell.empty())
          throw ConfigError(path + " line " + std::to_string(line) +
                            ": quote inside unquoted cell");
        in_quotes = true;
        cell_started = true;
        break;
      case ',':
        end_cell();
        cell_started = true;  // a following terminator still ends a cell
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        cell += c;
        cell_started = true;
    }
  }
  if (in_quotes)
    throw ConfigError(path + " line " + std::to_string(line) +
                      ": unterminated quoted cell");
  end_row();
  return rows;
}

namespace {

double parse_double(const std::string& cell, const std::string& path,
                    std::size_t line, const std::string& column) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE)
    throw ConfigError(path + " line " + std::to_string(line) + ": column " +
                      column + " has non-numeric value '" + cell + "'");
  return v;
}

int parse_flag(const std::string& cell, const std::string& path,
               std::size_t line, const std::string& column) {
  if (cell == "0") return 0;
  if (cell == "1") return 1;
  throw ConfigError(path + " line " + std::to_string(line) + ": column " +
                    column + " must be 0 or 1, got '" + cell + "'");
}

}  // namespace

Dataset read_subject_csv(const std::string& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw ConfigError(path + ": empty file");
  static const char* fixed[] = {"id", "z", "y_r", "delta_r", "y_t", "delta_t"};
  const auto& header = rows[0];
  if (header.size() < 6)
    throw ConfigError(path + " line 1: header must start with "
                             "id,z,y_r,delta_r,y_t,delta_t");
  for (int k = 0; k < 6; ++k)
    if (header[k] != fixed[k])
      throw ConfigError(path + " line 1: expected column '" +
                        std::string(fixed[k]) + "' at position " +
                        std::to_string(k + 1) + ", got '" + header[k] + "'");

  Dataset ds;
  ds.covariate_names.assign(header.begin() + 6, header.end());
  const std::size_t width = header.size();
  ds.records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line = r + 1;
    if (row.size() != width)
      throw ConfigError(path + " line " + std::to_string(line) +
                        ": expected " + std::to_string(width) +
                        " fields, got " + std::to_string(row.size()));
    SubjectRecord rec;
    rec.id = row[0];
    rec.z = parse_flag(row[1], path, line, "z");
    rec.y_r = parse_double(row[2], path, line, "y_r");
    rec.delta_r = parse_flag(row[3], path, line, "delta_r");
    rec.y_t = parse_double(row[4], path, line, "y_t");
    rec.delta_t = parse_flag(row[5], path, line, "delta_t");
    rec.x.resize(width - 6);
    for (std::size_t k = 6; k < width; ++k)
      rec.x[k - 6] = parse_double(row[k], path, line, header[k]);
    try {
      validate(rec);
    } catch (const std::exception& e) {
      throw ConfigError(path + " line " + std::to_string(line) + ": " +
                        e.what());
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

void write_subject_csv(const std::string& path,
                       std::span<const SubjectRecord> records,
                       std::span<const std::string> covariate_names) {
  std::vector<std::string> header = {"id",      "z",   "y_r",
                                     "delta_r", "y_t", "delta_t"};
  header.insert(header.end(), covariate_names.begin(),
                covariate_names.end());
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const auto& s : records) {
    if (s.x.size() != covariate_names.size())
      throw std::invalid_argument(
          "write_subject_csv: covariate width mismatch");
    std::vector<std::string> row = {s.id,
                                    std::to_string(s.z),
                                    format_double(s.y_r),
                                    std::to_string(s.delta_r),
                                    format_double(s.y_t),
                                    std::to_string(s.delta_t)};
    for (double v : s.x) row.push_back(format_double(v));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

}  // namespace screff
