#pragma once

#include <span>
#include <string>
#include <vector>

#include "screff/types.hpp"

namespace screff {

/// Shortest round-trip decimal rendering of a double (printf %.17g trimmed
/// to the shortest form that parses back exactly).
std::string format_double(double v);

/// Writes `content` to `path` atomically: a sibling temp file is written,
/// flushed, and renamed over the target.
void atomic_write_text(const std::string& path, const std::string& content);

/// Serializes one CSV: a header row then preformatted cell rows, written
/// atomically. Cells containing commas, quotes, or newlines are quoted.
void write_csv(const std::string& path, std::span<const std::string> header,
               std::span<const std::vector<std::string>> rows);

/// Parses a CSV file into rows of cells; handles quoted cells. Throws
/// ConfigError naming the file and 1-based line on malformed content.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

struct Dataset {
  std::vector<SubjectRecord> records;
  std::vector<std::string> covariate_names;
};

/// Reads the subject-file schema: header `id,z,y_r,delta_r,y_t,delta_t`
/// followed by covariate columns. Every record is validated; errors carry
/// the file name and line number.
Dataset read_subject_csv(const std::string& path);

void write_subject_csv(const std::string& path,
                       std::span<const SubjectRecord> records,
                       std::span<const std::string> covariate_names);

}  // namespace screff
