#pragma once

#include <string>

namespace mtvgp {

/// Writes `content` to `path` via a temporary file and rename, so readers
/// never observe a partial file. Creates parent directories.
void atomic_write_file(const std::string& path, const std::string& content);

/// Whole-file read; throws DataError when the file cannot be opened.
std::string read_file(const std::string& path);

}  // namespace mtvgp
