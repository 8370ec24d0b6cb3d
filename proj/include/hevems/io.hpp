// Small file helpers shared by the serializers and the CLI.
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace hevems::io {

std::string read_file(const std::filesystem::path &path);

/// Write to a sibling temporary file, then rename over `path`; readers never see a partial file.
void write_file_atomic(const std::filesystem::path &path, std::string_view contents);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

} // namespace hevems::io
