#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace covmod {

// 17 significant digits, so a value written and read back is bit-identical.
std::string format_double(double v);

// Parses the whole of `field` (surrounding blanks ignored) as a double.
// Returns false on any trailing garbage or empty input.
bool parse_double(std::string_view field, double& out);

std::vector<std::string_view> split_fields(std::string_view line, char delim);

// Writes to `<path>.tmp` then renames, so readers never observe a partial file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace covmod
