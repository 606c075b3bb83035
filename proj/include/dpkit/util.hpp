#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dpkit::util {

std::string_view trim(std::string_view s);
std::string lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

// Collapses whitespace runs to single spaces and casefolds; used for
// value-answer comparisons (DI/AVE scoring).
std::string fold_for_compare(std::string_view s);

std::vector<std::string_view> split_lines(std::string_view text);
std::string_view last_nonempty_line(std::string_view text);

// FNV-1a 64-bit, rendered as 16 hex chars. Used as the stable identity of a
// rendered prompt (replay maps, prediction records). Not cryptographic.
std::uint64_t fnv1a64(std::string_view data);
std::string hash_hex(std::string_view data);
std::string prompt_hash(std::string_view system, std::string_view user);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Fixed 2-decimal rendering used by every report.
std::string fmt2(double v);
// Truncate (not round) to 2 decimals; winning rates use this.
double trunc2(double v);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace dpkit::util
