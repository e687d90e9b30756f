#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kesten {

/// Shortest round-trip safe text for a double ("%.17g").
std::string format_double(double x);
double parse_double(const std::string& s);
std::vector<std::string> split_csv_line(const std::string& line);

/// 64-bit FNV-1a digest, hex encoded; used to stamp outputs with their inputs.
std::string fnv1a_hex(std::string_view data);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

}  // namespace kesten
