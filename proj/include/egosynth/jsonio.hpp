#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace egosynth::io {

/// 17 significant digits: enough to reproduce any double bit-exactly on parse.
std::string format_double(double x);

void append_double(std::string& out, double x);

/// "[a,b,c]" with 17-significant-digit entries.
std::string format_array(std::span<const double> values);

std::string read_file(const std::string& path);

/// Write via a sibling temp file and rename, so readers never see partial content.
void write_file_atomic(const std::string& path, const std::string& content);

std::vector<std::string> split_lines(const std::string& content);

/// Parse one JSON line; failures become ParseError carrying the line number.
nlohmann::json parse_line(const std::string& line, int lineno);

/// Validate the {"format":...,"version":...} header line.
void expect_header(const nlohmann::json& j, const std::string& format, int version, int lineno);

/// Extract a numeric array field, checking arity when expect_len > 0.
std::vector<double> get_double_array(const nlohmann::json& j, const std::string& key,
                                     std::size_t expect_len, int lineno);

std::string header_line(const std::string& format, int version);

}  // namespace egosynth::io
