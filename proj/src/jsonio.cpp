#include "egosynth/jsonio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "egosynth/errors.hpp"

namespace egosynth::io {

std::string format_double(double x) {
    if (x == 0.0) x = 0.0;  // drop the sign of negative zero; JSON readers lose it anyway
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void append_double(std::string& out, double x) {
    if (x == 0.0) x = 0.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out += buf;
}

std::string format_array(std::span<const double> values) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        append_double(out, values[i]);
    }
    out += ']';
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open file for writing: " + tmp);
        out << content;
        out.flush();
        if (!out) throw Error("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("rename failed for " + path + ": " + ec.message());
}

std::vector<std::string> split_lines(const std::string& content) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string::npos) {
            lines.push_back(content.substr(pos));
            break;
        }
        lines.push_back(content.substr(pos, end - pos));
        pos = end + 1;
    }
    return lines;
}

nlohmann::json parse_line(const std::string& line, int lineno) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("invalid JSON", lineno);
    return j;
}

void expect_header(const nlohmann::json& j, const std::string& format, int version, int lineno) {
    if (!j.is_object() || !j.contains("format") || !j.contains("version"))
        throw ParseError("missing header", lineno);
    if (j["format"] != format)
        throw ParseError("unexpected format \"" + j["format"].dump() + "\", want \"" + format + "\"",
                         lineno);
    if (j["version"] != version) throw ParseError("unsupported format version", lineno);
}

std::vector<double> get_double_array(const nlohmann::json& j, const std::string& key,
                                     std::size_t expect_len, int lineno) {
    if (!j.contains(key) || !j[key].is_array()) throw ParseError("missing array \"" + key + "\"", lineno);
    const auto& arr = j[key];
    if (expect_len > 0 && arr.size() != expect_len)
        throw ParseError("array \"" + key + "\" has " + std::to_string(arr.size()) +
                             " entries, want " + std::to_string(expect_len),
                         lineno);
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number()) throw ParseError("non-numeric entry in \"" + key + "\"", lineno);
        out.push_back(v.get<double>());
    }
    return out;
}

std::string header_line(const std::string& format, int version) {
    return "{\"format\":\"" + format + "\",\"version\":" + std::to_string(version) + "}";
}

}  // namespace egosynth::io
