#include "bundle_format.hpp"

#include <algorithm>

#include "egosynth/errors.hpp"
#include "egosynth/jsonio.hpp"

namespace egosynth::detail {

void write_bundle(const std::string& path, const std::string& body) {
    io::write_file_atomic(path, io::header_line("egosynth-bundle", 1) + "\n" + body + "\n");
}

nlohmann::json read_bundle(const std::string& path, const std::string& role) {
    const auto lines = io::split_lines(io::read_file(path));
    if (lines.empty() || lines[0].empty()) throw ParseError("missing header", 1);
    io::expect_header(io::parse_line(lines[0], 1), "egosynth-bundle", 1, 1);
    if (lines.size() < 2 || lines[1].empty()) throw ParseError("missing bundle body", 2);
    nlohmann::json j = io::parse_line(lines[1], 2);
    if (!j.is_object() || !j.contains("role") || j["role"] != role)
        throw ParseError("bundle role mismatch, want \"" + role + "\"", 2);
    return j;
}

std::string bundle_prefix(const std::string& role, const std::string& dataset_id,
                          double initial_loss, double final_loss) {
    return "{\"role\":\"" + role + "\",\"dataset_id\":\"" + dataset_id +
           "\",\"initial_loss\":" + io::format_double(initial_loss) +
           ",\"final_loss\":" + io::format_double(final_loss);
}

void finish_losses(const std::vector<double>& log, double* initial, double* final_) {
    const std::size_t n = log.size();
    const std::size_t w = std::min<std::size_t>(50, n);
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
        a += log[i];
        b += log[n - 1 - i];
    }
    *initial = a / static_cast<double>(w);
    *final_ = b / static_cast<double>(w);
}

}  // namespace egosynth::detail
