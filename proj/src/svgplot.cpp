#include "egosynth/svgplot.hpp"

#include <cstdio>

#include "egosynth/errors.hpp"
#include "egosynth/geometry.hpp"

namespace egosynth::svg {

namespace {

constexpr double kScale = 40.0;  // pixels per meter
constexpr double kMargin = 24.0;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string fmt(const char* pattern, double a, double b) {
    char buf[96];
    std::snprintf(buf, sizeof buf, pattern, a, b);
    return buf;
}

struct Mapper {
    double height;

    std::string point(const geom::Vec2& p) const {
        return fmt("%.2f,%.2f", kMargin + p[0] * kScale, height - kMargin - p[1] * kScale);
    }
    std::string attrs(const geom::Vec2& p) const {
        return fmt("cx=\"%.2f\" cy=\"%.2f\"", kMargin + p[0] * kScale,
                   height - kMargin - p[1] * kScale);
    }
};

}  // namespace

std::string render_svg(const std::vector<sim::Sequence>& sequences, const sim::SimParams& court,
                       PlotMode mode) {
    const double width = court.court_x * kScale + 2 * kMargin;
    const double height = court.court_y * kScale + 2 * kMargin;
    const Mapper map{height};

    std::string out = fmt(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
        "viewBox=\"0 0 ",
        width, height);
    out += fmt("%.0f %.0f\">\n", width, height);
    out += "<style>\n"
           ".court{fill:#fdf6ec;stroke:#555;stroke-width:2}\n"
           ".basket{fill:#c0392b;stroke:none}\n"
           "polyline{fill:none;stroke-width:1.6;stroke-opacity:0.85}\n";
    for (int i = 0; i < kPaletteSize; ++i)
        out += ".seq" + std::to_string(i) + "{stroke:" + kPalette[i] + "}\n";
    out += ".start{fill:#1f77b4;stroke:none}\n"
           ".end{fill:#d62728;stroke:none}\n"
           "</style>\n";

    out += fmt("<rect class=\"court\" x=\"%.2f\" y=\"%.2f\" ", kMargin, kMargin);
    out += fmt("width=\"%.2f\" height=\"%.2f\"/>\n", court.court_x * kScale,
               court.court_y * kScale);
    out += "<circle class=\"basket\" " + map.attrs({court.basket[0], court.basket[1]}) +
           " r=\"6\"/>\n";

    int idx = 0;
    for (const auto& seq : sequences) {
        if (seq.configs.empty()) throw ValidationError("cannot render an empty sequence");
        const geom::Vec2 first = geom::court_projection(seq.configs.front());
        const geom::Vec2 last = geom::court_projection(seq.configs.back());

        if (mode == PlotMode::Path) {
            out += "<polyline class=\"seq" + std::to_string(idx % kPaletteSize) + "\" points=\"";
            for (std::size_t i = 0; i < seq.configs.size(); ++i) {
                if (i) out += " ";
                out += map.point(geom::court_projection(seq.configs[i]));
            }
            out += "\"/>\n";
            out += "<circle class=\"start\" " + map.attrs(first) + " r=\"4\"/>\n";
            out += "<rect class=\"end\" " + fmt("x=\"%.2f\" y=\"%.2f\"",
                                                kMargin + last[0] * kScale - 3.5,
                                                height - kMargin - last[1] * kScale - 3.5) +
                   " width=\"7\" height=\"7\"/>\n";
        } else {
            out += "<circle class=\"start\" " + map.attrs(first) + " r=\"2.5\"/>\n";
            out += "<circle class=\"end\" " + map.attrs(last) + " r=\"2.5\"/>\n";
        }
        ++idx;
    }
    out += "</svg>\n";
    return out;
}

}  // namespace egosynth::svg
