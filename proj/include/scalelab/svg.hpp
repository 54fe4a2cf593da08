#pragma once

// Small native SVG writer for log-log line plots; no external tooling.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "scalelab/common.hpp"
#include "scalelab/ioutil.hpp"

namespace scalelab::svg {

struct Series {
    std::string label;
    std::string color = "#1f77b4";
    bool dashed = false;
    std::vector<double> xs, ys;
};

inline void write_loglog_plot(const std::filesystem::path& path, const std::string& title,
                              const std::string& xlabel, const std::string& ylabel,
                              const std::vector<Series>& series) {
    constexpr double W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (!(s.xs[i] > 0) || !(s.ys[i] > 0)) continue;
            xmin = std::min(xmin, s.xs[i]);
            xmax = std::max(xmax, s.xs[i]);
            ymin = std::min(ymin, s.ys[i]);
            ymax = std::max(ymax, s.ys[i]);
        }
    if (!(xmin < xmax)) xmax = xmin * 10 + 1, xmin = std::max(xmin / 10, 1e-12);
    if (!(ymin < ymax)) ymax = ymin * 10 + 1, ymin = std::max(ymin / 10, 1e-12);
    const double lx0 = std::log10(xmin), lx1 = std::log10(xmax);
    const double ly0 = std::log10(ymin), ly1 = std::log10(ymax);
    auto px = [&](double x) { return ml + (std::log10(x) - lx0) / (lx1 - lx0) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (std::log10(y) - ly0) / (ly1 - ly0) * (H - mt - mb); };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + io::format_double(W) +
           "\" height=\"" + io::format_double(H) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + io::format_double(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
           title + "</text>\n";

    // decade grid lines
    for (int e = static_cast<int>(std::ceil(lx0)); e <= static_cast<int>(std::floor(lx1)); ++e) {
        const double x = px(std::pow(10.0, e));
        out += "<line x1=\"" + io::format_double(x) + "\" y1=\"" + io::format_double(mt) +
               "\" x2=\"" + io::format_double(x) + "\" y2=\"" + io::format_double(H - mb) +
               "\" stroke=\"#dddddd\"/>\n";
        out += "<text x=\"" + io::format_double(x) + "\" y=\"" + io::format_double(H - mb + 18) +
               "\" text-anchor=\"middle\" font-size=\"11\">1e" + io::format_int(e) + "</text>\n";
    }
    for (int e = static_cast<int>(std::ceil(ly0)); e <= static_cast<int>(std::floor(ly1)); ++e) {
        const double y = py(std::pow(10.0, e));
        out += "<line x1=\"" + io::format_double(ml) + "\" y1=\"" + io::format_double(y) +
               "\" x2=\"" + io::format_double(W - mr) + "\" y2=\"" + io::format_double(y) +
               "\" stroke=\"#dddddd\"/>\n";
        out += "<text x=\"" + io::format_double(ml - 6) + "\" y=\"" + io::format_double(y + 4) +
               "\" text-anchor=\"end\" font-size=\"11\">1e" + io::format_int(e) + "</text>\n";
    }
    out += "<rect x=\"" + io::format_double(ml) + "\" y=\"" + io::format_double(mt) + "\" width=\"" +
           io::format_double(W - ml - mr) + "\" height=\"" + io::format_double(H - mt - mb) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    out += "<text x=\"" + io::format_double(W / 2) + "\" y=\"" + io::format_double(H - 12) +
           "\" text-anchor=\"middle\" font-size=\"13\">" + xlabel + "</text>\n";
    out += "<text x=\"16\" y=\"" + io::format_double(H / 2) +
           "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
           io::format_double(H / 2) + ")\">" + ylabel + "</text>\n";

    int legend_row = 0;
    for (const auto& s : series) {
        std::string pts;
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (!(s.xs[i] > 0) || !(s.ys[i] > 0)) continue;
            pts += io::format_double(px(s.xs[i])) + "," + io::format_double(py(s.ys[i])) + " ";
        }
        out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + s.color +
               "\" stroke-width=\"1.5\"" + (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
        const double yl = mt + 16 + 16 * legend_row++;
        out += "<line x1=\"" + io::format_double(W - mr - 150) + "\" y1=\"" + io::format_double(yl) +
               "\" x2=\"" + io::format_double(W - mr - 120) + "\" y2=\"" + io::format_double(yl) +
               "\" stroke=\"" + s.color + "\" stroke-width=\"2\"" +
               (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
        out += "<text x=\"" + io::format_double(W - mr - 114) + "\" y=\"" + io::format_double(yl + 4) +
               "\" font-size=\"11\">" + s.label + "</text>\n";
    }
    out += "</svg>\n";
    io::write_file(path, out);
}

} // namespace scalelab::svg
