#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "felab/harness.hpp"
#include "json.hpp"

namespace felab {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(10) << x;
    return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path.string());
    out << content;
}

std::string render_svg(const ExperimentReport& report) {
    static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b"};
    const double width = 860, height = 420;
    const double left = 60, right = 180, top = 20, bottom = 40;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    const int episodes = report.episodes;

    auto x_of = [&](double ep) { return left + (ep - 1) / std::max(1, episodes - 1) * plot_w; };
    auto y_of = [&](double score) { return top + (100.0 - score) / 100.0 * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 100; tick += 25) {
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y_of(tick) + 4
            << "\" text-anchor=\"end\" font-size=\"12\">" << tick << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 8
        << "\" text-anchor=\"middle\" font-size=\"12\">episode</text>\n";

    for (int ep : report.switch_episodes) {
        svg << "<line x1=\"" << x_of(ep) << "\" y1=\"" << top << "\" x2=\"" << x_of(ep)
            << "\" y2=\"" << top + plot_h
            << "\" stroke=\"gray\" stroke-dasharray=\"4,4\"/>\n";
    }

    int idx = 0;
    for (const auto& [agent, curve] : report.curves) {
        const char* color = kColors[idx % 6];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t e = 0; e < curve.size(); ++e) {
            svg << x_of(static_cast<double>(e + 1)) << ',' << y_of(curve[e]) << ' ';
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << left + plot_w + 10 << "\" y=\"" << top + 16 + 18 * idx
            << "\" font-size=\"12\" fill=\"" << color << "\">" << agent << "</text>\n";
        ++idx;
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace

void emit_report(const ExperimentReport& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);

    std::ostringstream table;
    table << "agent,row,mean_score,ci_lo,ci_hi,mean_moves\n";
    for (const CellStat& c : report.cells) {
        table << c.agent << ',' << c.row << ',' << fmt(c.mean_score) << ','
              << fmt(c.ci_lo) << ',' << fmt(c.ci_hi) << ',' << fmt(c.mean_moves) << '\n';
    }
    write_file(dir / "table.csv", table.str());

    std::ostringstream curves;
    curves << "agent,episode,mean_score\n";
    for (const auto& [agent, curve] : report.curves) {
        for (std::size_t e = 0; e < curve.size(); ++e) {
            curves << agent << ',' << e + 1 << ',' << fmt(curve[e]) << '\n';
        }
    }
    write_file(dir / "curves.csv", curves.str());

    nlohmann::json j;
    j["schema_version"] = 1;
    j["experiment"] = report.experiment;
    j["seed"] = report.seed;
    j["trials"] = report.trials;
    j["episodes"] = report.episodes;
    j["switch_episodes"] = report.switch_episodes;
    j["results"] = nlohmann::json::array();
    for (const CellStat& c : report.cells) {
        j["results"].push_back({{"agent", c.agent},
                                {"row", c.row},
                                {"mean_score", c.mean_score},
                                {"ci", {c.ci_lo, c.ci_hi}},
                                {"mean_moves", c.mean_moves}});
    }
    write_file(dir / "summary.json", j.dump(2) + "\n");

    if (!report.curves.empty()) {
        write_file(dir / "curves.svg", render_svg(report));
    }
}

} // namespace felab
