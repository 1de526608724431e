#include "mergelab/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "mergelab/error.hpp"

namespace mergelab {

namespace {

constexpr double kWidth = 800;
constexpr double kHeight = 600;
constexpr double kLeft = 80;
constexpr double kRight = 760;
constexpr double kTop = 50;
constexpr double kBottom = 520;

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
double px(double x) { return kLeft + clamp01(x) * (kRight - kLeft); }
double py(double y) { return kBottom - clamp01(y) * (kBottom - kTop); }

std::string xml_escape(std::string_view s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string svg_open(std::string_view title) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n"
       << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
       << "<text x=\"400\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">"
       << xml_escape(title) << "</text>\n";
    return os.str();
}

std::string axes(std::string_view x_label, std::string_view y_label) {
    std::ostringstream os;
    os << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
       << "<line x1=\"" << fixed(kLeft, 2) << "\" y1=\"" << fixed(kBottom, 2) << "\" x2=\"" << fixed(kRight, 2)
       << "\" y2=\"" << fixed(kBottom, 2) << "\"/>\n"
       << "<line x1=\"" << fixed(kLeft, 2) << "\" y1=\"" << fixed(kBottom, 2) << "\" x2=\"" << fixed(kLeft, 2)
       << "\" y2=\"" << fixed(kTop, 2) << "\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double v = i / 5.0;
        os << "<line x1=\"" << fixed(px(v), 2) << "\" y1=\"" << fixed(kBottom, 2) << "\" x2=\"" << fixed(px(v), 2)
           << "\" y2=\"" << fixed(kBottom + 6, 2) << "\"/>\n"
           << "<line x1=\"" << fixed(kLeft - 6, 2) << "\" y1=\"" << fixed(py(v), 2) << "\" x2=\"" << fixed(kLeft, 2)
           << "\" y2=\"" << fixed(py(v), 2) << "\"/>\n";
    }
    os << "</g>\n<g class=\"tick-labels\" font-family=\"sans-serif\" font-size=\"12\">\n";
    for (int i = 0; i <= 5; ++i) {
        const double v = i / 5.0;
        os << "<text x=\"" << fixed(px(v), 2) << "\" y=\"" << fixed(kBottom + 22, 2) << "\" text-anchor=\"middle\">"
           << fixed(v, 1) << "</text>\n"
           << "<text x=\"" << fixed(kLeft - 10, 2) << "\" y=\"" << fixed(py(v) + 4, 2) << "\" text-anchor=\"end\">"
           << fixed(v, 1) << "</text>\n";
    }
    os << "</g>\n"
       << "<text class=\"x-label\" x=\"" << fixed((kLeft + kRight) / 2, 2) << "\" y=\"565\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(x_label) << "</text>\n"
       << "<text class=\"y-label\" x=\"25\" y=\"" << fixed((kTop + kBottom) / 2, 2) << "\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"14\" transform=\"rotate(-90 25 " << fixed((kTop + kBottom) / 2, 2)
       << ")\">" << xml_escape(y_label) << "</text>\n";
    return os.str();
}

std::string point_title(const EvalPoint& p) {
    return recipe_name(p.recipe) + " (" + fixed(p.instruction_score, 4) + ", " + fixed(p.medical_avg, 4) + ")";
}

std::string csv_field(std::string_view line, std::size_t& pos) {
    const auto end = line.find(',', pos);
    std::string field(line.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    pos = end == std::string_view::npos ? line.size() + 1 : end + 1;
    return field;
}

double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ArgumentError("malformed number '" + s + "' in " + what);
    }
}

nlohmann::ordered_json point_entry(const std::vector<EvalPoint>& points, std::size_t i) {
    const auto& p = points[i];
    nlohmann::ordered_json e;
    e["index"] = i;
    e["name"] = recipe_name(p.recipe);
    e["method"] = std::string(method_name(p.recipe.method));
    e["weight"] = p.recipe.weight;
    e["instruction_score"] = p.instruction_score;
    e["medical_avg"] = p.medical_avg;
    return e;
}

}  // namespace

std::string sweep_csv(const std::vector<EvalPoint>& points) {
    std::string out = "method,weight,instruction_score,medical_avg,status\n";
    for (const auto& p : points) {
        out += std::string(method_name(p.recipe.method)) + "," + fixed(p.recipe.weight, 6) + ",";
        if (p.ok()) {
            out += fixed(p.instruction_score, 6) + "," + fixed(p.medical_avg, 6) + ",ok\n";
        } else {
            out += ",,failed\n";
        }
    }
    return out;
}

std::vector<EvalPoint> parse_sweep_csv(std::string_view text) {
    std::vector<EvalPoint> points;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        start = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        if (line_no == 1) {
            if (line != "method,weight,instruction_score,medical_avg,status") {
                throw ArgumentError("CSV header must be method,weight,instruction_score,medical_avg,status");
            }
            continue;
        }
        if (line.empty()) continue;

        const std::string where = "CSV line " + std::to_string(line_no);
        std::size_t pos = 0;
        const auto method = csv_field(line, pos);
        const auto weight = csv_field(line, pos);
        const auto ins = csv_field(line, pos);
        const auto med = csv_field(line, pos);
        const auto status = csv_field(line, pos);
        if (pos <= line.size()) throw ArgumentError(where + " has more than five fields");

        EvalPoint p;
        const auto m = parse_method(method);
        if (!m) throw ArgumentError(where + ": unknown method '" + method + "'");
        p.recipe.method = *m;
        p.recipe.weight = parse_number(weight, where);
        if (status == "ok") {
            p.instruction_score = parse_number(ins, where);
            p.medical_avg = parse_number(med, where);
        } else if (status == "failed") {
            p.status = EvalStatus::Failed;
        } else {
            throw ArgumentError(where + ": unknown status '" + status + "'");
        }
        points.push_back(std::move(p));
    }
    if (line_no == 0) throw ArgumentError("empty CSV input");
    return points;
}

std::vector<EvalPoint> load_eval_points(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return parse_sweep_manifest(text);
    return parse_sweep_csv(text);
}

std::string pareto_report_json(const std::vector<EvalPoint>& points, const ParetoResult& result) {
    nlohmann::ordered_json doc;
    doc["epsilon"] = result.epsilon;
    doc["frontier"] = nlohmann::ordered_json::array();
    for (const auto i : result.frontier) doc["frontier"].push_back(point_entry(points, i));
    doc["near_frontier"] = nlohmann::ordered_json::array();
    for (const auto i : result.near_frontier) doc["near_frontier"].push_back(point_entry(points, i));
    return doc.dump(2) + "\n";
}

std::string tradeoff_svg(const std::vector<EvalPoint>& points, const ParetoResult& result) {
    const std::set<std::size_t> frontier(result.frontier.begin(), result.frontier.end());
    const std::set<std::size_t> near(result.near_frontier.begin(), result.near_frontier.end());

    std::ostringstream os;
    os << svg_open("Merge trade-off") << axes("Instruction Following", "Medical Avg");

    if (result.frontier.size() > 1) {
        os << "<polyline class=\"frontier-line\" fill=\"none\" stroke=\"#c44e52\" stroke-width=\"1.5\" "
              "stroke-dasharray=\"4 3\" points=\"";
        for (std::size_t k = 0; k < result.frontier.size(); ++k) {
            const auto& p = points[result.frontier[k]];
            os << (k ? " " : "") << fixed(px(p.instruction_score), 2) << "," << fixed(py(p.medical_avg), 2);
        }
        os << "\"/>\n";
    }

    os << "<g class=\"markers\">\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!p.ok()) continue;
        const auto x = px(p.instruction_score);
        const auto y = py(p.medical_avg);
        const auto title = "<title>" + xml_escape(point_title(p)) + "</title>";
        if (frontier.contains(i)) {
            os << "<rect class=\"point frontier\" x=\"" << fixed(x - 5, 2) << "\" y=\"" << fixed(y - 5, 2)
               << "\" width=\"10\" height=\"10\" fill=\"#c44e52\" stroke=\"black\">" << title << "</rect>\n";
        } else {
            const char* cls = near.contains(i) ? "point near" : "point";
            const char* fill = near.contains(i) ? "#dd8452" : "#4c72b0";
            os << "<circle class=\"" << cls << "\" cx=\"" << fixed(x, 2) << "\" cy=\"" << fixed(y, 2)
               << "\" r=\"5\" fill=\"" << fill << "\">" << title << "</circle>\n";
        }
    }
    os << "</g>\n"
       << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect x=\"600\" y=\"60\" width=\"10\" height=\"10\" fill=\"#c44e52\" stroke=\"black\"/>"
          "<text x=\"616\" y=\"69\">Pareto frontier</text>\n"
       << "<circle cx=\"605\" cy=\"85\" r=\"5\" fill=\"#dd8452\"/><text x=\"616\" y=\"89\">near frontier (eps="
       << fixed(result.epsilon, 4) << ")</text>\n"
       << "<circle cx=\"605\" cy=\"105\" r=\"5\" fill=\"#4c72b0\"/><text x=\"616\" y=\"109\">dominated</text>\n"
       << "</g>\n</svg>\n";
    return os.str();
}

std::string trajectory_svg(const std::vector<EvalPoint>& points) {
    std::map<MergeMethod, std::vector<const EvalPoint*>> by_method;
    for (const auto& p : points) {
        if (p.ok()) by_method[p.recipe.method].push_back(&p);
    }

    std::ostringstream os;
    os << svg_open("Score vs. merge ratio") << axes("Merge ratio", "Score");

    struct Series {
        const char* label;
        const char* color;
        double EvalPoint::*field;
    };
    const Series series[] = {{"Medical Avg", "#4c72b0", &EvalPoint::medical_avg},
                             {"Instruction Following", "#c44e52", &EvalPoint::instruction_score}};

    int legend_row = 0;
    for (auto& [method, list] : by_method) {
        std::stable_sort(list.begin(), list.end(),
                         [](const EvalPoint* a, const EvalPoint* b) { return a->recipe.weight < b->recipe.weight; });
        const char* dash = method == MergeMethod::Slerp ? " stroke-dasharray=\"6 3\"" : "";
        for (const auto& s : series) {
            const std::string name = std::string(method_name(method)) + " " + s.label;
            os << "<g class=\"series\" data-series=\"" << xml_escape(name) << "\">\n"
               << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << dash << " points=\"";
            for (std::size_t k = 0; k < list.size(); ++k) {
                os << (k ? " " : "") << fixed(px(list[k]->recipe.weight), 2) << ","
                   << fixed(py(list[k]->*s.field), 2);
            }
            os << "\"/>\n";
            for (const auto* p : list) {
                os << "<circle class=\"series-marker\" cx=\"" << fixed(px(p->recipe.weight), 2) << "\" cy=\""
                   << fixed(py(p->*s.field), 2) << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
            }
            os << "</g>\n";
            const double ly = 60 + 18 * legend_row++;
            os << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\"><line x1=\"560\" y1=\""
               << fixed(ly, 2) << "\" x2=\"585\" y2=\"" << fixed(ly, 2) << "\" stroke=\"" << s.color
               << "\" stroke-width=\"2\"" << dash << "/><text x=\"592\" y=\"" << fixed(ly + 4, 2) << "\">"
               << xml_escape(name) << "</text></g>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<std::filesystem::path> emit_tradeoff_svg(const std::vector<EvalPoint>& points,
                                                     const ParetoResult& result,
                                                     const std::filesystem::path& path) {
    if (std::none_of(points.begin(), points.end(), [](const EvalPoint& p) { return p.ok(); })) {
        throw ArgumentError("no successfully evaluated points to plot");
    }
    auto trajectory = path;
    trajectory.replace_filename(path.stem().string() + "_trajectory.svg");
    write_text_file(path, tradeoff_svg(points, result));
    write_text_file(trajectory, trajectory_svg(points));
    return {path, trajectory};
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace mergelab
