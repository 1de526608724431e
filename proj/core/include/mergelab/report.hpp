#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mergelab/pareto.hpp"
#include "mergelab/sweep.hpp"

namespace mergelab {

// Columns method,weight,instruction_score,medical_avg,status; six decimals,
// '.' separator, LF line endings. Failed rows leave the scores empty.
std::string sweep_csv(const std::vector<EvalPoint>& points);
std::vector<EvalPoint> parse_sweep_csv(std::string_view text);

// Reads a sweep manifest (JSON) or sweep CSV, detected from the content.
std::vector<EvalPoint> load_eval_points(const std::filesystem::path& path);

// {"epsilon", "frontier": [...], "near_frontier": [...]}, each entry holding
// index, name, method, weight and both scores.
std::string pareto_report_json(const std::vector<EvalPoint>& points, const ParetoResult& result);

// 800x600 scatter of medical average against instruction following, axes
// fixed to [0,1]. Markers: frontier points are squares (class "point
// frontier"), other near-frontier points orange circles (class "point near"),
// the rest blue circles (class "point"). Failed points are not drawn.
std::string tradeoff_svg(const std::vector<EvalPoint>& points, const ParetoResult& result);

// Score against merge ratio: a Medical Avg and an Instruction Following
// series per merge method present.
std::string trajectory_svg(const std::vector<EvalPoint>& points);

// Writes the scatter to `path` and the trajectory plot next to it as
// <stem>_trajectory.svg. Returns both paths. Throws ArgumentError when no
// point is drawable.
std::vector<std::filesystem::path> emit_tradeoff_svg(const std::vector<EvalPoint>& points,
                                                     const ParetoResult& result,
                                                     const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace mergelab
