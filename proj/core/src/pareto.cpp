#include "mergelab/pareto.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "mergelab/error.hpp"

namespace mergelab {

namespace {

void sort_for_output(std::vector<std::size_t>& idx, std::span<const Objectives> points) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& p = points[a];
        const auto& q = points[b];
        if (p.instruction != q.instruction) return p.instruction < q.instruction;
        if (p.medical != q.medical) return p.medical < q.medical;
        return a < b;
    });
}

}  // namespace

bool dominates(const Objectives& p, const Objectives& q) noexcept {
    return p.instruction >= q.instruction && p.medical >= q.medical &&
           (p.instruction > q.instruction || p.medical > q.medical);
}

std::vector<std::size_t> pareto_frontier(std::span<const Objectives> points) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return points[a].instruction > points[b].instruction;
    });

    // Sweep groups of equal instruction score from the best down. Within a
    // group only the maximal medical scores survive, and only if no point
    // with a strictly higher instruction score reaches that medical score.
    std::vector<std::size_t> frontier;
    double best_medical_above = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < order.size();) {
        std::size_t end = g;
        double group_max = -std::numeric_limits<double>::infinity();
        while (end < order.size() && points[order[end]].instruction == points[order[g]].instruction) {
            group_max = std::max(group_max, points[order[end]].medical);
            ++end;
        }
        if (group_max > best_medical_above) {
            for (std::size_t k = g; k < end; ++k) {
                if (points[order[k]].medical == group_max) frontier.push_back(order[k]);
            }
        }
        best_medical_above = std::max(best_medical_above, group_max);
        g = end;
    }
    sort_for_output(frontier, points);
    return frontier;
}

std::vector<std::size_t> near_frontier(std::span<const Objectives> points, double epsilon) {
    if (!(epsilon >= 0.0)) throw ArgumentError("near_frontier: epsilon must be non-negative");
    auto result = pareto_frontier(points);
    if (epsilon == 0.0 || points.empty()) return result;

    // Points sorted by instruction ascending; suffix maxima of the medical
    // score, keeping the two best distinct indices so a point never
    // eps-dominates itself when eps is below its rounding granularity.
    const std::size_t n = points.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return points[a].instruction < points[b].instruction; });

    constexpr double kNone = -std::numeric_limits<double>::infinity();
    std::vector<double> best(n + 1, kNone);
    std::vector<std::size_t> best_idx(n + 1, n);
    std::vector<double> second(n + 1, kNone);
    for (std::size_t k = n; k-- > 0;) {
        const double m = points[order[k]].medical;
        best[k] = best[k + 1];
        best_idx[k] = best_idx[k + 1];
        second[k] = second[k + 1];
        if (m > best[k]) {
            second[k] = best[k];
            best[k] = m;
            best_idx[k] = order[k];
        } else if (m > second[k]) {
            second[k] = m;
        }
    }

    std::vector<bool> in_result(n, false);
    for (const auto i : result) in_result[i] = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (in_result[i]) continue;
        const double need_x = points[i].instruction + epsilon;
        const double need_y = points[i].medical + epsilon;
        const auto first = std::partition_point(order.begin(), order.end(), [&](std::size_t j) {
            return points[j].instruction < need_x;
        });
        const auto k = static_cast<std::size_t>(first - order.begin());
        const double reach = best_idx[k] == i ? second[k] : best[k];
        if (!(reach >= need_y)) result.push_back(i);
    }
    sort_for_output(result, points);
    return result;
}

ParetoResult analyze_pareto(std::span<const Objectives> points, double epsilon) {
    return ParetoResult{pareto_frontier(points), near_frontier(points, epsilon), epsilon};
}

bool dominates(const EvalPoint& p, const EvalPoint& q) noexcept {
    if (!p.ok() || !q.ok()) return false;
    return dominates(Objectives{p.instruction_score, p.medical_avg}, Objectives{q.instruction_score, q.medical_avg});
}

ParetoResult analyze_pareto(std::span<const EvalPoint> points, double epsilon) {
    std::vector<Objectives> objectives;
    std::vector<std::size_t> original;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!points[i].ok()) continue;
        objectives.push_back({points[i].instruction_score, points[i].medical_avg});
        original.push_back(i);
    }
    auto result = analyze_pareto(std::span<const Objectives>(objectives), epsilon);
    for (auto& i : result.frontier) i = original[i];
    for (auto& i : result.near_frontier) i = original[i];
    return result;
}

}  // namespace mergelab
