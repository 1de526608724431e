#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mergelab/sweep.hpp"

namespace mergelab {

// Position in the objective plane; both coordinates are maximized.
struct Objectives {
    double instruction = 0.0;
    double medical = 0.0;

    friend bool operator==(const Objectives&, const Objectives&) = default;
};

inline constexpr double kDefaultNearEpsilon = 0.005;

// p >= q in both objectives and strictly better in at least one.
bool dominates(const Objectives& p, const Objectives& q) noexcept;

// Indices of the non-dominated points (all copies of duplicated ones),
// ordered by instruction, then medical, then index, all ascending.
// O(n log n).
std::vector<std::size_t> pareto_frontier(std::span<const Objectives> points);

// Indices i such that no other point j has instruction_j >= instruction_i + eps
// and medical_j >= medical_i + eps, together with the exact frontier. Same
// ordering as pareto_frontier. eps = 0 gives exactly the frontier.
std::vector<std::size_t> near_frontier(std::span<const Objectives> points, double epsilon);

struct ParetoResult {
    std::vector<std::size_t> frontier;
    std::vector<std::size_t> near_frontier;
    double epsilon = 0.0;
};

ParetoResult analyze_pareto(std::span<const Objectives> points, double epsilon = kDefaultNearEpsilon);

// EvalPoint overloads. Failed points are ignored: never on the frontier and
// never dominating. Returned indices refer to `points`.
bool dominates(const EvalPoint& p, const EvalPoint& q) noexcept;
ParetoResult analyze_pareto(std::span<const EvalPoint> points, double epsilon = kDefaultNearEpsilon);

}  // namespace mergelab
