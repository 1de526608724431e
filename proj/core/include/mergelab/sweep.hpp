#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mergelab/error.hpp"
#include "mergelab/merge.hpp"
#include "mergelab/metrics.hpp"

namespace mergelab {

// Evenly spaced interpolation weights for one merge method.
struct SweepGrid {
    MergeMethod method = MergeMethod::Linear;
    double start = 0.0;
    double stop = 1.0;
    double step = 0.1;
};

// Weights start + i*step for i = 0..floor((stop-start)/step + 1e-9), each
// rounded to 9 decimals. Recipes use the default eps and output dtype.
std::vector<MergeRecipe> generate_grid(const SweepGrid& grid);

enum class EvalStatus { Ok, Failed };

// One merged checkpoint in the (instruction, medical) objective plane.
struct EvalPoint {
    MergeRecipe recipe;
    double instruction_score = 0.0;
    double medical_avg = 0.0;
    BenchmarkScores per_benchmark;
    std::optional<std::filesystem::path> checkpoint_path;
    EvalStatus status = EvalStatus::Ok;
    std::string error;

    bool ok() const noexcept { return status == EvalStatus::Ok; }

    friend bool operator==(const EvalPoint&, const EvalPoint&) = default;
};

struct EvaluatorResult {
    double instruction_score = 0.0;
    BenchmarkScores per_benchmark;
};

// Scores a merged checkpoint. `name` is recipe_name() of the recipe that
// produced it. Throwing marks that sweep point as failed.
class Evaluator {
public:
    virtual ~Evaluator() = default;

    virtual EvaluatorResult evaluate(const Checkpoint& ckpt, const std::string& name) const = 0;

    // False makes run_sweep serialize calls to evaluate().
    virtual bool concurrent_safe() const { return true; }
};

// Looks scores up by checkpoint name in an external score file.
class ScoreFileEvaluator final : public Evaluator {
public:
    explicit ScoreFileEvaluator(std::map<std::string, ExternalScores> scores);

    EvaluatorResult evaluate(const Checkpoint& ckpt, const std::string& name) const override;

private:
    std::map<std::string, ExternalScores> scores_;
};

struct SweepOptions {
    std::size_t workers = 1;
    // Write each merged checkpoint to out_dir/<recipe_name>.safetensors.
    bool persist_checkpoints = false;
    std::filesystem::path out_dir;
};

// Thrown when a merge fails; carries the recipe that failed.
class SweepMergeError : public MergeError {
public:
    SweepMergeError(MergeRecipe recipe, const std::string& message);
    const MergeRecipe& recipe() const noexcept { return recipe_; }

private:
    MergeRecipe recipe_;
};

// Merges and evaluates every recipe, returning one point per recipe in recipe
// order. Evaluator failures produce a Failed point; merge failures throw
// SweepMergeError for the first failing recipe in recipe order. Results do
// not depend on the worker count.
std::vector<EvalPoint> run_sweep(const Checkpoint& first, const Checkpoint& second,
                                 const std::vector<MergeRecipe>& recipes, const Evaluator& evaluator,
                                 const SweepOptions& options = {});

// Manifest: {"points": [{"method", "weight", "instruction_score",
// "medical_avg", "per_benchmark", "checkpoint_path", "status"[, "error"]}]}.
// Scores of failed points are null.
std::string sweep_manifest_json(const std::vector<EvalPoint>& points);
std::vector<EvalPoint> parse_sweep_manifest(std::string_view json_text);

}  // namespace mergelab
