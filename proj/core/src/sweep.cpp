#include "mergelab/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include "mergelab/error.hpp"

namespace mergelab {

namespace {

using ordered_json = nlohmann::ordered_json;

double round9(double x) { return std::round(x * 1e9) / 1e9; }

EvalPoint evaluate_merged(const Checkpoint& merged, const MergeRecipe& recipe, const Evaluator& evaluator,
                          std::mutex* serial) {
    EvalPoint point;
    point.recipe = recipe;
    try {
        EvaluatorResult r;
        if (serial != nullptr) {
            std::lock_guard lock(*serial);
            r = evaluator.evaluate(merged, recipe_name(recipe));
        } else {
            r = evaluator.evaluate(merged, recipe_name(recipe));
        }
        if (!(r.instruction_score >= 0.0 && r.instruction_score <= 1.0)) {
            throw ScoreError("instruction score " + std::to_string(r.instruction_score) + " is outside [0, 1]");
        }
        point.medical_avg = medical_avg(r.per_benchmark);
        point.instruction_score = r.instruction_score;
        point.per_benchmark = std::move(r.per_benchmark);
    } catch (const std::exception& e) {
        point.status = EvalStatus::Failed;
        point.error = e.what();
        point.instruction_score = 0.0;
        point.medical_avg = 0.0;
        point.per_benchmark.clear();
    }
    return point;
}

}  // namespace

std::vector<MergeRecipe> generate_grid(const SweepGrid& grid) {
    if (!std::isfinite(grid.start) || !std::isfinite(grid.stop) || grid.start < 0.0 || grid.stop > 1.0) {
        throw ArgumentError("grid bounds must lie in [0, 1]");
    }
    if (grid.start > grid.stop) throw ArgumentError("grid start must not exceed stop");
    if (!(grid.step > 0.0) || !std::isfinite(grid.step)) throw ArgumentError("grid step must be positive");

    const auto count = static_cast<std::size_t>(std::floor((grid.stop - grid.start) / grid.step + 1e-9)) + 1;
    std::vector<MergeRecipe> recipes;
    recipes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        MergeRecipe r;
        r.method = grid.method;
        r.weight = std::min(round9(grid.start + static_cast<double>(i) * grid.step), grid.stop);
        recipes.push_back(r);
    }
    return recipes;
}

ScoreFileEvaluator::ScoreFileEvaluator(std::map<std::string, ExternalScores> scores) : scores_(std::move(scores)) {}

EvaluatorResult ScoreFileEvaluator::evaluate(const Checkpoint&, const std::string& name) const {
    const auto it = scores_.find(name);
    if (it == scores_.end()) throw ScoreError("no scores for checkpoint '" + name + "'");
    const auto& rec = it->second;
    if (!rec.ifeval) throw ScoreError("checkpoint '" + name + "' has no ifeval scores");
    if (rec.benchmarks.empty()) throw ScoreError("checkpoint '" + name + "' has no benchmark scores");
    return EvaluatorResult{ifeval_score(*rec.ifeval), rec.benchmarks};
}

SweepMergeError::SweepMergeError(MergeRecipe recipe, const std::string& message)
    : MergeError("recipe " + recipe_name(recipe) + ": " + message), recipe_(recipe) {}

std::vector<EvalPoint> run_sweep(const Checkpoint& first, const Checkpoint& second,
                                 const std::vector<MergeRecipe>& recipes, const Evaluator& evaluator,
                                 const SweepOptions& options) {
    const std::size_t n = recipes.size();
    std::vector<EvalPoint> points(n);
    std::vector<std::exception_ptr> merge_errors(n);
    std::mutex serial_eval;
    std::mutex* serial = evaluator.concurrent_safe() ? nullptr : &serial_eval;

    if (options.persist_checkpoints) std::filesystem::create_directories(options.out_dir);

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            const auto& recipe = recipes[i];
            try {
                auto report = merge_checkpoints(first, second, recipe);
                std::optional<std::filesystem::path> path;
                if (options.persist_checkpoints) {
                    path = options.out_dir / (recipe_name(recipe) + ".safetensors");
                    write_checkpoint(report.merged, *path);
                }
                points[i] = evaluate_merged(report.merged, recipe, evaluator, serial);
                points[i].checkpoint_path = std::move(path);
            } catch (const std::exception& e) {
                merge_errors[i] = std::make_exception_ptr(SweepMergeError(recipe, e.what()));
            }
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }

    for (const auto& err : merge_errors) {
        if (err) std::rethrow_exception(err);
    }
    return points;
}

// ---------------------------------------------------------------- manifest

std::string sweep_manifest_json(const std::vector<EvalPoint>& points) {
    ordered_json list = ordered_json::array();
    for (const auto& p : points) {
        ordered_json entry;
        entry["name"] = recipe_name(p.recipe);
        entry["method"] = std::string(method_name(p.recipe.method));
        entry["weight"] = p.recipe.weight;
        if (p.ok()) {
            entry["instruction_score"] = p.instruction_score;
            entry["medical_avg"] = p.medical_avg;
        } else {
            entry["instruction_score"] = nullptr;
            entry["medical_avg"] = nullptr;
        }
        entry["per_benchmark"] = ordered_json::object();
        for (const auto& [k, v] : p.per_benchmark) entry["per_benchmark"][k] = v;
        entry["checkpoint_path"] =
            p.checkpoint_path ? ordered_json(p.checkpoint_path->generic_string()) : ordered_json(nullptr);
        entry["status"] = p.ok() ? "ok" : "failed";
        if (!p.ok()) entry["error"] = p.error;
        list.push_back(std::move(entry));
    }
    ordered_json doc;
    doc["points"] = std::move(list);
    return doc.dump(2) + "\n";
}

std::vector<EvalPoint> parse_sweep_manifest(std::string_view json_text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text.begin(), json_text.end());
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("malformed sweep manifest: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("points") || !doc["points"].is_array()) {
        throw ArgumentError("sweep manifest needs a \"points\" array");
    }
    std::vector<EvalPoint> points;
    try {
        for (const auto& entry : doc["points"]) {
            EvalPoint p;
            const auto method = parse_method(entry.at("method").get<std::string>());
            if (!method) throw ArgumentError("unknown method in sweep manifest");
            p.recipe.method = *method;
            p.recipe.weight = entry.at("weight").get<double>();
            p.recipe.validate();
            const auto status = entry.at("status").get<std::string>();
            if (status != "ok" && status != "failed") throw ArgumentError("unknown status '" + status + "'");
            p.status = status == "ok" ? EvalStatus::Ok : EvalStatus::Failed;
            if (p.ok()) {
                p.instruction_score = entry.at("instruction_score").get<double>();
                p.medical_avg = entry.at("medical_avg").get<double>();
            }
            if (entry.contains("per_benchmark")) {
                for (const auto& [k, v] : entry["per_benchmark"].items()) p.per_benchmark[k] = v.get<double>();
            }
            if (entry.contains("checkpoint_path") && entry["checkpoint_path"].is_string()) {
                p.checkpoint_path = entry["checkpoint_path"].get<std::string>();
            }
            if (entry.contains("error") && entry["error"].is_string()) p.error = entry["error"].get<std::string>();
            points.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("malformed sweep manifest entry: ") + e.what());
    }
    return points;
}

}  // namespace mergelab
