#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <optional>

#include "mergelab/error.hpp"
#include "mergelab/merge.hpp"
#include "mergelab/metrics.hpp"
#include "mergelab/pareto.hpp"
#include "mergelab/report.hpp"
#include "mergelab/sweep.hpp"
#include "mergelab/synth.hpp"
#include "mergelab/tensor_store.hpp"

namespace mergelab::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
    std::size_t workers = 1;
    bool persist_checkpoints = false;
    double epsilon = kDefaultNearEpsilon;
    fs::path out_dir = ".";
};

struct MergeOptions {
    fs::path first;
    fs::path second;
    std::string method = "linear";
    double weight = 0.5;
    double eps = kDefaultDegeneracyEps;
    std::string output_dtype = "same";
    std::optional<fs::path> output;
};

struct SweepCliOptions {
    fs::path first;
    fs::path second;
    std::optional<fs::path> world;
    std::optional<fs::path> scores;
    std::string method = "linear";
    double start = 0.0;
    double stop = 1.0;
    double step = 0.1;
};

struct ParetoOptions {
    fs::path input;
};

struct ScoreTextOptions {
    fs::path candidates;
    fs::path references;
    std::optional<fs::path> external;
    bool partial = false;
};

struct SynthOptions {
    std::size_t dim = 8;
    std::size_t n_tensors = 4;
    std::uint64_t seed = 42;
    double beta_med = 0.4;
    double beta_ins = 0.9;
    std::optional<double> sigma;
};

std::string f6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = end + 1;
    }
    return lines;
}

int cmd_merge(const GlobalOptions& g, const MergeOptions& o, std::ostream& out) {
    MergeRecipe recipe;
    recipe.method = *parse_method(o.method);
    recipe.weight = o.weight;
    recipe.degeneracy_eps = o.eps;
    recipe.output_dtype = *parse_output_dtype(o.output_dtype);
    recipe.validate();

    const fs::path target = o.output.value_or(g.out_dir / (recipe_name(recipe) + ".safetensors"));
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const auto summary = merge_files(o.first, o.second, recipe, target);

    out << "merged method=" << method_name(recipe.method) << " weight=" << format_weight(recipe.weight)
        << " tensors=" << summary.tensor_count << " fallbacks=" << summary.fallback_tensors.size() << " -> "
        << target.generic_string() << "\n";
    return 0;
}

int cmd_sweep(const GlobalOptions& g, const SweepCliOptions& o, std::ostream& out, std::ostream& err) {
    std::vector<MergeRecipe> recipes;
    const auto add_grid = [&](MergeMethod m) {
        auto grid = generate_grid(SweepGrid{m, o.start, o.stop, o.step});
        recipes.insert(recipes.end(), grid.begin(), grid.end());
    };
    if (o.method == "linear" || o.method == "both") add_grid(MergeMethod::Linear);
    if (o.method == "slerp" || o.method == "both") add_grid(MergeMethod::Slerp);

    const auto first = read_checkpoint(o.first);
    const auto second = read_checkpoint(o.second);

    SweepOptions options;
    options.workers = g.workers;
    options.persist_checkpoints = g.persist_checkpoints;
    options.out_dir = g.out_dir / "checkpoints";

    std::vector<EvalPoint> points;
    if (o.world) {
        const auto world = make_synthetic_world(parse_world_descriptor(read_text_file(*o.world)));
        points = run_sweep(first, second, recipes, SyntheticEvaluator(world), options);
    } else {
        points = run_sweep(first, second, recipes, ScoreFileEvaluator(ingest_external_scores(*o.scores)), options);
    }

    fs::create_directories(g.out_dir);
    const auto manifest = g.out_dir / "sweep_manifest.json";
    const auto csv = g.out_dir / "sweep.csv";
    write_text_file(manifest, sweep_manifest_json(points));
    write_text_file(csv, sweep_csv(points));

    std::size_t failed = 0;
    for (const auto& p : points) {
        if (!p.ok()) {
            ++failed;
            err << "warning: " << recipe_name(p.recipe) << " failed: " << p.error << "\n";
        }
    }
    out << "sweep: " << points.size() << " recipes, " << failed << " failed -> " << manifest.generic_string()
        << ", " << csv.generic_string() << "\n";
    return 0;
}

ParetoResult pareto_of(const GlobalOptions& g, const std::vector<EvalPoint>& points) {
    if (!(g.epsilon >= 0.0)) throw ArgumentError("--epsilon must be non-negative");
    return analyze_pareto(std::span<const EvalPoint>(points), g.epsilon);
}

int cmd_pareto(const GlobalOptions& g, const ParetoOptions& o, std::ostream& out) {
    const auto points = load_eval_points(o.input);
    const auto result = pareto_of(g, points);
    fs::create_directories(g.out_dir);
    const auto report = g.out_dir / "pareto_report.json";
    write_text_file(report, pareto_report_json(points, result));

    for (const auto i : result.frontier) {
        const auto& p = points[i];
        out << "frontier: " << recipe_name(p.recipe) << " instruction=" << f6(p.instruction_score)
            << " medical=" << f6(p.medical_avg) << "\n";
    }
    out << "pareto: " << result.frontier.size() << " frontier, " << result.near_frontier.size()
        << " near-frontier (eps=" << g.epsilon << ") -> " << report.generic_string() << "\n";
    return 0;
}

int cmd_report(const GlobalOptions& g, const ParetoOptions& o, std::ostream& out) {
    const auto points = load_eval_points(o.input);
    const auto result = pareto_of(g, points);
    fs::create_directories(g.out_dir);
    const auto report = g.out_dir / "pareto_report.json";
    write_text_file(report, pareto_report_json(points, result));
    const auto written = emit_tradeoff_svg(points, result, g.out_dir / "tradeoff.svg");
    out << "report: " << report.generic_string();
    for (const auto& p : written) out << ", " << p.generic_string();
    out << "\n";
    return 0;
}

int cmd_score_text(const ScoreTextOptions& o, std::ostream& out, std::ostream& err) {
    const auto cands = split_lines(read_text_file(o.candidates));
    const auto refs = split_lines(read_text_file(o.references));
    if (cands.size() != refs.size()) {
        throw ArgumentError("line count mismatch: " + std::to_string(cands.size()) + " candidate lines vs " +
                            std::to_string(refs.size()) + " reference lines");
    }
    if (cands.empty()) throw ArgumentError("no text pairs to score");

    double sums[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const double v[4] = {rouge_n(cands[i], refs[i], 1), rouge_n(cands[i], refs[i], 2), rouge_l(cands[i], refs[i]),
                             bleu(cands[i], refs[i])};
        for (int k = 0; k < 4; ++k) sums[k] += v[k];
        out << "pair " << (i + 1) << ": rouge1=" << f6(v[0]) << " rouge2=" << f6(v[1]) << " rougeL=" << f6(v[2])
            << " bleu=" << f6(v[3]) << "\n";
    }
    const double n = static_cast<double>(cands.size());
    GenerationMetrics native;
    native.rouge1 = sums[0] / n;
    native.rouge2 = sums[1] / n;
    native.rougeL = sums[2] / n;
    native.bleu = sums[3] / n;
    out << "mean: rouge1=" << f6(*native.rouge1) << " rouge2=" << f6(*native.rouge2) << " rougeL=" << f6(*native.rougeL)
        << " bleu=" << f6(*native.bleu) << "\n";

    if (o.external) {
        auto metrics = parse_generation_metrics(read_text_file(*o.external));
        for (const char* name : {"bleu", "rouge1", "rouge2", "rougeL"}) {
            if (metrics.get(name)->has_value()) {
                err << "warning: external " << name << " ignored; using the native value\n";
            }
            *metrics.get(name) = *native.get(name);
        }
        const auto composite = composite_score(metrics, o.partial);
        out << "composite: overall=" << f6(composite.overall);
        for (const auto& name : GenerationMetrics::names()) {
            const auto& v = *composite.metrics.get(name);
            out << " " << name << "=" << (v ? f6(*v) : std::string("missing"));
        }
        if (composite.partial) out << " (partial: " << composite.metrics.count() << " of 6 metrics)";
        out << "\n";
    }
    return 0;
}

int cmd_synth(const GlobalOptions& g, const SynthOptions& o, std::ostream& out) {
    SyntheticWorldParams params;
    params.dim = o.dim;
    params.n_tensors = o.n_tensors;
    params.seed = o.seed;
    params.beta_med = o.beta_med;
    params.beta_ins = o.beta_ins;
    params.sigma = o.sigma;
    const auto world = make_synthetic_world(params);

    fs::create_directories(g.out_dir);
    const auto first = g.out_dir / "first.safetensors";
    const auto second = g.out_dir / "second.safetensors";
    const auto descriptor = g.out_dir / "world.json";
    write_checkpoint(world.first, first);
    write_checkpoint(world.second, second);
    write_text_file(descriptor, world_descriptor_json(world));
    out << "synth: " << world.first.size() << " tensors x " << params.dim << " -> " << first.generic_string() << ", "
        << second.generic_string() << ", " << descriptor.generic_string() << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Weight-space checkpoint merging, sweeps and Pareto recipe selection", "mergelab"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--workers", g.workers, "Worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_flag("--persist-checkpoints", g.persist_checkpoints, "Keep merged checkpoints of a sweep");
    app.add_option("--epsilon", g.epsilon, "Margin for near-frontier selection")->check(CLI::NonNegativeNumber);
    app.add_option("--out", g.out_dir, "Output directory");

    const auto methods = CLI::IsMember({"linear", "slerp"});

    MergeOptions merge;
    auto* merge_cmd = app.add_subcommand("merge", "Merge two checkpoints");
    merge_cmd->add_option("first", merge.first, "First checkpoint (weight 0)")->required()->check(CLI::ExistingFile);
    merge_cmd->add_option("second", merge.second, "Second checkpoint (weight 1)")->required()->check(CLI::ExistingFile);
    merge_cmd->add_option("--method", merge.method)->check(methods);
    merge_cmd->add_option("--weight", merge.weight, "Interpolation weight in [0,1]")->check(CLI::Range(0.0, 1.0));
    merge_cmd->add_option("--eps", merge.eps, "SLERP degeneracy threshold on sin(angle)")->check(CLI::PositiveNumber);
    merge_cmd->add_option("--output-dtype", merge.output_dtype)->check(CLI::IsMember({"same", "f32"}));
    merge_cmd->add_option("-o,--output", merge.output, "Output file (default <out>/<method>_<weight>.safetensors)");

    SweepCliOptions sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "Merge and evaluate a grid of weights");
    sweep_cmd->add_option("first", sweep.first)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("second", sweep.second)->required()->check(CLI::ExistingFile);
    auto* world_opt = sweep_cmd->add_option("--world", sweep.world, "Synthetic world descriptor")->check(CLI::ExistingFile);
    auto* scores_opt = sweep_cmd->add_option("--scores", sweep.scores, "External score file")->check(CLI::ExistingFile);
    world_opt->excludes(scores_opt);
    sweep_cmd->add_option("--method", sweep.method)->check(CLI::IsMember({"linear", "slerp", "both"}));
    sweep_cmd->add_option("--start", sweep.start)->check(CLI::Range(0.0, 1.0));
    sweep_cmd->add_option("--stop", sweep.stop)->check(CLI::Range(0.0, 1.0));
    sweep_cmd->add_option("--step", sweep.step)->check(CLI::PositiveNumber);

    ParetoOptions pareto;
    auto* pareto_cmd = app.add_subcommand("pareto", "Pareto frontier of a sweep manifest or CSV");
    pareto_cmd->add_option("input", pareto.input)->required()->check(CLI::ExistingFile);

    ParetoOptions report;
    auto* report_cmd = app.add_subcommand("report", "Pareto report plus trade-off and trajectory SVGs");
    report_cmd->add_option("input", report.input)->required()->check(CLI::ExistingFile);

    ScoreTextOptions score;
    auto* score_cmd = app.add_subcommand("score-text", "ROUGE/BLEU of line-aligned text files");
    score_cmd->add_option("candidates", score.candidates)->required()->check(CLI::ExistingFile);
    score_cmd->add_option("references", score.references)->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--external", score.external, "METEOR/BERTScore JSON")->check(CLI::ExistingFile);
    score_cmd->add_flag("--partial", score.partial, "Allow a composite over fewer than six metrics");

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic checkpoint pair and world descriptor");
    synth_cmd->add_option("--dim", synth.dim)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--n-tensors", synth.n_tensors)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth.seed);
    synth_cmd->add_option("--beta-med", synth.beta_med)->check(CLI::Range(0.0, 1.0));
    synth_cmd->add_option("--beta-ins", synth.beta_ins)->check(CLI::Range(0.0, 1.0));
    synth_cmd->add_option("--sigma", synth.sigma, "Score width (default half the checkpoint distance)")
        ->check(CLI::PositiveNumber);

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        if (sweep_cmd->parsed() && !sweep.world && !sweep.scores) {
            throw CLI::ValidationError("sweep", "one of --world or --scores is required");
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (merge_cmd->parsed()) return cmd_merge(g, merge, out);
        if (sweep_cmd->parsed()) return cmd_sweep(g, sweep, out, err);
        if (pareto_cmd->parsed()) return cmd_pareto(g, pareto, out);
        if (report_cmd->parsed()) return cmd_report(g, report, out);
        if (score_cmd->parsed()) return cmd_score_text(score, out, err);
        if (synth_cmd->parsed()) return cmd_synth(g, synth, out);
    } catch (const ArgumentError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace mergelab::cli
