#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mergelab {

// Benchmark name -> accuracy in [0,1].
using BenchmarkScores = std::map<std::string, double>;

struct IfevalStrict {
    double prompt_level_strict = 0.0;
    double instance_level_strict = 0.0;
};

// Unweighted mean accuracy over the suite. Throws ScoreError when empty or
// when a value is outside [0,1].
double medical_avg(const BenchmarkScores& scores);

// Mean of the prompt-level and instance-level strict accuracies.
double ifeval_score(const IfevalStrict& s);

// Lowercased maximal runs of ASCII letters and digits. Every other byte,
// including non-ASCII UTF-8, separates tokens.
std::vector<std::string> tokenize(std::string_view text);

// ROUGE-N F1 over clipped n-gram counts. 0 when either side has no n-grams.
double rouge_n(std::string_view candidate, std::string_view reference, std::size_t n);

// ROUGE-L F1 (beta = 1) from the token-level longest common subsequence.
double rouge_l(std::string_view candidate, std::string_view reference);

// Length of the longest common subsequence of two token sequences.
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Sentence BLEU-4: uniform weights, clipped precisions, (matches+1)/(total+1)
// smoothing for n >= 2, brevity penalty exp(1 - r/c) when c < r.
double bleu(std::string_view candidate, std::string_view reference);

// The six generation metrics; any subset may be known.
struct GenerationMetrics {
    std::optional<double> bleu;
    std::optional<double> meteor;
    std::optional<double> rouge1;
    std::optional<double> rouge2;
    std::optional<double> rougeL;
    std::optional<double> bertscore;

    // Metric names in canonical order.
    static const std::vector<std::string>& names();
    std::optional<double>* get(std::string_view name);
    const std::optional<double>* get(std::string_view name) const;
    std::size_t count() const;
};

struct CompositeScore {
    GenerationMetrics metrics;
    double overall = 0.0;
    // True when fewer than six metrics were averaged.
    bool partial = false;
};

CompositeScore composite_score(double bleu, double meteor, double rouge1, double rouge2, double rougeL,
                               double bertscore);

// Mean of the known metrics. Unless `allow_partial`, all six are required
// and a ScoreError names the missing ones.
CompositeScore composite_score(const GenerationMetrics& metrics, bool allow_partial = false);

// One checkpoint's record in an external score file.
struct ExternalScores {
    std::optional<IfevalStrict> ifeval;
    BenchmarkScores benchmarks;
    GenerationMetrics generation;
};

// Score file: {"<checkpoint>": {"ifeval": {"prompt_strict": x, "instance_strict": y},
//                               "benchmarks": {name: acc, ...},
//                               "generation": {"bleu": ..., ...}}, ...}
// Every section is optional. Throws ScoreError on malformed JSON, duplicate
// checkpoint names, unknown fields or scores outside [0,1].
std::map<std::string, ExternalScores> parse_external_scores(std::string_view json_text);
std::map<std::string, ExternalScores> ingest_external_scores(const std::filesystem::path& path);

// Flat {"meteor": x, "bertscore": y, ...} object of generation metrics.
GenerationMetrics parse_generation_metrics(std::string_view json_text);

}  // namespace mergelab
