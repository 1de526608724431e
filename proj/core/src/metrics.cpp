#include "mergelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mergelab/error.hpp"

namespace mergelab {

namespace {

using nlohmann::json;

void require_unit_range(double v, const std::string& what) {
    if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream os;
        os << what << " = " << v << " is outside [0, 1]";
        throw ScoreError(os.str());
    }
}

std::unordered_map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
    std::unordered_map<std::string, std::size_t> counts;
    if (n == 0 || tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (std::size_t k = 1; k < n; ++k) {
            key += '\x1f';
            key += tokens[i + k];
        }
        ++counts[key];
    }
    return counts;
}

std::size_t clipped_matches(const std::unordered_map<std::string, std::size_t>& cand,
                            const std::unordered_map<std::string, std::size_t>& ref) {
    std::size_t m = 0;
    for (const auto& [gram, count] : cand) {
        const auto it = ref.find(gram);
        if (it != ref.end()) m += std::min(count, it->second);
    }
    return m;
}

double f1(double matches, double cand_total, double ref_total) {
    if (cand_total == 0.0 || ref_total == 0.0 || matches == 0.0) return 0.0;
    const double p = matches / cand_total;
    const double r = matches / ref_total;
    return 2.0 * p * r / (p + r);
}

// Parses with a check for repeated keys directly under the root object.
json parse_unique_root(std::string_view text, const char* what) {
    std::set<std::string> seen;
    std::string duplicate;
    const json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json& parsed) {
        if (event == json::parse_event_t::key && depth == 1) {
            auto key = parsed.get<std::string>();
            if (!seen.insert(key).second && duplicate.empty()) duplicate = std::move(key);
        }
        return true;
    };
    json doc;
    try {
        doc = json::parse(text.begin(), text.end(), cb);
    } catch (const json::exception& e) {
        throw ScoreError(std::string("malformed ") + what + ": " + e.what());
    }
    if (!duplicate.empty()) throw ScoreError(std::string("duplicate checkpoint name '") + duplicate + "' in " + what);
    if (!doc.is_object()) throw ScoreError(std::string(what) + " must be a JSON object");
    return doc;
}

double score_value(const json& v, const std::string& what) {
    if (!v.is_number()) throw ScoreError(what + " is not a number");
    const double x = v.get<double>();
    require_unit_range(x, what);
    return x;
}

GenerationMetrics generation_from(const json& obj, const std::string& where) {
    if (!obj.is_object()) throw ScoreError(where + " must be an object");
    GenerationMetrics g;
    for (const auto& [key, value] : obj.items()) {
        auto* slot = g.get(key);
        if (slot == nullptr) throw ScoreError(where + " has unknown metric '" + key + "'");
        *slot = score_value(value, where + "." + key);
    }
    return g;
}

}  // namespace

double medical_avg(const BenchmarkScores& scores) {
    if (scores.empty()) throw ScoreError("medical_avg of an empty benchmark suite");
    // Sum of deviations from the first value, so k equal inputs return that
    // value exactly.
    const double base = scores.begin()->second;
    double sum = 0.0;
    double carry = 0.0;
    for (const auto& [name, v] : scores) {
        require_unit_range(v, "benchmark '" + name + "'");
        const double d = v - base;
        const double t = sum + d;
        carry += std::fabs(sum) >= std::fabs(d) ? (sum - t) + d : (d - t) + sum;
        sum = t;
    }
    return base + (sum + carry) / static_cast<double>(scores.size());
}

double ifeval_score(const IfevalStrict& s) {
    return (s.prompt_level_strict + s.instance_level_strict) / 2.0;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        const bool digit = c >= '0' && c <= '9';
        const bool upper = c >= 'A' && c <= 'Z';
        const bool lower = c >= 'a' && c <= 'z';
        if (digit || upper || lower) {
            current += upper ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

double rouge_n(std::string_view candidate, std::string_view reference, std::size_t n) {
    if (n == 0) throw ArgumentError("rouge_n: n must be at least 1");
    const auto cand = ngram_counts(tokenize(candidate), n);
    const auto ref = ngram_counts(tokenize(reference), n);
    std::size_t cand_total = 0;
    std::size_t ref_total = 0;
    for (const auto& [_, c] : cand) cand_total += c;
    for (const auto& [_, c] : ref) ref_total += c;
    return f1(static_cast<double>(clipped_matches(cand, ref)), static_cast<double>(cand_total),
              static_cast<double>(ref_total));
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> row(b.size() + 1, 0);
    for (const auto& x : a) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            row[j + 1] = x == b[j] ? prev[j] + 1 : std::max(prev[j + 1], row[j]);
        }
        std::swap(prev, row);
    }
    return prev[b.size()];
}

double rouge_l(std::string_view candidate, std::string_view reference) {
    const auto cand = tokenize(candidate);
    const auto ref = tokenize(reference);
    return f1(static_cast<double>(lcs_length(cand, ref)), static_cast<double>(cand.size()),
              static_cast<double>(ref.size()));
}

double bleu(std::string_view candidate, std::string_view reference) {
    const auto cand = tokenize(candidate);
    const auto ref = tokenize(reference);
    if (cand.empty()) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto cn = ngram_counts(cand, n);
        const auto rn = ngram_counts(ref, n);
        double total = 0.0;
        for (const auto& [_, c] : cn) total += static_cast<double>(c);
        double matches = static_cast<double>(clipped_matches(cn, rn));
        if (n >= 2) {
            matches += 1.0;
            total += 1.0;
        }
        if (matches == 0.0) return 0.0;
        log_sum += std::log(matches / total);
    }
    const double c = static_cast<double>(cand.size());
    const double r = static_cast<double>(ref.size());
    const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return bp * std::exp(log_sum / 4.0);
}

// ---------------------------------------------------------------- composite

const std::vector<std::string>& GenerationMetrics::names() {
    static const std::vector<std::string> kNames{"bleu", "meteor", "rouge1", "rouge2", "rougeL", "bertscore"};
    return kNames;
}

std::optional<double>* GenerationMetrics::get(std::string_view name) {
    if (name == "bleu") return &bleu;
    if (name == "meteor") return &meteor;
    if (name == "rouge1") return &rouge1;
    if (name == "rouge2") return &rouge2;
    if (name == "rougeL") return &rougeL;
    if (name == "bertscore") return &bertscore;
    return nullptr;
}

const std::optional<double>* GenerationMetrics::get(std::string_view name) const {
    return const_cast<GenerationMetrics*>(this)->get(name);
}

std::size_t GenerationMetrics::count() const {
    std::size_t n = 0;
    for (const auto& name : names()) n += get(name)->has_value() ? 1 : 0;
    return n;
}

CompositeScore composite_score(double bleu, double meteor, double rouge1, double rouge2, double rougeL,
                               double bertscore) {
    return composite_score(GenerationMetrics{bleu, meteor, rouge1, rouge2, rougeL, bertscore}, false);
}

CompositeScore composite_score(const GenerationMetrics& metrics, bool allow_partial) {
    std::vector<double> values;
    std::string missing;
    for (const auto& name : GenerationMetrics::names()) {
        const auto& v = *metrics.get(name);
        if (v) {
            require_unit_range(*v, name);
            values.push_back(*v);
        } else {
            missing += (missing.empty() ? "" : ", ") + name;
        }
    }
    if (!missing.empty() && !allow_partial) throw ScoreError("composite score is missing: " + missing);
    if (values.empty()) throw ScoreError("composite score needs at least one metric");

    // Sorted before summing, so the mean does not depend on label order.
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (const double v : values) sum += v;
    return CompositeScore{metrics, sum / static_cast<double>(values.size()), values.size() < 6};
}

// ---------------------------------------------------------------- score files

std::map<std::string, ExternalScores> parse_external_scores(std::string_view json_text) {
    const json doc = parse_unique_root(json_text, "score file");
    std::map<std::string, ExternalScores> out;
    for (const auto& [ckpt, record] : doc.items()) {
        const std::string where = "checkpoint '" + ckpt + "'";
        if (!record.is_object()) throw ScoreError(where + " record must be an object");
        ExternalScores scores;
        for (const auto& [section, body] : record.items()) {
            if (section == "ifeval") {
                if (!body.is_object() || !body.contains("prompt_strict") || !body.contains("instance_strict")) {
                    throw ScoreError(where + ": ifeval needs prompt_strict and instance_strict");
                }
                for (const auto& [k, _] : body.items()) {
                    if (k != "prompt_strict" && k != "instance_strict") {
                        throw ScoreError(where + ": unknown ifeval field '" + k + "'");
                    }
                }
                scores.ifeval = IfevalStrict{score_value(body["prompt_strict"], where + ": ifeval.prompt_strict"),
                                             score_value(body["instance_strict"], where + ": ifeval.instance_strict")};
            } else if (section == "benchmarks") {
                if (!body.is_object()) throw ScoreError(where + ": benchmarks must be an object");
                for (const auto& [name, v] : body.items()) {
                    scores.benchmarks[name] = score_value(v, where + ": benchmarks." + name);
                }
            } else if (section == "generation") {
                scores.generation = generation_from(body, where + ": generation");
            } else {
                throw ScoreError(where + ": unknown section '" + section + "'");
            }
        }
        out.emplace(ckpt, std::move(scores));
    }
    return out;
}

std::map<std::string, ExternalScores> ingest_external_scores(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open score file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_external_scores(buf.str());
}

GenerationMetrics parse_generation_metrics(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text.begin(), json_text.end());
    } catch (const json::exception& e) {
        throw ScoreError(std::string("malformed generation metric file: ") + e.what());
    }
    return generation_from(doc, "generation metrics");
}

}  // namespace mergelab
