#include "mergelab/merge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "mergelab/error.hpp"

namespace mergelab {

namespace {

std::map<std::string, std::string> merge_metadata(const MergeRecipe& recipe) {
    return {{"merge_method", std::string(method_name(recipe.method))},
            {"merge_weight", format_weight(recipe.weight)}};
}

Dtype output_dtype_for(const MergeRecipe& recipe, Dtype first) {
    return recipe.output_dtype == OutputDtype::F32 ? Dtype::F32 : first;
}

std::vector<TensorMeta> metas_of(const Checkpoint& ckpt) {
    std::vector<TensorMeta> out;
    out.reserve(ckpt.size());
    for (const auto& t : ckpt.tensors()) out.push_back(TensorMeta{t.name, t.dtype, t.shape, 0, t.bytes.size()});
    return out;
}

void require_same_length(std::span<const float> a, std::span<const float> b, const char* op) {
    if (a.size() != b.size()) {
        throw ArgumentError(std::string(op) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
    }
}

}  // namespace

std::string_view method_name(MergeMethod m) noexcept {
    return m == MergeMethod::Linear ? "linear" : "slerp";
}

std::optional<MergeMethod> parse_method(std::string_view text) noexcept {
    if (text == "linear") return MergeMethod::Linear;
    if (text == "slerp") return MergeMethod::Slerp;
    return std::nullopt;
}

std::string_view output_dtype_name(OutputDtype d) noexcept {
    return d == OutputDtype::F32 ? "f32" : "same";
}

std::optional<OutputDtype> parse_output_dtype(std::string_view text) noexcept {
    if (text == "same") return OutputDtype::SameAsFirstInput;
    if (text == "f32") return OutputDtype::F32;
    return std::nullopt;
}

void MergeRecipe::validate() const {
    if (!(weight >= 0.0 && weight <= 1.0)) {
        throw ArgumentError("merge weight " + std::to_string(weight) + " is outside [0, 1]");
    }
    if (!(degeneracy_eps > 0.0)) throw ArgumentError("degeneracy_eps must be positive");
}

std::string format_weight(double weight) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", weight);
    std::string s = buf;
    while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
    return s;
}

std::string recipe_name(const MergeRecipe& recipe) {
    return std::string(method_name(recipe.method)) + "_" + format_weight(recipe.weight);
}

// ---------------------------------------------------------------- kernels

void lerp_into(std::span<const float> a, std::span<const float> b, double alpha, std::span<float> out) {
    require_same_length(a, b, "lerp");
    if (out.size() != a.size()) throw ArgumentError("lerp: output length mismatch");
    if (alpha == 0.0) {
        std::copy(a.begin(), a.end(), out.begin());
        return;
    }
    if (alpha == 1.0) {
        std::copy(b.begin(), b.end(), out.begin());
        return;
    }
    const double keep = 1.0 - alpha;
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = static_cast<float>(keep * a[i] + alpha * b[i]);
    }
}

std::vector<float> lerp_tensor(std::span<const float> a, std::span<const float> b, double alpha) {
    require_same_length(a, b, "lerp");
    std::vector<float> out(a.size());
    lerp_into(a, b, alpha, out);
    return out;
}

void SlerpAccumulator::add(std::span<const float> a, std::span<const float> b) {
    require_same_length(a, b, "slerp");
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        const double y = b[i];
        dot += x * y;
        norm_a2 += x * x;
        norm_b2 += y * y;
    }
}

SlerpPlan plan_slerp(const SlerpAccumulator& acc, double t, double eps) {
    SlerpPlan plan;
    if (acc.norm_a2 == 0.0 || acc.norm_b2 == 0.0) {
        plan.fallback = true;
        plan.omega = std::nan("");
        return plan;
    }
    const double cos_omega = std::clamp(acc.dot / (std::sqrt(acc.norm_a2) * std::sqrt(acc.norm_b2)), -1.0, 1.0);
    plan.omega = std::acos(cos_omega);
    const double sin_omega = std::sin(plan.omega);
    if (sin_omega < eps) {
        plan.fallback = true;
        return plan;
    }
    plan.coef_a = std::sin((1.0 - t) * plan.omega) / sin_omega;
    plan.coef_b = std::sin(t * plan.omega) / sin_omega;
    return plan;
}

void apply_slerp(const SlerpPlan& plan, std::span<const float> a, std::span<const float> b, double t,
                 std::span<float> out) {
    if (plan.fallback) {
        lerp_into(a, b, t, out);
        return;
    }
    require_same_length(a, b, "slerp");
    if (out.size() != a.size()) throw ArgumentError("slerp: output length mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = static_cast<float>(plan.coef_a * a[i] + plan.coef_b * b[i]);
    }
}

SlerpResult slerp_tensor(std::span<const float> a, std::span<const float> b, double t, double eps) {
    require_same_length(a, b, "slerp");
    if (a.empty()) throw ArgumentError("slerp: inputs are empty");
    if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("slerp: t is outside [0, 1]");
    if (!(eps > 0.0)) throw ArgumentError("slerp: eps must be positive");
    SlerpAccumulator acc;
    acc.add(a, b);
    if (acc.norm_a2 == 0.0 && acc.norm_b2 == 0.0) throw ArgumentError("slerp: both inputs are all zero");
    const auto plan = plan_slerp(acc, t, eps);
    SlerpResult result{std::vector<float>(a.size()), plan.fallback};
    apply_slerp(plan, a, b, t, result.values);
    return result;
}

// ---------------------------------------------------------------- checkpoints

std::size_t MergeReport::fallback_count() const noexcept {
    return static_cast<std::size_t>(std::count(fallback.begin(), fallback.end(), true));
}

void check_mergeable(const std::vector<TensorMeta>& first, const std::vector<TensorMeta>& second) {
    std::map<std::string, const TensorMeta*> rhs;
    for (const auto& m : second) rhs.emplace(m.name, &m);
    std::set<std::string> lhs;
    for (const auto& m : first) lhs.insert(m.name);

    std::vector<std::string> only_first;
    std::vector<std::string> only_second;
    for (const auto& name : lhs) {
        if (!rhs.contains(name)) only_first.push_back(name);
    }
    for (const auto& [name, _] : rhs) {
        if (!lhs.contains(name)) only_second.push_back(name);
    }
    if (!only_first.empty() || !only_second.empty()) {
        auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
            return s.empty() ? std::string("(none)") : s;
        };
        throw MergeError("tensor name sets differ; only in first: " + join(only_first) +
                         "; only in second: " + join(only_second));
    }
    for (const auto& m : first) {
        const auto& other = *rhs.at(m.name);
        if (m.shape != other.shape) {
            auto dims = [](const std::vector<std::uint64_t>& s) {
                std::string out = "[";
                for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
                return out + "]";
            };
            throw MergeError("tensor '" + m.name + "' has shape " + dims(m.shape) + " in the first checkpoint but " +
                             dims(other.shape) + " in the second");
        }
    }
}

MergeReport merge_checkpoints(const Checkpoint& first, const Checkpoint& second, const MergeRecipe& recipe) {
    recipe.validate();
    check_mergeable(metas_of(first), metas_of(second));

    MergeReport report;
    report.merged.metadata = merge_metadata(recipe);
    for (const auto& ta : first.tensors()) {
        const auto& tb = second.at(ta.name);
        const auto a = tensor_as_f32(ta);
        const auto b = tensor_as_f32(tb);
        std::vector<float> out(a.size());

        bool fallback = false;
        if (recipe.method == MergeMethod::Linear) {
            lerp_into(a, b, recipe.weight, out);
        } else {
            SlerpAccumulator acc;
            acc.add(a, b);
            const auto plan = plan_slerp(acc, recipe.weight, recipe.degeneracy_eps);
            apply_slerp(plan, a, b, recipe.weight, out);
            fallback = plan.fallback;
        }

        const Dtype dtype = output_dtype_for(recipe, ta.dtype);
        report.merged.add(Tensor{ta.name, dtype, ta.shape, f32_to_dtype(out, dtype)});
        report.tensor_names.push_back(ta.name);
        report.fallback.push_back(fallback);
    }
    return report;
}

FileMergeSummary merge_files(const std::filesystem::path& first, const std::filesystem::path& second,
                             const MergeRecipe& recipe, const std::filesystem::path& out,
                             std::size_t chunk_elements) {
    recipe.validate();
    if (chunk_elements == 0) throw ArgumentError("chunk_elements must be positive");

    std::error_code ec;
    if (std::filesystem::equivalent(out, first, ec) || std::filesystem::equivalent(out, second, ec)) {
        throw ArgumentError("output path " + out.string() + " would overwrite an input");
    }

    const CheckpointReader ra(first);
    const CheckpointReader rb(second);
    check_mergeable(ra.entries(), rb.entries());

    std::vector<CheckpointWriter::Layout> layout;
    for (const auto& m : ra.entries()) layout.push_back({m.name, output_dtype_for(recipe, m.dtype), m.shape});
    CheckpointWriter writer(out, std::move(layout), merge_metadata(recipe));

    FileMergeSummary summary;
    std::vector<std::uint8_t> raw_a;
    std::vector<std::uint8_t> raw_b;
    std::vector<std::uint8_t> raw_out;
    std::vector<float> va;
    std::vector<float> vb;
    std::vector<float> vo;

    // Decodes elements [begin, begin + count) of both tensors into va/vb.
    auto load_chunk = [&](const TensorMeta& ma, const TensorMeta& mb, std::uint64_t begin, std::size_t count) {
        raw_a.resize(count * dtype_size(ma.dtype));
        raw_b.resize(count * dtype_size(mb.dtype));
        ra.read_range(ma, begin * dtype_size(ma.dtype), raw_a);
        rb.read_range(mb, begin * dtype_size(mb.dtype), raw_b);
        summary.bytes_read += raw_a.size() + raw_b.size();
        va.resize(count);
        vb.resize(count);
        decode_to_f32(ma.dtype, raw_a, va);
        decode_to_f32(mb.dtype, raw_b, vb);
    };

    for (const auto& mo : writer.entries()) {
        const auto& ma = ra.meta(mo.name);
        const auto& mb = rb.meta(mo.name);
        const std::uint64_t n = ma.numel();

        // Linear is the fallback path of apply_slerp.
        SlerpPlan plan;
        plan.fallback = true;
        if (recipe.method == MergeMethod::Slerp) {
            SlerpAccumulator acc;
            for (std::uint64_t begin = 0; begin < n; begin += chunk_elements) {
                const auto count = static_cast<std::size_t>(std::min<std::uint64_t>(chunk_elements, n - begin));
                load_chunk(ma, mb, begin, count);
                acc.add(va, vb);
            }
            plan = plan_slerp(acc, recipe.weight, recipe.degeneracy_eps);
            if (plan.fallback) summary.fallback_tensors.push_back(mo.name);
        }

        for (std::uint64_t begin = 0; begin < n; begin += chunk_elements) {
            const auto count = static_cast<std::size_t>(std::min<std::uint64_t>(chunk_elements, n - begin));
            load_chunk(ma, mb, begin, count);
            vo.resize(count);
            apply_slerp(plan, va, vb, recipe.weight, vo);
            raw_out.resize(count * dtype_size(mo.dtype));
            encode_from_f32(mo.dtype, vo, raw_out);
            writer.append(raw_out);
            summary.bytes_written += raw_out.size();
        }
        ++summary.tensor_count;
    }
    writer.finish();
    return summary;
}

}  // namespace mergelab
