#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mergelab/tensor_store.hpp"

namespace mergelab {

enum class MergeMethod { Linear, Slerp };

// Dtype of merged tensors: the first input's dtype, or always F32.
enum class OutputDtype { SameAsFirstInput, F32 };

inline constexpr double kDefaultDegeneracyEps = 1e-6;

std::string_view method_name(MergeMethod m) noexcept;
std::optional<MergeMethod> parse_method(std::string_view text) noexcept;

std::string_view output_dtype_name(OutputDtype d) noexcept;
std::optional<OutputDtype> parse_output_dtype(std::string_view text) noexcept;

// One merge: method, interpolation weight (alpha for Linear, t for SLERP;
// 0 selects the first checkpoint, 1 the second) and numerical policy.
struct MergeRecipe {
    MergeMethod method = MergeMethod::Linear;
    double weight = 0.0;
    // SLERP falls back to Linear when sin(angle) is below this.
    double degeneracy_eps = kDefaultDegeneracyEps;
    OutputDtype output_dtype = OutputDtype::SameAsFirstInput;

    // Throws ArgumentError unless 0 <= weight <= 1 and degeneracy_eps > 0.
    void validate() const;

    friend bool operator==(const MergeRecipe&, const MergeRecipe&) = default;
};

// Weight printed with at most 9 decimals, trailing zeros trimmed but at least
// one decimal kept: 0.4 -> "0.4", 1 -> "1.0".
std::string format_weight(double weight);

// Deterministic identifier of a recipe, e.g. "slerp_0.4". Used for persisted
// checkpoint file names and as the key into external score files.
std::string recipe_name(const MergeRecipe& recipe);

// (1 - alpha) * a + alpha * b, element-wise, evaluated in double and rounded
// once to float. alpha == 0 and alpha == 1 return the inputs bit-for-bit.
std::vector<float> lerp_tensor(std::span<const float> a, std::span<const float> b, double alpha);
void lerp_into(std::span<const float> a, std::span<const float> b, double alpha, std::span<float> out);

// Running dot product and squared norms. Feeding a tensor in consecutive
// chunks gives bit-identical sums to feeding it whole.
struct SlerpAccumulator {
    double dot = 0.0;
    double norm_a2 = 0.0;
    double norm_b2 = 0.0;

    void add(std::span<const float> a, std::span<const float> b);
};

struct SlerpPlan {
    bool fallback = false;
    // Angle between the normalized inputs; NaN when a norm is zero.
    double omega = 0.0;
    double coef_a = 0.0;
    double coef_b = 0.0;
};

// Coefficients sin((1-t)W)/sin W and sin(tW)/sin W for the accumulated
// pair, or a Linear fallback when sin W < eps (colinear, antipodal) or
// either input has zero norm.
SlerpPlan plan_slerp(const SlerpAccumulator& acc, double t, double eps);

// Applies a plan to (a chunk of) the raw, unnormalized inputs.
void apply_slerp(const SlerpPlan& plan, std::span<const float> a, std::span<const float> b, double t,
                 std::span<float> out);

struct SlerpResult {
    std::vector<float> values;
    bool fallback = false;
};

// Throws ArgumentError on length mismatch, empty input, both inputs all
// zero, or t outside [0,1].
SlerpResult slerp_tensor(std::span<const float> a, std::span<const float> b, double t,
                         double eps = kDefaultDegeneracyEps);

struct MergeReport {
    Checkpoint merged;
    // Per tensor, in the first checkpoint's order.
    std::vector<std::string> tensor_names;
    std::vector<bool> fallback;

    std::size_t fallback_count() const noexcept;
};

// Throws MergeError when the tensor name sets differ (the message lists the
// symmetric difference) or when a pair of tensors differs in shape.
void check_mergeable(const std::vector<TensorMeta>& first, const std::vector<TensorMeta>& second);

// Per-tensor merge; SLERP treats each tensor as one flat vector. Arithmetic is
// done in F32/double regardless of the stored dtypes. The merged metadata
// records "merge_method" and "merge_weight".
MergeReport merge_checkpoints(const Checkpoint& first, const Checkpoint& second, const MergeRecipe& recipe);

struct FileMergeSummary {
    std::size_t tensor_count = 0;
    std::vector<std::string> fallback_tensors;
    std::uint64_t bytes_read = 0;
    std::uint64_t bytes_written = 0;
};

inline constexpr std::size_t kDefaultChunkElements = std::size_t{1} << 18;

// Streams two checkpoint files into a merged file, holding at most a few
// chunks of `chunk_elements` values in memory. Produces the same bytes as
// write_checkpoint(merge_checkpoints(...).merged).
FileMergeSummary merge_files(const std::filesystem::path& first, const std::filesystem::path& second,
                             const MergeRecipe& recipe, const std::filesystem::path& out,
                             std::size_t chunk_elements = kDefaultChunkElements);

}  // namespace mergelab
