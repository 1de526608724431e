#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mergelab/sweep.hpp"
#include "mergelab/tensor_store.hpp"

namespace mergelab {

// A task whose optimum sits at fraction `beta` along the segment from the
// first to the second checkpoint; its score decays as a Gaussian of width
// `sigma` in distance from that optimum.
struct SyntheticTaskSpec {
    double beta = 0.0;
    double sigma = 1.0;
    std::string label;
};

struct SyntheticWorldParams {
    std::size_t dim = 8;
    std::size_t n_tensors = 4;
    std::uint64_t seed = 42;
    double beta_med = 0.4;
    double beta_ins = 0.9;
    // Absolute score width; defaults to half the distance between the two
    // checkpoints.
    std::optional<double> sigma;
};

// Two seeded F32 checkpoints and two analytic tasks.
//
// Values come from std::mt19937_64 seeded with `seed`; each draw x maps to
// the float 2 * ((x >> 40) * 2^-24) - 1 in [-1, 1). The first checkpoint's
// tensors are drawn in order, then the second's. Tensors are named
// "layers.<k>.weight" with k zero-padded to a fixed width and hold `dim`
// elements each.
struct SyntheticWorld {
    SyntheticWorldParams params;  // sigma always resolved
    Checkpoint first;
    Checkpoint second;
    SyntheticTaskSpec medical;
    SyntheticTaskSpec instruction;
    // Task optima (1 - beta) * first + beta * second, one entry per tensor of
    // `first`, computed with lerp_tensor.
    std::vector<std::vector<float>> medical_optimum;
    std::vector<std::vector<float>> instruction_optimum;
    // Euclidean distance between the two checkpoints.
    double distance = 0.0;
};

SyntheticWorld make_synthetic_world(const SyntheticWorldParams& params);

// exp(-D^2 / (2 sigma^2)) per task, where D is the distance from the task
// optimum. The medical task fills a one-entry benchmark map keyed by its
// label. Throws MergeError when `ckpt` does not match the world's layout.
EvaluatorResult synthetic_eval(const Checkpoint& ckpt, const SyntheticWorld& world);

class SyntheticEvaluator final : public Evaluator {
public:
    explicit SyntheticEvaluator(const SyntheticWorld& world) : world_(world) {}

    EvaluatorResult evaluate(const Checkpoint& ckpt, const std::string&) const override {
        return synthetic_eval(ckpt, world_);
    }

private:
    const SyntheticWorld& world_;
};

// {"dim", "n_tensors", "seed", "beta_med", "beta_ins", "sigma"}
std::string world_descriptor_json(const SyntheticWorld& world);
SyntheticWorldParams parse_world_descriptor(std::string_view json_text);

}  // namespace mergelab
