#include "mergelab/synth.hpp"

#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>
#include <random>

#include "mergelab/error.hpp"
#include "mergelab/merge.hpp"

namespace mergelab {

namespace {

float draw(std::mt19937_64& rng) {
    const auto top24 = static_cast<float>(rng() >> 40);
    return 2.0f * (top24 * 0x1p-24f) - 1.0f;
}

std::string tensor_name(std::size_t k, std::size_t count) {
    const auto width = std::to_string(count > 0 ? count - 1 : 0).size();
    auto digits = std::to_string(k);
    digits.insert(0, width - digits.size(), '0');
    return "layers." + digits + ".weight";
}

Tensor f32_tensor(std::string name, const std::vector<float>& values) {
    return Tensor{std::move(name), Dtype::F32, {values.size()}, f32_to_dtype(values, Dtype::F32)};
}

double squared_distance(const Checkpoint& ckpt, const SyntheticWorld& world,
                        const std::vector<std::vector<float>>& optimum) {
    double sum = 0.0;
    const auto& layout = world.first.tensors();
    for (std::size_t k = 0; k < layout.size(); ++k) {
        const auto* t = ckpt.find(layout[k].name);
        if (t == nullptr) throw MergeError("checkpoint lacks tensor '" + layout[k].name + "' of the synthetic world");
        if (t->shape != layout[k].shape) throw MergeError("tensor '" + t->name + "' does not match the world's shape");
        const auto values = tensor_as_f32(*t);
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double d = static_cast<double>(values[i]) - optimum[k][i];
            sum += d * d;
        }
    }
    if (ckpt.size() != layout.size()) throw MergeError("checkpoint has tensors the synthetic world does not");
    return sum;
}

}  // namespace

SyntheticWorld make_synthetic_world(const SyntheticWorldParams& params) {
    if (params.dim == 0 || params.n_tensors == 0) throw ArgumentError("dim and n_tensors must be positive");
    if (!(params.beta_med >= 0.0 && params.beta_med <= 1.0) || !(params.beta_ins >= 0.0 && params.beta_ins <= 1.0)) {
        throw ArgumentError("task betas must lie in [0, 1]");
    }
    if (params.sigma && !(*params.sigma > 0.0 && std::isfinite(*params.sigma))) {
        throw ArgumentError("sigma must be positive");
    }

    SyntheticWorld world;
    std::mt19937_64 rng(params.seed);
    std::vector<std::vector<float>> first(params.n_tensors, std::vector<float>(params.dim));
    std::vector<std::vector<float>> second = first;
    for (auto& t : first) {
        for (auto& v : t) v = draw(rng);
    }
    for (auto& t : second) {
        for (auto& v : t) v = draw(rng);
    }

    double dist2 = 0.0;
    for (std::size_t k = 0; k < params.n_tensors; ++k) {
        const auto name = tensor_name(k, params.n_tensors);
        world.first.add(f32_tensor(name, first[k]));
        world.second.add(f32_tensor(name, second[k]));
        for (std::size_t i = 0; i < params.dim; ++i) {
            const double d = static_cast<double>(second[k][i]) - first[k][i];
            dist2 += d * d;
        }
        world.medical_optimum.push_back(lerp_tensor(first[k], second[k], params.beta_med));
        world.instruction_optimum.push_back(lerp_tensor(first[k], second[k], params.beta_ins));
    }
    world.distance = std::sqrt(dist2);
    if (!(world.distance > 0.0)) throw ArgumentError("synthetic checkpoints coincide");

    world.params = params;
    world.params.sigma = params.sigma.value_or(0.5 * world.distance);
    world.medical = SyntheticTaskSpec{params.beta_med, *world.params.sigma, "medical"};
    world.instruction = SyntheticTaskSpec{params.beta_ins, *world.params.sigma, "instruction"};
    return world;
}

EvaluatorResult synthetic_eval(const Checkpoint& ckpt, const SyntheticWorld& world) {
    const auto score = [&](const SyntheticTaskSpec& task, const std::vector<std::vector<float>>& optimum) {
        return std::exp(-squared_distance(ckpt, world, optimum) / (2.0 * task.sigma * task.sigma));
    };
    EvaluatorResult r;
    r.instruction_score = score(world.instruction, world.instruction_optimum);
    r.per_benchmark[world.medical.label] = score(world.medical, world.medical_optimum);
    return r;
}

std::string world_descriptor_json(const SyntheticWorld& world) {
    nlohmann::ordered_json doc;
    doc["dim"] = world.params.dim;
    doc["n_tensors"] = world.params.n_tensors;
    doc["seed"] = world.params.seed;
    doc["beta_med"] = world.params.beta_med;
    doc["beta_ins"] = world.params.beta_ins;
    doc["sigma"] = world.params.sigma.value_or(0.5 * world.distance);
    return doc.dump(2) + "\n";
}

SyntheticWorldParams parse_world_descriptor(std::string_view json_text) {
    try {
        const auto doc = nlohmann::json::parse(json_text.begin(), json_text.end());
        SyntheticWorldParams p;
        p.dim = doc.at("dim").get<std::size_t>();
        p.n_tensors = doc.at("n_tensors").get<std::size_t>();
        p.seed = doc.at("seed").get<std::uint64_t>();
        p.beta_med = doc.at("beta_med").get<double>();
        p.beta_ins = doc.at("beta_ins").get<double>();
        if (doc.contains("sigma") && !doc["sigma"].is_null()) p.sigma = doc["sigma"].get<double>();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("malformed world descriptor: ") + e.what());
    }
}

}  // namespace mergelab
