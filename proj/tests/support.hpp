#pragma once

// Test-only helpers: temp dirs, seeded generators and independent oracles.
// Nothing here calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mergelab/pareto.hpp"
#include "mergelab/tensor_store.hpp"

namespace mergelab::test {

class TempDir {
public:
    TempDir() {
        static std::uint64_t counter = 0;
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("mergelab-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<float> random_floats(std::mt19937_64& rng, std::size_t n, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<float> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

inline std::vector<std::uint8_t> random_bytes(std::mt19937_64& rng, std::size_t n) {
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = static_cast<std::uint8_t>(rng() & 0xFFu);
    return v;
}

inline Tensor f32_tensor(std::string name, const std::vector<float>& values) {
    return Tensor{std::move(name), Dtype::F32, {values.size()}, f32_to_dtype(values, Dtype::F32)};
}

// Random checkpoint with 1..max_tensors tensors of mixed dtype and rank,
// random raw payload bytes and a little metadata.
inline Checkpoint random_checkpoint(std::mt19937_64& rng, std::size_t max_tensors = 16) {
    Checkpoint c;
    const std::size_t n = 1 + rng() % max_tensors;
    for (std::size_t k = 0; k < n; ++k) {
        const Dtype dtypes[] = {Dtype::F32, Dtype::F16, Dtype::BF16};
        const Dtype d = dtypes[rng() % 3];
        std::vector<std::uint64_t> shape;
        const std::size_t rank = rng() % 4;
        for (std::size_t r = 0; r < rank; ++r) shape.push_back(rng() % 6);
        const auto bytes = random_bytes(rng, element_count(shape) * dtype_size(d));
        c.add(Tensor{"t" + std::to_string(rng() % 1000) + "." + std::to_string(k), d, shape, bytes});
    }
    if (rng() % 2) c.metadata["format"] = "pt";
    if (rng() % 2) c.metadata["note"] = "seed-" + std::to_string(rng() % 100);
    return c;
}

// Same-layout pair of F32 checkpoints for merge tests.
inline std::pair<Checkpoint, Checkpoint> random_pair(std::mt19937_64& rng, std::size_t max_dim = 64) {
    Checkpoint a;
    Checkpoint b;
    const std::size_t n = 1 + rng() % 4;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t dim = 1 + rng() % max_dim;
        const auto name = "w" + std::to_string(k);
        a.add(f32_tensor(name, random_floats(rng, dim)));
        b.add(f32_tensor(name, random_floats(rng, dim)));
    }
    return {std::move(a), std::move(b)};
}

// O(n^2) dominance check straight from the definition.
inline std::vector<std::size_t> brute_force_frontier(const std::vector<Objectives>& pts) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
            const bool ge = pts[j].instruction >= pts[i].instruction && pts[j].medical >= pts[i].medical;
            const bool gt = pts[j].instruction > pts[i].instruction || pts[j].medical > pts[i].medical;
            dominated = ge && gt;
        }
        if (!dominated) out.push_back(i);
    }
    return out;
}

inline std::vector<std::size_t> brute_force_near(const std::vector<Objectives>& pts, double eps) {
    const auto frontier = brute_force_frontier(pts);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool covered = std::find(frontier.begin(), frontier.end(), i) != frontier.end();
        if (!covered) {
            covered = true;
            for (std::size_t j = 0; j < pts.size(); ++j) {
                if (j != i && pts[j].instruction >= pts[i].instruction + eps &&
                    pts[j].medical >= pts[i].medical + eps) {
                    covered = false;
                    break;
                }
            }
        }
        if (covered) out.push_back(i);
    }
    return out;
}

inline std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

inline std::vector<Objectives> random_objectives(std::mt19937_64& rng, std::size_t n, bool coarse = false) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Objectives> pts(n);
    for (auto& p : pts) {
        p = {u(rng), u(rng)};
        if (coarse) p = {std::round(p.instruction * 20) / 20, std::round(p.medical * 20) / 20};
    }
    return pts;
}

// Angle between two float vectors, computed in double via atan2 so small
// angles keep full precision.
inline double angle_between(const std::vector<float>& a, const std::vector<float>& b) {
    double aa = 0, bb = 0, ab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa += double(a[i]) * a[i];
        bb += double(b[i]) * b[i];
        ab += double(a[i]) * b[i];
    }
    // |a x b|^2 generalizes to |a|^2 |b|^2 - (a.b)^2; use the rejection for accuracy
    double rej = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = double(b[i]) - ab / aa * a[i];
        rej += r * r;
    }
    return std::atan2(std::sqrt(rej) * std::sqrt(aa), ab);
}

inline double l2_norm(const std::vector<float>& v) {
    double s = 0;
    for (const float x : v) s += double(x) * x;
    return std::sqrt(s);
}

inline std::vector<float> random_unit(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(n);
    double s = 0;
    for (auto& x : v) {
        x = g(rng);
        s += x * x;
    }
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(v[i] / std::sqrt(s));
    return out;
}

// Minimal XML well-formedness check: balanced, properly nested tags, quoted
// attributes, one root element. Enough for the SVG this project emits.
inline bool xml_well_formed(std::string_view xml, std::string* why = nullptr) {
    auto fail = [&](std::string msg) {
        if (why) *why = std::move(msg);
        return false;
    };
    std::vector<std::string> stack;
    int roots = 0;
    std::size_t i = 0;
    while (i < xml.size()) {
        if (xml[i] != '<') {
            if (stack.empty() && !std::isspace(static_cast<unsigned char>(xml[i]))) return fail("text outside root");
            if (xml[i] == '&') {
                const auto semi = xml.find(';', i);
                if (semi == std::string_view::npos) return fail("bad entity");
                const auto ent = xml.substr(i, semi - i + 1);
                if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;" && ent != "&apos;") {
                    return fail("unknown entity");
                }
            }
            ++i;
            continue;
        }
        const auto close = xml.find('>', i);
        if (close == std::string_view::npos) return fail("unterminated tag");
        auto tag = xml.substr(i + 1, close - i - 1);
        i = close + 1;
        if (tag.starts_with("?")) continue;
        if (tag.starts_with("!--")) continue;
        if (tag.starts_with("/")) {
            const std::string name(tag.substr(1));
            if (stack.empty() || stack.back() != name) return fail("mismatched </" + name + ">");
            stack.pop_back();
            continue;
        }
        const bool self_closing = tag.ends_with("/");
        if (self_closing) tag.remove_suffix(1);
        const auto name_end = tag.find_first_of(" \t\n");
        const std::string name(tag.substr(0, name_end));
        if (name.empty()) return fail("empty tag name");
        // attributes: name="value" pairs
        std::size_t p = name_end == std::string_view::npos ? tag.size() : name_end;
        while (p < tag.size()) {
            while (p < tag.size() && std::isspace(static_cast<unsigned char>(tag[p]))) ++p;
            if (p >= tag.size()) break;
            const auto eq = tag.find('=', p);
            if (eq == std::string_view::npos || eq + 1 >= tag.size() || tag[eq + 1] != '"') return fail("bad attribute");
            const auto endq = tag.find('"', eq + 2);
            if (endq == std::string_view::npos) return fail("unterminated attribute");
            if (tag.substr(eq + 2, endq - eq - 2).find('<') != std::string_view::npos) return fail("'<' in attribute");
            p = endq + 1;
        }
        if (stack.empty()) ++roots;
        if (!self_closing) stack.push_back(name);
    }
    if (!stack.empty()) return fail("unclosed <" + stack.back() + ">");
    if (roots != 1) return fail("expected one root element");
    return true;
}

inline std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) ++n;
    return n;
}

}  // namespace mergelab::test
