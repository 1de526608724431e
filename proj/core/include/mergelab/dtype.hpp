#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace mergelab {

enum class Dtype : std::uint8_t { F32, F16, BF16 };

constexpr std::size_t dtype_size(Dtype d) noexcept {
    switch (d) {
    case Dtype::F32:
        return 4;
    case Dtype::F16:
    case Dtype::BF16:
        return 2;
    }
    return 0;
}

// Container tag ("F32", "F16", "BF16").
std::string_view dtype_name(Dtype d) noexcept;
std::optional<Dtype> parse_dtype(std::string_view tag) noexcept;

// Scalar bit conversions. Encoders round to nearest, ties to even; values
// beyond the format's range become +-infinity, NaN stays NaN.
float f16_bits_to_f32(std::uint16_t bits) noexcept;
float bf16_bits_to_f32(std::uint16_t bits) noexcept;
std::uint16_t f32_to_f16_bits(float value) noexcept;
std::uint16_t f32_to_bf16_bits(float value) noexcept;

// Decode little-endian elements of `dtype` into `out`. `bytes.size()` must be
// exactly `out.size() * dtype_size(dtype)`; throws ArgumentError otherwise.
void decode_to_f32(Dtype dtype, std::span<const std::uint8_t> bytes, std::span<float> out);

// Encode `values` as little-endian elements of `dtype` into `out`, which must
// hold `values.size() * dtype_size(dtype)` bytes.
void encode_from_f32(Dtype dtype, std::span<const float> values, std::span<std::uint8_t> out);

std::vector<std::uint8_t> f32_to_dtype(std::span<const float> values, Dtype dtype);

}  // namespace mergelab
