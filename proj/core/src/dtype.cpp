#include "mergelab/dtype.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "mergelab/error.hpp"

namespace mergelab {

static_assert(std::endian::native == std::endian::little,
              "container encoding assumes a little-endian host");

std::string_view dtype_name(Dtype d) noexcept {
    switch (d) {
    case Dtype::F32:
        return "F32";
    case Dtype::F16:
        return "F16";
    case Dtype::BF16:
        return "BF16";
    }
    return "?";
}

std::optional<Dtype> parse_dtype(std::string_view tag) noexcept {
    if (tag == "F32") return Dtype::F32;
    if (tag == "F16") return Dtype::F16;
    if (tag == "BF16") return Dtype::BF16;
    return std::nullopt;
}

float f16_bits_to_f32(std::uint16_t bits) noexcept {
    const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
    const std::uint32_t exponent = (bits >> 10) & 0x1Fu;
    std::uint32_t mantissa = bits & 0x3FFu;

    std::uint32_t out;
    if (exponent == 0x1F) {
        out = sign | 0x7F800000u | (mantissa << 13);
    } else if (exponent != 0) {
        out = sign | ((exponent + 112) << 23) | (mantissa << 13);
    } else if (mantissa == 0) {
        out = sign;
    } else {
        // subnormal: value = mantissa * 2^-24, exact in f32
        const float magnitude = std::ldexp(static_cast<float>(mantissa), -24);
        out = sign | std::bit_cast<std::uint32_t>(magnitude);
    }
    return std::bit_cast<float>(out);
}

float bf16_bits_to_f32(std::uint16_t bits) noexcept {
    return std::bit_cast<float>(static_cast<std::uint32_t>(bits) << 16);
}

std::uint16_t f32_to_f16_bits(float value) noexcept {
    const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
    const auto sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
    const std::uint32_t magnitude = x & 0x7FFFFFFFu;

    if (magnitude >= 0x7F800000u) {
        // inf stays inf, every NaN becomes a quiet NaN
        return sign | (magnitude > 0x7F800000u ? 0x7E00u : 0x7C00u);
    }
    if (magnitude >= 0x477FF000u) {
        // >= 65520 rounds past the largest finite half (65504)
        return sign | 0x7C00u;
    }
    if (magnitude < 0x38800000u) {
        // below 2^-14: subnormal half. Scaling by 2^24 is exact, and
        // nearbyint uses the default round-to-nearest-even mode.
        const float scaled = std::bit_cast<float>(magnitude) * 0x1p24f;
        return sign | static_cast<std::uint16_t>(std::nearbyint(scaled));
    }

    const std::uint32_t exponent = (magnitude >> 23) - 127 + 15;
    const std::uint32_t mantissa = magnitude & 0x7FFFFFu;
    std::uint32_t half = (exponent << 10) | (mantissa >> 13);
    const std::uint32_t rest = mantissa & 0x1FFFu;
    if (rest > 0x1000u || (rest == 0x1000u && (half & 1u))) {
        ++half;  // carry may roll into the exponent, which is still correct
    }
    return sign | static_cast<std::uint16_t>(half);
}

std::uint16_t f32_to_bf16_bits(float value) noexcept {
    const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
    if ((x & 0x7FFFFFFFu) > 0x7F800000u) {
        return static_cast<std::uint16_t>((x >> 16) | 0x0040u);
    }
    const std::uint32_t lsb = (x >> 16) & 1u;
    return static_cast<std::uint16_t>((x + 0x7FFFu + lsb) >> 16);
}

void decode_to_f32(Dtype dtype, std::span<const std::uint8_t> bytes, std::span<float> out) {
    const std::size_t width = dtype_size(dtype);
    if (bytes.size() != out.size() * width) {
        throw ArgumentError("decode: " + std::to_string(bytes.size()) + " bytes do not hold " +
                            std::to_string(out.size()) + " " + std::string(dtype_name(dtype)) +
                            " elements");
    }
    switch (dtype) {
    case Dtype::F32:
        if (!out.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
        break;
    case Dtype::F16:
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto bits = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
            out[i] = f16_bits_to_f32(bits);
        }
        break;
    case Dtype::BF16:
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto bits = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
            out[i] = bf16_bits_to_f32(bits);
        }
        break;
    }
}

void encode_from_f32(Dtype dtype, std::span<const float> values, std::span<std::uint8_t> out) {
    const std::size_t width = dtype_size(dtype);
    if (out.size() != values.size() * width) {
        throw ArgumentError("encode: output buffer has " + std::to_string(out.size()) +
                            " bytes, expected " + std::to_string(values.size() * width));
    }
    switch (dtype) {
    case Dtype::F32:
        if (!values.empty()) std::memcpy(out.data(), values.data(), out.size());
        break;
    case Dtype::F16:
    case Dtype::BF16:
        for (std::size_t i = 0; i < values.size(); ++i) {
            const std::uint16_t bits = dtype == Dtype::F16 ? f32_to_f16_bits(values[i])
                                                           : f32_to_bf16_bits(values[i]);
            out[2 * i] = static_cast<std::uint8_t>(bits & 0xFFu);
            out[2 * i + 1] = static_cast<std::uint8_t>(bits >> 8);
        }
        break;
    }
}

std::vector<std::uint8_t> f32_to_dtype(std::span<const float> values, Dtype dtype) {
    std::vector<std::uint8_t> out(values.size() * dtype_size(dtype));
    encode_from_f32(dtype, values, out);
    return out;
}

}  // namespace mergelab
