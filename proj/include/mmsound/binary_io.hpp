// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "mmsound/common.hpp"

namespace mmsound::io {

static_assert(std::endian::native == std::endian::little, "payload writers assume a little-endian host");

// Interleaved little-endian float32 (I, Q) pairs.
inline std::vector<unsigned char> encode_cf32(std::span<const cplx> values)
{
    std::vector<unsigned char> out(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float iq[2] = {static_cast<float>(values[i].real()), static_cast<float>(values[i].imag())};
        std::memcpy(out.data() + 8 * i, iq, 8);
    }
    return out;
}

inline CVec decode_cf32(std::span<const unsigned char> bytes)
{
    require(bytes.size() % 8 == 0, "cf32 payload length is not a multiple of 8 bytes");
    CVec out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        float iq[2];
        std::memcpy(iq, bytes.data() + 8 * i, 8);
        out[i] = {iq[0], iq[1]};
    }
    return out;
}

inline void write_bytes(const std::string& path, std::span<const unsigned char> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), "write failed: " + path);
}

inline std::vector<unsigned char> read_bytes(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), "cannot write " + path);
    out << text;
}

inline std::string read_text(const std::string& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace mmsound::io
