// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "mmsound/common.hpp"

namespace mmsound::fft {

// Unnormalized forward DFT: X[k] = sum_n x[n] exp(-j 2 pi k n / N).
void forward(std::span<const cplx> in, std::span<cplx> out);
// Unnormalized inverse DFT: x[n] = sum_k X[k] exp(+j 2 pi k n / N).
void inverse(std::span<const cplx> in, std::span<cplx> out);

CVec forward(std::span<const cplx> in);
CVec inverse(std::span<const cplx> in);

// 2-D transforms on a row-major rows x cols buffer.
void forward2d(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols);
void inverse2d(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols);

std::size_t next_pow2(std::size_t n);

} // namespace mmsound::fft
