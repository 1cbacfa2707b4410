// SPDX-License-Identifier: Apache-2.0
#include "mmsound/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace mmsound::fft {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface
// is. Plans are created once per shape and reused from any thread.
class PlanCache {
public:
    static PlanCache& instance()
    {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(std::size_t rows, std::size_t cols, int sign)
    {
        std::lock_guard lock(mutex_);
        auto key = std::make_tuple(rows, cols, sign);
        if (auto it = plans_.find(key); it != plans_.end())
            return it->second;
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        CVec a(rows * cols), b(rows * cols);
        auto* pa = reinterpret_cast<fftw_complex*>(a.data());
        auto* pb = reinterpret_cast<fftw_complex*>(b.data());
        fftw_plan p = rows == 1
            ? fftw_plan_dft_1d(static_cast<int>(cols), pa, pb, sign, flags)
            : fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), pa, pb, sign, flags);
        if (!p)
            throw NumericalError("fftw plan creation failed");
        plans_.emplace(key, p);
        return p;
    }

    ~PlanCache()
    {
        for (auto& [key, plan] : plans_)
            fftw_destroy_plan(plan);
    }

private:
    std::mutex mutex_;
    std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

void run(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols, int sign)
{
    require(in.size() == rows * cols && out.size() == in.size(), "fft: size mismatch");
    if (in.empty())
        return;
    fftw_plan p = PlanCache::instance().get(rows, cols, sign);
    // Out-of-place execution may not modify the input for complex DFTs.
    auto* src = const_cast<fftw_complex*>(reinterpret_cast<const fftw_complex*>(in.data()));
    auto* dst = reinterpret_cast<fftw_complex*>(out.data());
    if (src == dst) {
        CVec tmp(in.begin(), in.end());
        fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(tmp.data()), dst);
    } else {
        fftw_execute_dft(p, src, dst);
    }
}

} // namespace

void forward(std::span<const cplx> in, std::span<cplx> out) { run(in, out, 1, in.size(), FFTW_FORWARD); }
void inverse(std::span<const cplx> in, std::span<cplx> out) { run(in, out, 1, in.size(), FFTW_BACKWARD); }

CVec forward(std::span<const cplx> in)
{
    CVec out(in.size());
    forward(in, out);
    return out;
}

CVec inverse(std::span<const cplx> in)
{
    CVec out(in.size());
    inverse(in, out);
    return out;
}

void forward2d(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols)
{
    run(in, out, rows, cols, FFTW_FORWARD);
}

void inverse2d(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols)
{
    run(in, out, rows, cols, FFTW_BACKWARD);
}

std::size_t next_pow2(std::size_t n)
{
    std::size_t p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

} // namespace mmsound::fft
