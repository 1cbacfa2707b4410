// SPDX-License-Identifier: Apache-2.0
#include <ceres/ceres.h>

#include <cmath>

#include "mmsound/fft.hpp"
#include "mmsound/waveform.hpp"

namespace mmsound::waveform {
namespace {

// f(theta) = log(sum_m q_m^p) / p with q_m = |x_m|^2 / N, a smooth surrogate
// of log max q_m. The amplitude spectrum stays exactly flat because only
// tone phases are free.
class PnormObjective final : public ceres::FirstOrderFunction {
public:
    PnormObjective(const ToneGrid& grid, std::size_t len, int order)
        : len_(len), order_(order), bins_(grid.n_tones)
    {
        for (std::size_t n = 0; n < grid.n_tones; ++n) {
            long k = grid.tone_bin(n) % static_cast<long>(len);
            if (k < 0)
                k += static_cast<long>(len);
            bins_[n] = static_cast<std::size_t>(k);
        }
    }

    bool Evaluate(const double* theta, double* cost, double* gradient) const override
    {
        const std::size_t n_tones = bins_.size();
        CVec spec(len_, cplx{});
        for (std::size_t n = 0; n < n_tones; ++n)
            spec[bins_[n]] = std::polar(1.0, theta[n]);
        const CVec x = fft::inverse(spec);
        const double mean_power = static_cast<double>(n_tones);

        double sum = 0.0;
        std::vector<double> q(len_);
        for (std::size_t m = 0; m < len_; ++m) {
            q[m] = std::norm(x[m]) / mean_power;
            sum += std::pow(q[m], order_);
        }
        if (!(sum > 0.0) || !std::isfinite(sum))
            return false;
        *cost = std::log(sum) / order_;
        if (gradient) {
            CVec a(len_);
            for (std::size_t m = 0; m < len_; ++m)
                a[m] = std::pow(q[m], order_ - 1) * (2.0 / mean_power) * std::conj(x[m]);
            const CVec s = fft::inverse(a);
            const cplx j{0.0, 1.0};
            for (std::size_t n = 0; n < n_tones; ++n)
                gradient[n] = std::real(j * std::polar(1.0, theta[n]) * s[bins_[n]]) / sum;
        }
        return true;
    }

    int NumParameters() const override { return static_cast<int>(bins_.size()); }

private:
    std::size_t len_;
    int order_;
    std::vector<std::size_t> bins_;
};

} // namespace

std::vector<double> optimize_papr_phases(const ToneGrid& grid, unsigned oversampling,
                                         std::vector<double> start,
                                         const PaprOptimizerOptions& options)
{
    grid.validate();
    require(start.size() == grid.n_tones, "optimize_papr_phases: start length must equal n_tones");
    const std::size_t len = fft::next_pow2(grid.n_tones) * oversampling;

    auto papr_of = [&](const std::vector<double>& th) {
        CVec spec(len, cplx{});
        for (std::size_t n = 0; n < grid.n_tones; ++n) {
            long k = grid.tone_bin(n) % static_cast<long>(len);
            if (k < 0)
                k += static_cast<long>(len);
            spec[static_cast<std::size_t>(k)] = std::polar(1.0, th[n]);
        }
        return papr_db(fft::inverse(spec));
    };

    std::vector<double> best = start;
    double best_papr = papr_of(best);
    std::vector<double> theta = std::move(start);
    for (int order : options.norm_orders) {
        ceres::GradientProblem problem(new PnormObjective(grid, len, order));
        ceres::GradientProblemSolver::Options opts;
        opts.line_search_direction_type = ceres::LBFGS;
        opts.max_num_iterations = options.max_iterations_per_order;
        opts.logging_type = ceres::SILENT;
        opts.minimizer_progress_to_stdout = false;
        ceres::GradientProblemSolver::Summary summary;
        ceres::Solve(opts, problem, theta.data(), &summary);
        const double p = papr_of(theta);
        if (p < best_papr) {
            best_papr = p;
            best = theta;
        }
    }
    for (double& t : best)
        t = wrap_pi(t);
    return best;
}

} // namespace mmsound::waveform
