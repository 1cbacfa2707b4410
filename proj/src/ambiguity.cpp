// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mmsound/estimation.hpp"
#include "mmsound/fft.hpp"
#include "mmsound/parallel.hpp"

namespace mmsound::estimation {

std::vector<double> default_doppler_grid(const schedule::SwitchSchedule& schedule)
{
    require(schedule.size() > 0, "ambiguity: empty schedule");
    const double tf = schedule.frame.frame_duration_s();
    const double step = 1.0 / (4.0 * static_cast<double>(schedule.size()) * tf);
    const double half = 1.0 / (2.0 * tf);
    const auto n = static_cast<long>(std::floor(half / step + 1e-9));
    std::vector<double> grid;
    for (long i = -n; i <= n; ++i)
        grid.push_back(static_cast<double>(i) * step);
    return grid;
}

AmbiguityFunction doppler_ambiguity(const schedule::SwitchSchedule& schedule, const std::vector<double>& grid)
{
    require(schedule.size() > 0, "ambiguity: empty schedule");
    require(!grid.empty(), "ambiguity: empty Doppler grid");
    const auto& cb = schedule.codebook;
    const std::size_t nt = static_cast<std::size_t>(cb.n_tx);
    const std::size_t nr = static_cast<std::size_t>(cb.dual_pol ? cb.n_rx / 2 : cb.n_rx);
    const double k = static_cast<double>(schedule.size());

    AmbiguityFunction af;
    af.doppler_grid_hz = grid;
    af.magnitude.assign(grid.size(), 0.0);
    parallel_for(grid.size(), [&](std::size_t g) {
        // Accumulate per antenna position, then scan all spatial frequencies
        // with one 2-D DFT.
        CVec acc(nt * nr, cplx{});
        for (std::size_t e = 0; e < schedule.size(); ++e) {
            const auto& en = cb.entries[e];
            const std::size_t pr = cb.dual_pol ? static_cast<std::size_t>(en.rx / 2) : static_cast<std::size_t>(en.rx);
            acc[static_cast<std::size_t>(en.tx) * nr + pr] += std::polar(1.0, kTwoPi * grid[g] * schedule.entry_time_s(0, e));
        }
        CVec spec(acc.size());
        fft::forward2d(acc, spec, nt, nr);
        double best = 0.0;
        for (const auto& v : spec)
            best = std::max(best, std::abs(v));
        af.magnitude[g] = std::min(best / k, 1.0);
    });
    return af;
}

double AmbiguityFunction::max_sidelobe(double mainlobe_hz) const
{
    double best = 0.0;
    for (std::size_t i = 0; i < magnitude.size(); ++i)
        if (std::abs(doppler_grid_hz[i]) >= mainlobe_hz)
            best = std::max(best, magnitude[i]);
    return best;
}

double AmbiguityFunction::sidelobe_location_hz(double mainlobe_hz) const
{
    double best = -1.0, where = 0.0;
    for (std::size_t i = 0; i < magnitude.size(); ++i)
        if (std::abs(doppler_grid_hz[i]) >= mainlobe_hz && magnitude[i] > best) {
            best = magnitude[i];
            where = doppler_grid_hz[i];
        }
    return where;
}

double unambiguous_doppler_hz(const schedule::SwitchSchedule& schedule, double peak_level)
{
    require(peak_level > 0.0 && peak_level <= 1.0, "ambiguity: peak level must be in (0, 1]");
    const auto af = doppler_ambiguity(schedule, default_doppler_grid(schedule));
    const double mainlobe = 1.0 / schedule.snapshot_duration_s();
    double first = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < af.magnitude.size(); ++i) {
        const double nu = std::abs(af.doppler_grid_hz[i]);
        if (nu >= mainlobe * (1.0 - 1e-9) && af.magnitude[i] >= peak_level)
            first = std::min(first, nu);
    }
    const double full = 1.0 / (2.0 * schedule.frame.frame_duration_s());
    return std::isfinite(first) ? std::min(first / 2.0, full) : full;
}

std::string ambiguity_csv(const AmbiguityFunction& af)
{
    std::ostringstream os;
    os << std::setprecision(10) << "doppler_hz,magnitude\n";
    for (std::size_t i = 0; i < af.magnitude.size(); ++i)
        os << af.doppler_grid_hz[i] << ',' << af.magnitude[i] << '\n';
    return os.str();
}

} // namespace mmsound::estimation
