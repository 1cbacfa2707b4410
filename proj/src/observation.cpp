// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "mmsound/estimation.hpp"
#include "mmsound/fft.hpp"
#include "mmsound/parallel.hpp"

namespace mmsound::estimation {

void Observation::validate() const
{
    require(n_snapshots >= 1 && n_entries >= 1 && !frequencies_hz.empty(), "observation: empty dimension");
    require(tx.size() == n_entries && rx.size() == n_entries, "observation: per-entry antenna lists have the wrong size");
    require(times_s.size() == n_snapshots * n_entries, "observation: timestamp count mismatch");
    require(values.size() == n_snapshots * n_entries * m_f(), "observation: value count mismatch");
}

double Observation::power() const
{
    double p = 0.0;
    for (const auto& v : values)
        p += std::norm(v);
    return p;
}

Observation observation_from_cir(const sounder::CirTensor& cir, const schedule::SwitchSchedule& schedule,
                                 std::size_t tone_step)
{
    cir.validate();
    require(tone_step >= 1, "observation: tone step must be >= 1");
    const auto& cb = schedule.codebook;
    require(static_cast<std::size_t>(cb.n_tx) == cir.n_tx && static_cast<std::size_t>(cb.n_rx) == cir.n_rx,
            "observation: schedule and CIR tensor dimensions differ");
    Observation o;
    o.n_snapshots = cir.n_snapshots;
    o.n_entries = schedule.size();
    o.snapshot_duration_s = schedule.snapshot_duration_s();
    o.frame_duration_s = schedule.frame.frame_duration_s();
    const auto all = channel::tone_frequencies(cir.n_delay, cir.tone_spacing_hz);
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < cir.n_delay; k += tone_step) {
        keep.push_back(k);
        o.frequencies_hz.push_back(all[k]);
    }
    for (const auto& en : cb.entries) {
        o.tx.push_back(en.tx);
        o.rx.push_back(en.rx);
    }
    o.times_s.resize(o.n_snapshots * o.n_entries);
    o.values.resize(o.n_snapshots * o.n_entries * keep.size());
    for (std::size_t s = 0; s < o.n_snapshots; ++s)
        for (std::size_t e = 0; e < o.n_entries; ++e) {
            o.times_s[s * o.n_entries + e] = schedule.entry_time_s(s, e);
            const CVec h = cir.frequency_response(s, static_cast<std::size_t>(o.tx[e]), static_cast<std::size_t>(o.rx[e]));
            cplx* dst = o.entry(s, e);
            for (std::size_t i = 0; i < keep.size(); ++i)
                dst[i] = h[keep[i]];
        }
    return o;
}

CVec model_values(const Observation& obs, const std::vector<channel::SpecularPath>& paths,
                  const arrays::ArrayManifold& tx, const arrays::ArrayManifold& rx)
{
    obs.validate();
    CVec out(obs.size(), cplx{});
    const std::size_t mf = obs.m_f();
    for (const auto& p : paths) {
        const Eigen::MatrixXcd sp = channel::path_spatial_matrix(p, tx, rx);
        CVec d(mf);
        for (std::size_t k = 0; k < mf; ++k)
            d[k] = std::polar(1.0, -kTwoPi * obs.frequencies_hz[k] * p.delay_s);
        for (std::size_t s = 0; s < obs.n_snapshots; ++s)
            for (std::size_t e = 0; e < obs.n_entries; ++e) {
                const cplx a = sp(obs.rx[e], obs.tx[e]) * std::polar(1.0, kTwoPi * p.doppler_hz * obs.time(s, e));
                cplx* o = &out[(s * obs.n_entries + e) * mf];
                for (std::size_t k = 0; k < mf; ++k)
                    o[k] += a * d[k];
            }
    }
    return out;
}

Observation residual(const Observation& obs, const std::vector<channel::SpecularPath>& paths,
                     const arrays::ArrayManifold& tx, const arrays::ArrayManifold& rx)
{
    Observation r = obs;
    const CVec m = model_values(obs, paths, tx, rx);
    for (std::size_t i = 0; i < m.size(); ++i)
        r.values[i] -= m[i];
    return r;
}

double late_delay_noise(const Observation& obs)
{
    obs.validate();
    const std::size_t mf = obs.m_f();
    const std::size_t first = mf - std::max<std::size_t>(mf / 4, 1);
    const std::size_t n = obs.n_snapshots * obs.n_entries;
    std::vector<double> acc(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        CVec x(obs.values.begin() + static_cast<std::ptrdiff_t>(i * mf), obs.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * mf));
        const CVec h = fft::inverse(x);
        for (std::size_t k = first; k < mf; ++k)
            acc[i] += std::norm(h[k]) / static_cast<double>(mf);
    });
    double total = 0.0;
    for (double v : acc)
        total += v;
    return total / static_cast<double>(n * (mf - first));
}

} // namespace mmsound::estimation
