// SPDX-License-Identifier: Apache-2.0
#include "mmsound/sounder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmsound/fft.hpp"
#include "mmsound/parallel.hpp"
#include "mmsound/rng.hpp"

namespace mmsound::sounder {

void LinkBudget::validate() const
{
    for (double v : {noise_figure_db, bandwidth_hz, eirp_dbm, rx_array_gain_db, saturation_dbm})
        require(std::isfinite(v), "link budget: all fields must be finite");
    require(bandwidth_hz > 0.0, "link budget: bandwidth must be positive");
}

double receiver_sensitivity(const LinkBudget& b)
{
    b.validate();
    return -174.0 + b.noise_figure_db + 10.0 * std::log10(b.bandwidth_hz);
}

LinkBudgetReport link_budget_report(const LinkBudget& b)
{
    LinkBudgetReport r{};
    r.sensitivity_dbm = receiver_sensitivity(b);
    r.isotropic_sensitivity_dbm = r.sensitivity_dbm - b.rx_array_gain_db;
    r.max_pathloss_db = b.eirp_dbm - r.isotropic_sensitivity_dbm;
    r.dynamic_range_db = b.saturation_dbm - r.sensitivity_dbm;
    return r;
}

NoiseConfig NoiseConfig::from_snr(double snr_db)
{
    require(std::isfinite(snr_db), "noise: SNR must be finite");
    NoiseConfig n;
    n.noise_var = std::pow(10.0, -snr_db / 10.0);
    return n;
}

NoiseConfig NoiseConfig::physical(const LinkBudget& budget, double pathloss_db)
{
    require(std::isfinite(pathloss_db), "noise: pathloss must be finite");
    NoiseConfig n;
    n.received_power_dbm = budget.eirp_dbm - pathloss_db + budget.rx_array_gain_db;
    n.noise_var = std::pow(10.0, (receiver_sensitivity(budget) - n.received_power_dbm) / 10.0);
    n.saturation_dbm = budget.saturation_dbm;
    return n;
}

std::vector<double> hann_window(std::size_t m_f)
{
    require(m_f >= 1, "window: length must be >= 1");
    std::vector<double> w(m_f);
    for (std::size_t k = 0; k < m_f; ++k) {
        const double s = std::sin(kPi * static_cast<double>(k + 1) / static_cast<double>(m_f + 1));
        w[k] = s * s;
    }
    return w;
}

double coherent_gain(const std::vector<double>& w)
{
    require(!w.empty(), "window: empty");
    return std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
}

double delay_noise_floor(double noise_var, const std::vector<double>& w)
{
    const double m = static_cast<double>(w.size());
    double e = 0.0;
    for (double v : w)
        e += v * v;
    return noise_var * e / (m * m);
}

CVec transfer_to_cir(const CVec& h_freq, const std::vector<double>& window)
{
    require(h_freq.size() == window.size(), "CIR: transfer and window lengths differ");
    CVec x(h_freq.size());
    for (std::size_t k = 0; k < x.size(); ++k)
        x[k] = window[k] * h_freq[k];
    CVec h = fft::inverse(x);
    const double inv = 1.0 / static_cast<double>(h.size());
    for (auto& v : h)
        v *= inv;
    return h;
}

void CirTensor::validate() const
{
    require(n_snapshots >= 1 && n_tx >= 1 && n_rx >= 1 && n_delay >= 1, "CIR tensor: empty dimension");
    require(values.size() == n_snapshots * n_tx * n_rx * n_delay, "CIR tensor: payload size does not match dims");
    require(window.size() == n_delay, "CIR tensor: window length must equal the delay axis");
    require(delay_step_s > 0.0 && bandwidth_hz > 0.0, "CIR tensor: delay step and bandwidth must be positive");
    for (double w : window)
        require(w > 0.0, "CIR tensor: window must be nonzero on every tone");
    for (const auto& v : values)
        require(std::isfinite(v.real()) && std::isfinite(v.imag()), "CIR tensor: non-finite sample");
}

CVec CirTensor::frequency_response(std::size_t s, std::size_t t, std::size_t r) const
{
    CVec h(cir(s, t, r), cir(s, t, r) + n_delay);
    CVec x = fft::forward(h);
    for (std::size_t k = 0; k < n_delay; ++k)
        x[k] /= window[k];
    return x;
}

CirTensor acquire(const channel::ChannelSynthesizer& channel, const schedule::SwitchSchedule& schedule,
                  const waveform::SoundingWaveform& waveform, const AcquisitionConfig& config, std::uint64_t seed)
{
    const auto& scene = channel.scene();
    const std::size_t mf = scene.frequencies_hz.size();
    require(config.n_snapshots >= 1, "acquire: at least one snapshot required");
    require(waveform.grid.n_tones == mf, "acquire: waveform has " + std::to_string(waveform.grid.n_tones) +
                                             " tones but the scene has " + std::to_string(mf));
    require(mf < 2 || std::abs(waveform.grid.tone_spacing_hz - scene.tone_spacing_hz()) <= 1e-9 * waveform.grid.tone_spacing_hz,
            "acquire: waveform and scene tone spacings differ");
    require(std::isfinite(config.noise.noise_var) && config.noise.noise_var >= 0.0, "acquire: noise variance must be finite and >= 0");
    require(config.lo_phase_max_rad >= 0.0 && config.lo_phase_max_rad <= kPi, "acquire: LO phase bound must lie in [0, pi]");
    schedule.frame.validate();

    const CVec x = waveform.tone_spectrum();
    for (const auto& v : x)
        if (std::abs(v) == 0.0)
            throw NumericalError("acquire: waveform has a zero tone, equalization impossible");

    const auto& cb = schedule.codebook;
    CirTensor out;
    out.n_snapshots = config.n_snapshots;
    out.n_tx = static_cast<std::size_t>(cb.n_tx);
    out.n_rx = static_cast<std::size_t>(cb.n_rx);
    out.n_delay = mf;
    out.tone_spacing_hz = waveform.grid.tone_spacing_hz;
    out.bandwidth_hz = static_cast<double>(mf) * waveform.grid.tone_spacing_hz;
    out.delay_step_s = 1.0 / out.bandwidth_hz;
    out.center_frequency_hz = scene.carrier_hz;
    out.n_avg = schedule.frame.n_core;
    out.noise_var = config.noise.noise_var / schedule.frame.n_core;
    out.saturated = config.noise.received_power_dbm > config.noise.saturation_dbm;
    out.schedule_checksum = schedule.checksum();
    out.window = hann_window(mf);
    out.values.assign(out.n_snapshots * out.n_tx * out.n_rx * mf, cplx{});

    const double sigma2 = config.noise.noise_var;
    const int m_avg = schedule.frame.n_core;
    for (std::size_t s = 0; s < config.n_snapshots; ++s) {
        const auto snap = channel.realize(schedule, s, seed);
        cplx lo{1.0, 0.0};
        if (config.lo_phase_max_rad > 0.0) {
            RandomStream rs(seed, {s, static_cast<std::uint64_t>(channel::Purpose::LoPhase)});
            lo = std::polar(1.0, (2.0 * rs.uniform() - 1.0) * config.lo_phase_max_rad);
        }
        parallel_for(snap.n_entries, [&](std::size_t e) {
            const auto& en = cb.entries[e];
            CVec h(mf);
            RandomStream rs(seed, {s, static_cast<std::uint64_t>(channel::Purpose::ReceiverNoise), e});
            for (std::size_t k = 0; k < mf; ++k) {
                const cplx clean = x[k] * snap.at(e, k) * lo;
                cplx acc{};
                for (int m = 0; m < m_avg; ++m)
                    acc += sigma2 > 0.0 ? clean + rs.complex_normal(sigma2 * std::norm(x[k])) : clean;
                h[k] = acc / static_cast<double>(m_avg) / x[k];
            }
            const CVec cir = transfer_to_cir(h, out.window);
            std::copy(cir.begin(), cir.end(), out.cir(s, static_cast<std::size_t>(en.tx), static_cast<std::size_t>(en.rx)));
        });
    }
    for (const auto& v : out.values)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw NumericalError("acquire: non-finite CIR sample");
    return out;
}

std::vector<double> pdp_tensor(const CirTensor& cir)
{
    std::vector<double> p(cir.values.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = std::norm(cir.values[i]);
    return p;
}

namespace {

std::vector<std::size_t> axis_or_all(const std::vector<std::size_t>& sel, std::size_t n, const char* what)
{
    if (sel.empty()) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }
    for (auto i : sel)
        require(i < n, std::string("PDP selection: ") + what + " index out of range");
    return sel;
}

} // namespace

std::vector<double> pdp(const CirTensor& cir, const PdpSelection& selection)
{
    require(!cir.values.empty(), "PDP: empty tensor");
    const auto ss = axis_or_all(selection.snapshots, cir.n_snapshots, "snapshot");
    const auto ts = axis_or_all(selection.tx, cir.n_tx, "tx");
    const auto rs = axis_or_all(selection.rx, cir.n_rx, "rx");
    std::vector<double> out(cir.n_delay, 0.0);
    for (auto s : ss)
        for (auto t : ts)
            for (auto r : rs) {
                const cplx* h = cir.cir(s, t, r);
                for (std::size_t n = 0; n < cir.n_delay; ++n)
                    out[n] += std::norm(h[n]);
            }
    const double count = static_cast<double>(ss.size() * ts.size() * rs.size());
    for (auto& v : out)
        v /= count;
    return out;
}

CVec interpolate_cir(const CirTensor& cir, std::size_t s, std::size_t t, std::size_t r, std::size_t factor)
{
    require(factor >= 1, "interpolation factor must be >= 1");
    const std::size_t m = cir.n_delay;
    CVec h(cir.cir(s, t, r), cir.cir(s, t, r) + m);
    const CVec spec = fft::forward(h);
    CVec padded(m * factor, cplx{});
    std::copy(spec.begin(), spec.end(), padded.begin());
    CVec out = fft::inverse(padded);
    const double inv = 1.0 / static_cast<double>(m);
    for (auto& v : out)
        v *= inv;
    return out;
}

PowerAngularSpectrum pas(const CirTensor& cir, const arrays::ArrayManifold& rx, const std::vector<double>& az_rad,
                         const std::vector<double>& el_rad)
{
    require(!az_rad.empty() && !el_rad.empty(), "PAS: angle grid is empty");
    require(rx.size() == cir.n_rx, "PAS: manifold size does not match the rx dimension");
    PowerAngularSpectrum out;
    out.az_rad = az_rad;
    out.el_rad = el_rad;
    out.power.assign(az_rad.size() * el_rad.size(), 0.0);

    // Snapshot matrix: one column per (s, t, delay bin).
    const auto mr = static_cast<Eigen::Index>(cir.n_rx);
    const auto cols = static_cast<Eigen::Index>(cir.n_snapshots * cir.n_tx * cir.n_delay);
    Eigen::MatrixXcd y(mr, cols);
    Eigen::Index c = 0;
    for (std::size_t s = 0; s < cir.n_snapshots; ++s)
        for (std::size_t t = 0; t < cir.n_tx; ++t)
            for (std::size_t n = 0; n < cir.n_delay; ++n, ++c)
                for (Eigen::Index r = 0; r < mr; ++r)
                    y(r, c) = cir.cir(s, t, static_cast<std::size_t>(r))[n];
    const Eigen::MatrixXcd cov = y * y.adjoint();

    parallel_for(out.power.size(), [&](std::size_t i) {
        const Eigen::MatrixXcd b = rx.response(az_rad[i % az_rad.size()], el_rad[i / az_rad.size()]);
        double p = 0.0;
        for (Eigen::Index pol = 0; pol < 2; ++pol) {
            const double nb = b.col(pol).squaredNorm();
            if (nb > 0.0)
                p += (b.col(pol).adjoint() * cov * b.col(pol))(0, 0).real() / nb;
        }
        out.power[i] = p;
    });
    const double mx = *std::max_element(out.power.begin(), out.power.end());
    if (mx > 0.0)
        for (auto& v : out.power)
            v /= mx;
    return out;
}

} // namespace mmsound::sounder
