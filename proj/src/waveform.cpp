// SPDX-License-Identifier: Apache-2.0
#include "mmsound/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mmsound/binary_io.hpp"
#include "mmsound/fft.hpp"

namespace mmsound::waveform {

void ToneGrid::validate() const
{
    require(n_tones >= 1, "tone grid: n_tones must be >= 1");
    require(std::isfinite(tone_spacing_hz) && tone_spacing_hz > 0.0, "tone grid: tone_spacing_hz must be > 0");
    require(std::isfinite(center_offset_hz), "tone grid: center_offset_hz must be finite");
    const double bins = center_offset_hz / tone_spacing_hz;
    require(std::abs(bins - std::round(bins)) < 1e-9 * std::max(1.0, std::abs(bins)),
            "tone grid: center_offset_hz must be a multiple of tone_spacing_hz");
}

double ToneGrid::occupied_bandwidth_hz() const
{
    return static_cast<double>(n_tones - 1) * tone_spacing_hz;
}

long ToneGrid::tone_bin(std::size_t n) const
{
    const long offset = std::lround(center_offset_hz / tone_spacing_hz);
    return static_cast<long>(n) - static_cast<long>(n_tones / 2) + offset;
}

std::vector<double> ToneGrid::tone_frequencies_hz() const
{
    std::vector<double> f(n_tones);
    for (std::size_t n = 0; n < n_tones; ++n)
        f[n] = static_cast<double>(tone_bin(n)) * tone_spacing_hz;
    return f;
}

std::string PhaseRule::name() const
{
    switch (kind) {
    case PhaseRuleKind::ZadoffChuQuadratic:
        return "zadoff_chu_quadratic";
    case PhaseRuleKind::ZadoffChuRefined:
        return "zadoff_chu_refined";
    case PhaseRuleKind::Explicit:
        return "explicit";
    }
    return "unknown";
}

PhaseRule PhaseRule::parse(const std::string& name, unsigned root)
{
    if (name == "zadoff_chu_quadratic")
        return quadratic(root);
    if (name == "zadoff_chu_refined")
        return refined(root);
    throw ValidationError("unknown phase rule '" + name + "'");
}

std::size_t SoundingWaveform::dft_bin(std::size_t n) const
{
    const auto len = static_cast<long>(samples.size());
    long k = grid.tone_bin(n) % len;
    if (k < 0)
        k += len;
    return static_cast<std::size_t>(k);
}

CVec SoundingWaveform::tone_spectrum() const
{
    const CVec spec = fft::forward(samples);
    CVec out(grid.n_tones);
    for (std::size_t n = 0; n < grid.n_tones; ++n)
        out[n] = spec[dft_bin(n)];
    return out;
}

std::vector<double> quadratic_zc_phases(std::size_t n_tones, unsigned root)
{
    require(n_tones >= 1, "quadratic phases: n_tones must be >= 1");
    require(root >= 1 && std::gcd(static_cast<std::size_t>(root), n_tones) == 1,
            "quadratic phases: root must be coprime to the tone count");
    std::vector<double> th(n_tones);
    const auto big_n = static_cast<double>(n_tones);
    const bool odd = n_tones % 2 == 1;
    for (std::size_t n = 0; n < n_tones; ++n) {
        // n(n+1) mod 2N keeps the argument small without changing the phase.
        const auto nn = static_cast<unsigned long long>(n);
        const unsigned long long q = odd ? nn * (nn + 1) : nn * nn;
        const unsigned long long r = (q * root) % (2ULL * n_tones);
        th[n] = kPi * static_cast<double>(r) / big_n;
    }
    return th;
}

namespace {

CVec synthesize(const ToneGrid& grid, std::size_t len, std::span<const double> phases)
{
    CVec spec(len, cplx{0.0, 0.0});
    for (std::size_t n = 0; n < grid.n_tones; ++n) {
        long k = grid.tone_bin(n) % static_cast<long>(len);
        if (k < 0)
            k += static_cast<long>(len);
        spec[static_cast<std::size_t>(k)] = std::polar(1.0, phases[n]);
    }
    return fft::inverse(spec);
}

} // namespace

SoundingWaveform gen_multitone(const ToneGrid& grid, unsigned oversampling, const PhaseRule& rule)
{
    grid.validate();
    require(oversampling >= 1, "gen_multitone: oversampling must be >= 1");
    const std::size_t nfft = fft::next_pow2(grid.n_tones);
    const std::size_t len = nfft * oversampling;
    const double fs = static_cast<double>(len) * grid.tone_spacing_hz;
    const long half = static_cast<long>(len / 2);
    for (std::size_t n : {std::size_t{0}, grid.n_tones - 1}) {
        const long k = grid.tone_bin(n);
        require(k >= -half && k < half,
                "gen_multitone: tone comb exceeds the implied sample rate of " + std::to_string(fs) + " Hz");
    }

    std::vector<double> phases;
    switch (rule.kind) {
    case PhaseRuleKind::Explicit:
        require(rule.phases.size() == grid.n_tones, "gen_multitone: explicit phase list length must equal n_tones");
        for (double p : rule.phases)
            require(std::isfinite(p), "gen_multitone: non-finite phase");
        phases = rule.phases;
        break;
    case PhaseRuleKind::ZadoffChuQuadratic:
        phases = quadratic_zc_phases(grid.n_tones, rule.root);
        break;
    case PhaseRuleKind::ZadoffChuRefined:
        phases = quadratic_zc_phases(grid.n_tones, rule.root);
        if (grid.n_tones > 2)
            phases = optimize_papr_phases(grid, oversampling, std::move(phases));
        break;
    }

    SoundingWaveform w;
    w.samples = synthesize(grid, len, phases);
    w.sample_rate_hz = fs;
    w.grid = grid;
    w.phases = std::move(phases);
    w.phase_rule = rule.name();
    return w;
}

double papr_db(std::span<const cplx> samples)
{
    require(!samples.empty(), "papr: empty waveform");
    double peak = 0.0;
    double sum = 0.0;
    for (const auto& s : samples) {
        const double p = std::norm(s);
        peak = std::max(peak, p);
        sum += p;
    }
    require(sum > 0.0, "papr: all-zero waveform");
    return std::max(0.0, db10(peak * static_cast<double>(samples.size()) / sum));
}

double spectrum_flatness_db(const SoundingWaveform& w)
{
    require(!w.samples.empty(), "spectrum_flatness: empty waveform");
    const CVec tones = w.tone_spectrum();
    double lo = std::abs(tones.front());
    double hi = lo;
    for (const auto& t : tones) {
        lo = std::min(lo, std::abs(t));
        hi = std::max(hi, std::abs(t));
    }
    require(lo > 0.0, "spectrum_flatness: an active tone has zero magnitude");
    return 20.0 * std::log10(hi / lo);
}

CVec cyclic_extension(const SoundingWaveform& w, double slot_duration_s)
{
    require(slot_duration_s > 0.0, "cyclic_extension: slot duration must be positive");
    const auto n = static_cast<std::size_t>(std::llround(slot_duration_s * w.sample_rate_hz));
    CVec out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = w.samples[i % w.samples.size()];
    return out;
}

double autocorrelation_sidelobe_db(std::span<const cplx> sequence)
{
    require(sequence.size() >= 2, "autocorrelation: need at least two samples");
    const CVec spec = fft::forward(sequence);
    CVec power(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k)
        power[k] = std::norm(spec[k]);
    const CVec acf = fft::inverse(power);
    const double peak = std::abs(acf[0]);
    double side = 0.0;
    for (std::size_t m = 1; m < acf.size(); ++m)
        side = std::max(side, std::abs(acf[m]));
    // Ideal sequences have numerically zero sidelobes; report against the
    // rounding floor instead of returning infinity.
    side = std::max(side, peak * 1e-15);
    return 20.0 * std::log10(peak / side);
}

CVec tone_code(const SoundingWaveform& w)
{
    CVec code(w.phases.size());
    for (std::size_t n = 0; n < code.size(); ++n)
        code[n] = std::polar(1.0, w.phases[n]);
    return code;
}

void export_waveform(const SoundingWaveform& w, const std::string& base_path)
{
    io::write_bytes(base_path + ".bin", io::encode_cf32(w.samples));
    nlohmann::ordered_json side;
    side["n_tones"] = w.grid.n_tones;
    side["tone_spacing_hz"] = w.grid.tone_spacing_hz;
    side["center_offset_hz"] = w.grid.center_offset_hz;
    side["sample_rate_hz"] = w.sample_rate_hz;
    side["n_samples"] = w.samples.size();
    side["phase_rule"] = w.phase_rule;
    side["papr_db"] = papr_db(w);
    io::write_text(base_path + ".json", side.dump(2) + "\n");
}

} // namespace mmsound::waveform
