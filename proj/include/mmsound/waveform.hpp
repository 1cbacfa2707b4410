// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmsound/common.hpp"

namespace mmsound::waveform {

// Comb of equally spaced tones. Tone n sits on the integer frequency bin
// n - floor(n_tones / 2) + center_offset_hz / tone_spacing_hz.
struct ToneGrid {
    std::size_t n_tones = 2002;
    double tone_spacing_hz = 500e3;
    double center_offset_hz = 0.0;

    void validate() const;
    double occupied_bandwidth_hz() const;
    long tone_bin(std::size_t n) const;
    std::vector<double> tone_frequencies_hz() const;
};

enum class PhaseRuleKind { ZadoffChuQuadratic, ZadoffChuRefined, Explicit };

struct PhaseRule {
    PhaseRuleKind kind = PhaseRuleKind::ZadoffChuRefined;
    unsigned root = 1;
    std::vector<double> phases; // Explicit only

    static PhaseRule quadratic(unsigned root = 1) { return {PhaseRuleKind::ZadoffChuQuadratic, root, {}}; }
    static PhaseRule refined(unsigned root = 1) { return {PhaseRuleKind::ZadoffChuRefined, root, {}}; }
    static PhaseRule explicit_list(std::vector<double> p) { return {PhaseRuleKind::Explicit, 1, std::move(p)}; }

    std::string name() const;
    static PhaseRule parse(const std::string& name, unsigned root = 1);
};

// One fundamental period of the tone comb.
struct SoundingWaveform {
    CVec samples;
    double sample_rate_hz = 0.0;
    ToneGrid grid;
    std::vector<double> phases;
    std::string phase_rule;

    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
    // Index of tone n in the length-N DFT of `samples`.
    std::size_t dft_bin(std::size_t n) const;
    // Complex amplitude of each active tone, read from the DFT of `samples`.
    CVec tone_spectrum() const;
};

// theta_n = pi u n(n+1)/N for odd N, pi u n^2/N for even N.
std::vector<double> quadratic_zc_phases(std::size_t n_tones, unsigned root);

struct PaprOptimizerOptions {
    std::vector<int> norm_orders{4, 8, 16, 32, 64};
    int max_iterations_per_order = 300;
};

// Minimises the L_p norm of |x(t)|^2 over tone phases with a flat amplitude
// spectrum, for increasing p. Evaluated on the sample grid implied by
// `oversampling`.
std::vector<double> optimize_papr_phases(const ToneGrid& grid, unsigned oversampling,
                                         std::vector<double> start,
                                         const PaprOptimizerOptions& options = {});

SoundingWaveform gen_multitone(const ToneGrid& grid, unsigned oversampling, const PhaseRule& rule);

double papr_db(std::span<const cplx> samples);
inline double papr_db(const SoundingWaveform& w) { return papr_db(w.samples); }

// Max/min active-tone magnitude ratio in dB.
double spectrum_flatness_db(const SoundingWaveform& w);

// Periodic extension of the waveform to fill a sequence slot (e.g. 2.6 us).
CVec cyclic_extension(const SoundingWaveform& w, double slot_duration_s);

// Ratio in dB between the zero-lag peak and the largest non-zero-lag
// magnitude of the circular autocorrelation.
double autocorrelation_sidelobe_db(std::span<const cplx> sequence);

// e^{j theta_n} across the tones.
CVec tone_code(const SoundingWaveform& w);

// Writes <base>.bin (cf32 LE) and <base>.json sidecar.
void export_waveform(const SoundingWaveform& w, const std::string& base_path);

} // namespace mmsound::waveform
