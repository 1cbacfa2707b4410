// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mmsound/arrays.hpp"
#include "mmsound/channel.hpp"
#include "mmsound/common.hpp"
#include "mmsound/schedule.hpp"
#include "mmsound/waveform.hpp"

namespace mmsound::sounder {

struct LinkBudget {
    double noise_figure_db = 5.0;
    double bandwidth_hz = 1e9;
    double eirp_dbm = 43.0;
    double rx_array_gain_db = 30.08;
    double saturation_dbm = -4.0;

    void validate() const;
};

// Thermal floor -174 dBm/Hz plus noise figure over the bandwidth.
double receiver_sensitivity(const LinkBudget& budget);

struct LinkBudgetReport {
    double sensitivity_dbm;
    double isotropic_sensitivity_dbm;
    double max_pathloss_db;
    double dynamic_range_db;
};

LinkBudgetReport link_budget_report(const LinkBudget& budget);

// Per-tone, per-replica white noise relative to a unit-gain channel.
struct NoiseConfig {
    double noise_var = 0.0;
    // Received power for the physical mode; saturation is flagged against it.
    double received_power_dbm = -std::numeric_limits<double>::infinity();
    double saturation_dbm = std::numeric_limits<double>::infinity();

    static NoiseConfig none() { return {}; }
    // SNR of a unit-power tone after one replica.
    static NoiseConfig from_snr(double snr_db);
    // SNR implied by EIRP - pathloss + rx array gain against the sensitivity.
    static NoiseConfig physical(const LinkBudget& budget, double pathloss_db);
};

struct AcquisitionConfig {
    NoiseConfig noise;
    std::size_t n_snapshots = 1;
    // Common phase per snapshot drawn uniformly from [-lo_phase_max, lo_phase_max].
    double lo_phase_max_rad = 0.0;
};

// Frequency-domain window sin^2(pi (k + 1) / (M + 1)); nonzero on every tone
// so the equalized response can be recovered from the CIR.
std::vector<double> hann_window(std::size_t m_f);
double coherent_gain(const std::vector<double>& window);

// h(s, t, r, tau) in C order [s][t][r][tau].
struct CirTensor {
    std::size_t n_snapshots = 0;
    std::size_t n_tx = 0;
    std::size_t n_rx = 0;
    std::size_t n_delay = 0;
    double delay_step_s = 0.0;
    double tone_spacing_hz = 0.0;
    double center_frequency_hz = 0.0;
    double bandwidth_hz = 0.0;
    int n_avg = 1;
    double noise_var = 0.0; // per tone after averaging
    bool saturated = false;
    std::string schedule_checksum;
    std::vector<double> window;
    CVec values;

    std::size_t offset(std::size_t s, std::size_t t, std::size_t r) const { return ((s * n_tx + t) * n_rx + r) * n_delay; }
    const cplx* cir(std::size_t s, std::size_t t, std::size_t r) const { return &values[offset(s, t, r)]; }
    cplx* cir(std::size_t s, std::size_t t, std::size_t r) { return &values[offset(s, t, r)]; }
    void validate() const;
    // Equalized, unwindowed transfer function over the tones.
    CVec frequency_response(std::size_t s, std::size_t t, std::size_t r) const;
};

// CIR of one windowed transfer vector: h[n] = (1/M) sum_k w_k H_k exp(j 2 pi k n / M).
CVec transfer_to_cir(const CVec& h_freq, const std::vector<double>& window);

// Expected delay-domain noise power per bin for per-tone variance noise_var.
double delay_noise_floor(double noise_var, const std::vector<double>& window);

CirTensor acquire(const channel::ChannelSynthesizer& channel, const schedule::SwitchSchedule& schedule,
                  const waveform::SoundingWaveform& waveform, const AcquisitionConfig& config, std::uint64_t seed);

// Squared magnitude of every sample, same layout as the tensor.
std::vector<double> pdp_tensor(const CirTensor& cir);

// Empty lists select everything along that axis.
struct PdpSelection {
    std::vector<std::size_t> snapshots;
    std::vector<std::size_t> tx;
    std::vector<std::size_t> rx;
};

// Mean of |h|^2 over the selected (s, t, r) triples, one value per delay bin.
std::vector<double> pdp(const CirTensor& cir, const PdpSelection& selection = {});

// Band-limited interpolation of one CIR onto delay steps of 1/factor bins.
CVec interpolate_cir(const CirTensor& cir, std::size_t s, std::size_t t, std::size_t r, std::size_t factor);

// Receive-side Bartlett spectrum sum_{s,t,tau,pol} |b^H h|^2 / |b|^2, normalized
// to its maximum. Layout [el][az].
struct PowerAngularSpectrum {
    std::vector<double> az_rad;
    std::vector<double> el_rad;
    std::vector<double> power;
};
PowerAngularSpectrum pas(const CirTensor& cir, const arrays::ArrayManifold& rx, const std::vector<double>& az_rad,
                         const std::vector<double>& el_rad);

// File formats: JSON header + cf32 payload, CSV exports.
void save_cir(const CirTensor& cir, const std::string& base_path);
CirTensor load_cir(const std::string& base_path);
std::string pdp_csv(const std::vector<double>& profile, double delay_step_s);
std::string pas_csv(const PowerAngularSpectrum& spectrum);

} // namespace mmsound::sounder
