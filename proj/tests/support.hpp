// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "mmsound/arrays.hpp"
#include "mmsound/channel.hpp"
#include "mmsound/schedule.hpp"
#include "mmsound/sounder.hpp"
#include "mmsound/waveform.hpp"

namespace testing {

using namespace mmsound;

inline constexpr double kCarrier = 28e9;
inline constexpr double kToneSpacing = 500e3;

// 2x2 dual-polarized panel (8 feeds) with the default element pattern.
inline arrays::ArrayManifold desk_manifold(double max_error_db = -60.0, int rows = 2, int cols = 2, bool dual = true)
{
    const auto g = arrays::ArrayGeometry::upa(rows, cols, kSpeedOfLight / kCarrier / 2.0, dual);
    const auto grid = arrays::synth_pattern(85.0, 50.0, 20.0, g, {kCarrier});
    const auto fov = arrays::default_fov(g);
    return arrays::ArrayManifold(arrays::compute_eadf(grid, arrays::Truncation::bound(max_error_db)), kCarrier, fov.first, fov.second);
}

// Single isotropic element at the origin.
inline arrays::ArrayManifold iso_manifold()
{
    const auto g = arrays::ArrayGeometry::single();
    const auto grid = arrays::synth_pattern(arrays::kIsotropicHpbwDeg, arrays::kIsotropicHpbwDeg, 200.0, g, {kCarrier});
    return arrays::ArrayManifold(arrays::compute_eadf(grid, arrays::Truncation::full()), kCarrier);
}

inline channel::SpecularPath make_path(double tau_ns, double aoa_az_deg, double aoa_el_deg, double aod_az_deg, double aod_el_deg,
                                       cplx g_vv, double nu_hz = 0.0)
{
    channel::SpecularPath p;
    p.delay_s = tau_ns * 1e-9;
    p.aoa_az_rad = deg2rad(aoa_az_deg);
    p.aoa_el_rad = deg2rad(aoa_el_deg);
    p.aod_az_rad = deg2rad(aod_az_deg);
    p.aod_el_rad = deg2rad(aod_el_deg);
    p.gain = Eigen::Matrix2cd::Zero();
    p.gain(0, 0) = 0.8 * g_vv;
    p.gain(1, 1) = g_vv;
    p.gain(0, 1) = 0.05 * g_vv;
    p.doppler_hz = nu_hz;
    return p;
}

inline channel::ChannelScene make_scene(std::vector<channel::SpecularPath> paths, std::size_t m_f = 256)
{
    channel::ChannelScene s;
    s.paths = std::move(paths);
    s.frequencies_hz = channel::tone_frequencies(m_f, kToneSpacing);
    s.carrier_hz = kCarrier;
    return s;
}

inline waveform::SoundingWaveform comb(std::size_t m_f)
{
    waveform::ToneGrid g;
    g.n_tones = m_f;
    g.tone_spacing_hz = kToneSpacing;
    return waveform::gen_multitone(g, 2, waveform::PhaseRule::quadratic());
}

inline schedule::SwitchSchedule desk_schedule(std::uint64_t seed, schedule::SwitchMode mode, int n_tx = 8, int n_rx = 8,
                                              bool dual = true)
{
    return schedule::snapshot_timing(schedule::gen_codebook(seed, n_tx, n_rx, dual, mode), schedule::FrameSpec{});
}

// Fresh scratch directory under the system temp path.
inline std::string scratch_dir(const std::string& name)
{
    const auto p = std::filesystem::temp_directory_path() / ("mmsound_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

} // namespace testing
