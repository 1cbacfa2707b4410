// SPDX-License-Identifier: Apache-2.0
#include "mmsound/channel.hpp"

#include <algorithm>
#include <cmath>

#include "mmsound/parallel.hpp"
#include "mmsound/rng.hpp"

namespace mmsound::channel {

void SpecularPath::validate() const
{
    require(std::isfinite(delay_s) && delay_s >= 0.0, "path: delay must be finite and >= 0");
    for (double az : {aoa_az_rad, aod_az_rad})
        require(std::isfinite(az) && az >= -kPi && az <= kPi, "path: azimuth must lie in [-pi, pi]");
    for (double el : {aoa_el_rad, aod_el_rad})
        require(std::isfinite(el) && el >= -kPi / 2 && el <= kPi / 2, "path: elevation must lie in [-pi/2, pi/2]");
    require(gain.allFinite(), "path: gain must be finite");
    require(std::isfinite(doppler_hz), "path: Doppler must be finite");
}

void DenseProfile::validate() const
{
    require(theta_f.beta_d > 0.0, "dense: beta_d must be > 0");
    require(theta_f.gamma1 >= 0.0, "dense: gamma1 must be >= 0");
    require(std::isfinite(theta_f.tau_d_s) && theta_f.tau_d_s >= 0.0, "dense: tau_d must be finite and >= 0");
    for (const auto* a : {&theta_r, &theta_t}) {
        require(a->kappa_az >= 0.0 && a->kappa_el >= 0.0, "dense: kappa must be >= 0");
        require(a->amp_az >= 0.0 && a->amp_el >= 0.0, "dense: angular amplitudes must be >= 0");
    }
    require(noise_var >= 0.0, "dense: noise variance must be >= 0");
}

void Trajectory::validate() const
{
    require(!waypoints.empty(), "motion: at least one waypoint required");
    for (std::size_t i = 1; i < waypoints.size(); ++i)
        require(waypoints[i].t_s > waypoints[i - 1].t_s, "motion: waypoint times must increase");
    for (const auto& w : waypoints)
        require(w.position_m.allFinite() && std::isfinite(w.t_s), "motion: non-finite waypoint");
}

Eigen::Vector3d Trajectory::displacement(double t_s) const
{
    const auto& w = waypoints;
    if (t_s <= w.front().t_s)
        return Eigen::Vector3d::Zero();
    if (t_s >= w.back().t_s)
        return w.back().position_m - w.front().position_m;
    const auto it = std::upper_bound(w.begin(), w.end(), t_s, [](double t, const Waypoint& p) { return t < p.t_s; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double u = (t_s - a.t_s) / (b.t_s - a.t_s);
    return a.position_m + u * (b.position_m - a.position_m) - w.front().position_m;
}

Eigen::Vector3d Trajectory::velocity(double t_s) const
{
    const auto& w = waypoints;
    if (w.size() < 2 || t_s < w.front().t_s || t_s >= w.back().t_s)
        return Eigen::Vector3d::Zero();
    const auto it = std::upper_bound(w.begin(), w.end(), t_s, [](double t, const Waypoint& p) { return t < p.t_s; });
    return (it->position_m - (it - 1)->position_m) / (it->t_s - (it - 1)->t_s);
}

void ChannelScene::validate() const
{
    require(!frequencies_hz.empty(), "scene: at least one tone required");
    require(carrier_hz > 0.0, "scene: carrier must be positive");
    for (const auto& p : paths)
        p.validate();
    dense.validate();
    if (motion)
        motion->validate();
    if (dense.has_dense_power())
        require(frequencies_hz.size() >= 2, "scene: dense profile needs at least two tones");
}

double ChannelScene::tone_spacing_hz() const
{
    require(frequencies_hz.size() >= 2, "scene: tone spacing needs at least two tones");
    return frequencies_hz[1] - frequencies_hz[0];
}

std::vector<double> tone_frequencies(std::size_t m_f, double spacing_hz)
{
    require(m_f >= 1 && spacing_hz > 0.0, "tone grid: need m_f >= 1 and positive spacing");
    std::vector<double> f(m_f);
    const auto half = static_cast<double>(m_f / 2);
    for (std::size_t k = 0; k < m_f; ++k)
        f[k] = (static_cast<double>(k) - half) * spacing_hz;
    return f;
}

Eigen::Vector3d direction(double az_rad, double el_rad)
{
    return {std::cos(el_rad) * std::cos(az_rad), std::cos(el_rad) * std::sin(az_rad), std::sin(el_rad)};
}

double motion_doppler_hz(const Trajectory& motion, double aoa_az_rad, double aoa_el_rad, double carrier_hz, double t_s)
{
    return motion.velocity(t_s).dot(direction(aoa_az_rad, aoa_el_rad)) * carrier_hz / kSpeedOfLight;
}

Eigen::MatrixXcd path_spatial_matrix(const SpecularPath& path, const arrays::ArrayManifold& tx,
                                     const arrays::ArrayManifold& rx)
{
    require(rx.in_fov(path.aoa_az_rad), "path AOA azimuth is outside the rx manifold coverage");
    require(tx.in_fov(path.aod_az_rad), "path AOD azimuth is outside the tx manifold coverage");
    const Eigen::MatrixXcd br = rx.response(path.aoa_az_rad, path.aoa_el_rad);
    const Eigen::MatrixXcd bt = tx.response(path.aod_az_rad, path.aod_el_rad);
    return br * path.gain * bt.transpose();
}

namespace {

// Delay and extra carrier phase of a path at time t under receiver motion.
void path_state(const SpecularPath& p, const std::optional<Trajectory>& motion, double carrier_hz, double t_s,
                double& delay_s, double& phase_rad)
{
    delay_s = p.delay_s;
    phase_rad = kTwoPi * p.doppler_hz * t_s;
    if (motion) {
        const double shift = motion->displacement(t_s).dot(direction(p.aoa_az_rad, p.aoa_el_rad));
        delay_s -= shift / kSpeedOfLight;
        phase_rad += kTwoPi * shift * carrier_hz / kSpeedOfLight;
    }
}

} // namespace

CVec specular_response(const std::vector<SpecularPath>& paths, const arrays::ArrayManifold& tx,
                       const arrays::ArrayManifold& rx, const std::vector<double>& frequencies_hz, double time_s)
{
    const std::size_t mt = tx.size(), mr = rx.size(), mf = frequencies_hz.size();
    CVec out(mr * mt * mf, cplx{});
    for (const auto& p : paths) {
        p.validate();
        const Eigen::MatrixXcd s = path_spatial_matrix(p, tx, rx);
        const cplx rot = std::polar(1.0, kTwoPi * p.doppler_hz * time_s);
        for (std::size_t r = 0; r < mr; ++r)
            for (std::size_t t = 0; t < mt; ++t) {
                const cplx a = s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) * rot;
                cplx* o = &out[(r * mt + t) * mf];
                for (std::size_t f = 0; f < mf; ++f)
                    o[f] += a * std::polar(1.0, -kTwoPi * frequencies_hz[f] * p.delay_s);
            }
    }
    return out;
}

ChannelSynthesizer::ChannelSynthesizer(ChannelScene scene, arrays::ArrayManifold tx, arrays::ArrayManifold rx,
                                       const arrays::AngleGrid& dense_grid)
    : scene_(std::move(scene)), tx_(std::move(tx)), rx_(std::move(rx))
{
    scene_.validate();
    for (const auto& p : scene_.paths)
        spatial_.push_back(path_spatial_matrix(p, tx_, rx_));
    if (scene_.dense.has_dense_power())
        covariance_ = dense_covariance(scene_.dense, tx_, rx_, scene_.frequencies_hz.size(), scene_.tone_spacing_hz(),
                                       dense_grid);
}

void ChannelSynthesizer::specular_entry(int tx, int rx, double time_s, cplx* out) const
{
    const std::size_t mf = scene_.frequencies_hz.size();
    std::fill(out, out + mf, cplx{});
    for (std::size_t l = 0; l < scene_.paths.size(); ++l) {
        double delay = 0.0, phase = 0.0;
        path_state(scene_.paths[l], scene_.motion, scene_.carrier_hz, time_s, delay, phase);
        const cplx a = spatial_[l](rx, tx) * std::polar(1.0, phase);
        for (std::size_t f = 0; f < mf; ++f)
            out[f] += a * std::polar(1.0, -kTwoPi * scene_.frequencies_hz[f] * delay);
    }
}

SnapshotRealization ChannelSynthesizer::realize(const schedule::SwitchSchedule& schedule, std::size_t snapshot,
                                                std::uint64_t seed) const
{
    const auto& cb = schedule.codebook;
    require(static_cast<std::size_t>(cb.n_tx) == tx_.size() && static_cast<std::size_t>(cb.n_rx) == rx_.size(),
            "realize: schedule size " + std::to_string(cb.n_tx) + "x" + std::to_string(cb.n_rx) +
                " does not match the arrays " + std::to_string(tx_.size()) + "x" + std::to_string(rx_.size()));
    const std::size_t mf = scene_.frequencies_hz.size();
    SnapshotRealization out;
    out.n_entries = schedule.size();
    out.m_f = mf;
    out.values.assign(out.n_entries * mf, cplx{});

    CVec dense;
    if (covariance_)
        dense = covariance_->sample(seed, {snapshot, static_cast<std::uint64_t>(Purpose::Dense)});
    const double nv = scene_.dense.noise_var;
    const std::size_t mt = tx_.size();

    parallel_for(out.n_entries, [&](std::size_t e) {
        const auto& en = cb.entries[e];
        cplx* o = &out.values[e * mf];
        specular_entry(en.tx, en.rx, schedule.entry_time_s(snapshot, e), o);
        if (!dense.empty()) {
            const cplx* d = &dense[(static_cast<std::size_t>(en.rx) * mt + static_cast<std::size_t>(en.tx)) * mf];
            for (std::size_t f = 0; f < mf; ++f)
                o[f] += d[f];
        }
        if (nv > 0.0) {
            RandomStream rs(seed, {snapshot, static_cast<std::uint64_t>(Purpose::SceneNoise), e});
            for (std::size_t f = 0; f < mf; ++f)
                o[f] += rs.complex_normal(nv);
        }
    });
    return out;
}

SnapshotRealization realize_snapshot(const ChannelScene& scene, const schedule::SwitchSchedule& schedule,
                                     const arrays::ArrayManifold& tx, const arrays::ArrayManifold& rx,
                                     std::size_t snapshot, std::uint64_t seed)
{
    return ChannelSynthesizer(scene, tx, rx).realize(schedule, snapshot, seed);
}

} // namespace mmsound::channel
