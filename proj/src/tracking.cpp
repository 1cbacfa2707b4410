// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "mmsound/estimation.hpp"
#include "mmsound/json_util.hpp"

namespace mmsound::estimation {

namespace {

struct Track {
    int id;
    std::vector<TrackPoint> points;
    bool alive = true;

    // Constant-velocity prediction from the last two points.
    std::pair<double, double> predict() const
    {
        const auto& a = points.back();
        if (points.size() < 2)
            return {a.delay_ns, a.az_deg};
        const auto& b = points[points.size() - 2];
        const double steps = static_cast<double>(a.snapshot - b.snapshot);
        return {a.delay_ns + (a.delay_ns - b.delay_ns) / steps, a.az_deg + (a.az_deg - b.az_deg) / steps};
    }
};

double az_diff_deg(double a, double b) { return rad2deg(wrap_pi(deg2rad(a - b))); }

} // namespace

TrackingResult track_aoa(const std::vector<TimedPaths>& snapshots, const TrackingConfig& cfg)
{
    require(cfg.gate_delay_ns > 0.0 && cfg.gate_az_deg > 0.0, "tracking: gates must be positive");
    require(cfg.cutoff_db >= 0.0, "tracking: cutoff must be >= 0 dB");
    TrackingResult out;
    std::vector<Track> tracks;

    for (std::size_t s = 0; s < snapshots.size(); ++s) {
        const auto& snap = snapshots[s];
        double pmax = 0.0;
        for (const auto& p : snap.paths)
            pmax = std::max(pmax, p.power());
        std::vector<TrackPoint> obs;
        for (const auto& p : snap.paths) {
            if (p.power() <= 0.0 || 10.0 * std::log10(p.power() / pmax) < -cfg.cutoff_db)
                continue;
            obs.push_back({snap.time_s, -1, s, rad2deg(p.aoa_az_rad), rad2deg(p.aoa_el_rad), p.delay_s * 1e9,
                           10.0 * std::log10(p.power())});
        }

        // Greedy nearest-neighbour association in ascending gated distance.
        struct Pair {
            double d;
            std::size_t track, obs;
        };
        std::vector<Pair> pairs;
        for (std::size_t t = 0; t < tracks.size(); ++t) {
            if (!tracks[t].alive)
                continue;
            const auto [pd, pa] = tracks[t].predict();
            for (std::size_t o = 0; o < obs.size(); ++o) {
                const double dd = (obs[o].delay_ns - pd) / cfg.gate_delay_ns;
                const double da = az_diff_deg(obs[o].az_deg, pa) / cfg.gate_az_deg;
                const double d = std::hypot(dd, da);
                if (d <= 1.0)
                    pairs.push_back({d, t, o});
            }
        }
        std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
        std::vector<bool> track_used(tracks.size(), false), obs_used(obs.size(), false);
        for (const auto& pr : pairs) {
            if (track_used[pr.track] || obs_used[pr.obs])
                continue;
            track_used[pr.track] = obs_used[pr.obs] = true;
            obs[pr.obs].track_id = tracks[pr.track].id;
            tracks[pr.track].points.push_back(obs[pr.obs]);
        }
        for (std::size_t t = 0; t < tracks.size(); ++t)
            if (tracks[t].alive && !track_used[t]) {
                tracks[t].alive = false;
                out.events.push_back({TrackEvent::Kind::Disappear, tracks[t].id, tracks[t].points.back().snapshot});
            }
        for (std::size_t o = 0; o < obs.size(); ++o)
            if (!obs_used[o]) {
                Track tr{out.n_tracks++, {}, true};
                obs[o].track_id = tr.id;
                tr.points.push_back(obs[o]);
                tracks.push_back(tr);
                out.events.push_back({TrackEvent::Kind::Appear, tr.id, s});
            }
        for (const auto& o : obs)
            out.points.push_back(o);
    }
    return out;
}

std::string tracks_csv(const TrackingResult& tracks)
{
    std::ostringstream os;
    os << std::setprecision(10) << "time_s,track_id,az_deg,el_deg,delay_ns,power_db\n";
    for (const auto& p : tracks.points)
        os << p.time_s << ',' << p.track_id << ',' << p.az_deg << ',' << p.el_deg << ',' << p.delay_ns << ',' << p.power_db << '\n';
    return os.str();
}

std::string result_json(const EstimationResult& r, const DenseFit* dense)
{
    using jsonutil::json;
    json paths = json::array();
    for (std::size_t i = 0; i < r.paths.size(); ++i) {
        const auto& p = r.paths[i];
        json g = json::array();
        for (int a = 0; a < 2; ++a)
            g.push_back({jsonutil::complex_json(p.gain(a, 0)), jsonutil::complex_json(p.gain(a, 1))});
        paths.push_back({{"delay_ns", p.delay_s * 1e9},
                         {"aoa_az_deg", rad2deg(p.aoa_az_rad)},
                         {"aoa_el_deg", rad2deg(p.aoa_el_rad)},
                         {"aod_az_deg", rad2deg(p.aod_az_rad)},
                         {"aod_el_deg", rad2deg(p.aod_el_rad)},
                         {"doppler_hz", p.doppler_hz},
                         {"gain", g},
                         {"power_db", p.power() > 0.0 ? 10.0 * std::log10(p.power()) : -400.0},
                         {"improvement", r.improvement[i]}});
    }
    json j = {{"paths", paths},
              {"noise_var_est", r.noise_var_est},
              {"log_likelihood", r.log_likelihood},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"residual_history", r.residual_history},
              {"diagnostic", r.diagnostic}};
    if (dense) {
        const auto& d = dense->profile;
        auto ang = [](const channel::AngularProfile& a) {
            return json{{"mu_az_deg", rad2deg(a.mu_az_rad)}, {"mu_el_deg", rad2deg(a.mu_el_rad)}, {"kappa_az", a.kappa_az},
                        {"kappa_el", a.kappa_el},            {"amp_az", a.amp_az},                {"amp_el", a.amp_el}};
        };
        j["dense"] = {{"tau_d_ns", d.theta_f.tau_d_s * 1e9}, {"beta_d", d.theta_f.beta_d}, {"gamma1", d.theta_f.gamma1},
                      {"noise_var", d.noise_var},            {"rx", ang(d.theta_r)},      {"tx", ang(d.theta_t)},
                      {"noise_only", dense->noise_only},     {"diagnostic", dense->diagnostic}};
    }
    return j.dump(2);
}

} // namespace mmsound::estimation
