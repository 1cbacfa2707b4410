// SPDX-License-Identifier: Apache-2.0
#include "mmsound/channel.hpp"
#include "mmsound/json_util.hpp"

namespace mmsound::channel {

using namespace jsonutil;

namespace {

AngularProfile angular_from(const json& j, const std::string& where)
{
    check_keys(j, {"mu_az_deg", "mu_el_deg", "kappa_az", "kappa_el", "amp_az", "amp_el"}, where);
    AngularProfile a;
    a.mu_az_rad = deg2rad(get_or(j, "mu_az_deg", 0.0));
    a.mu_el_rad = deg2rad(get_or(j, "mu_el_deg", 0.0));
    a.kappa_az = get_or(j, "kappa_az", 0.0);
    a.kappa_el = get_or(j, "kappa_el", 0.0);
    a.amp_az = get_or(j, "amp_az", 1.0);
    a.amp_el = get_or(j, "amp_el", 1.0);
    return a;
}

json angular_json(const AngularProfile& a)
{
    return {{"mu_az_deg", rad2deg(a.mu_az_rad)}, {"mu_el_deg", rad2deg(a.mu_el_rad)}, {"kappa_az", a.kappa_az},
            {"kappa_el", a.kappa_el},            {"amp_az", a.amp_az},                {"amp_el", a.amp_el}};
}

} // namespace

ChannelScene parse_scene_json(const std::string& text)
{
    const json j = parse(text, "scene");
    check_keys(j, {"carrier_hz", "tones", "frequencies_hz", "paths", "dense", "motion"}, "scene");
    ChannelScene s;
    s.carrier_hz = get_or(j, "carrier_hz", 28e9);
    require(!(j.contains("tones") && j.contains("frequencies_hz")), "scene: give either 'tones' or 'frequencies_hz'");
    if (j.contains("tones")) {
        const auto& t = j.at("tones");
        check_keys(t, {"n_tones", "spacing_hz"}, "scene.tones");
        s.frequencies_hz = tone_frequencies(get_req<std::size_t>(t, "n_tones", "scene.tones"),
                                            get_req<double>(t, "spacing_hz", "scene.tones"));
    } else {
        s.frequencies_hz = get_req<std::vector<double>>(j, "frequencies_hz", "scene");
    }
    if (j.contains("paths")) {
        require(j.at("paths").is_array(), "scene.paths: expected an array");
        for (std::size_t i = 0; i < j.at("paths").size(); ++i) {
            const auto& p = j.at("paths")[i];
            const std::string where = "scene.paths[" + std::to_string(i) + "]";
            check_keys(p, {"delay_ns", "aoa_az_deg", "aoa_el_deg", "aod_az_deg", "aod_el_deg", "gain", "doppler_hz"}, where);
            SpecularPath sp;
            sp.delay_s = get_req<double>(p, "delay_ns", where) * 1e-9;
            sp.aoa_az_rad = deg2rad(get_or(p, "aoa_az_deg", 0.0));
            sp.aoa_el_rad = deg2rad(get_or(p, "aoa_el_deg", 0.0));
            sp.aod_az_rad = deg2rad(get_or(p, "aod_az_deg", 0.0));
            sp.aod_el_rad = deg2rad(get_or(p, "aod_el_deg", 0.0));
            sp.doppler_hz = get_or(p, "doppler_hz", 0.0);
            require(p.contains("gain"), where + ": missing 'gain'");
            const auto& g = p.at("gain");
            require(g.is_array() && g.size() == 2 && g[0].is_array() && g[0].size() == 2 && g[1].is_array() && g[1].size() == 2,
                    where + ".gain: expected a 2x2 array of [re, im] pairs");
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    sp.gain(a, b) = complex_from(g[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)], where + ".gain");
            s.paths.push_back(sp);
        }
    }
    if (j.contains("dense")) {
        const auto& d = j.at("dense");
        check_keys(d, {"tau_d_ns", "beta_d", "gamma1", "rx", "tx", "noise_var"}, "scene.dense");
        s.dense.theta_f.tau_d_s = get_or(d, "tau_d_ns", 0.0) * 1e-9;
        s.dense.theta_f.beta_d = get_or(d, "beta_d", 0.05);
        s.dense.theta_f.gamma1 = get_or(d, "gamma1", 0.0);
        s.dense.noise_var = get_or(d, "noise_var", 0.0);
        if (d.contains("rx"))
            s.dense.theta_r = angular_from(d.at("rx"), "scene.dense.rx");
        if (d.contains("tx"))
            s.dense.theta_t = angular_from(d.at("tx"), "scene.dense.tx");
    }
    if (j.contains("motion")) {
        const auto& m = j.at("motion");
        check_keys(m, {"waypoints"}, "scene.motion");
        Trajectory tr;
        for (const auto& w : get_req<json>(m, "waypoints", "scene.motion")) {
            check_keys(w, {"t_s", "position_m"}, "scene.motion.waypoints");
            const auto pos = get_req<std::vector<double>>(w, "position_m", "scene.motion.waypoints");
            require(pos.size() == 3, "scene.motion.waypoints: position_m needs 3 components");
            tr.waypoints.push_back({get_req<double>(w, "t_s", "scene.motion.waypoints"), {pos[0], pos[1], pos[2]}});
        }
        s.motion = tr;
    }
    s.validate();
    return s;
}

std::string scene_json(const ChannelScene& s)
{
    json paths = json::array();
    for (const auto& p : s.paths) {
        json g = json::array();
        for (int a = 0; a < 2; ++a)
            g.push_back({complex_json(p.gain(a, 0)), complex_json(p.gain(a, 1))});
        paths.push_back({{"delay_ns", p.delay_s * 1e9},
                         {"aoa_az_deg", rad2deg(p.aoa_az_rad)},
                         {"aoa_el_deg", rad2deg(p.aoa_el_rad)},
                         {"aod_az_deg", rad2deg(p.aod_az_rad)},
                         {"aod_el_deg", rad2deg(p.aod_el_rad)},
                         {"gain", g},
                         {"doppler_hz", p.doppler_hz}});
    }
    json j = {{"carrier_hz", s.carrier_hz},
              {"frequencies_hz", s.frequencies_hz},
              {"paths", paths},
              {"dense",
               {{"tau_d_ns", s.dense.theta_f.tau_d_s * 1e9},
                {"beta_d", s.dense.theta_f.beta_d},
                {"gamma1", s.dense.theta_f.gamma1},
                {"noise_var", s.dense.noise_var},
                {"rx", angular_json(s.dense.theta_r)},
                {"tx", angular_json(s.dense.theta_t)}}}};
    if (s.motion) {
        json w = json::array();
        for (const auto& p : s.motion->waypoints)
            w.push_back({{"t_s", p.t_s}, {"position_m", {p.position_m.x(), p.position_m.y(), p.position_m.z()}}});
        j["motion"] = {{"waypoints", w}};
    }
    return j.dump(2);
}

} // namespace mmsound::channel
