// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <numeric>

#include "mmsound/binary_io.hpp"
#include "mmsound/channel.hpp"
#include "mmsound/cli.hpp"
#include "mmsound/estimation.hpp"
#include "mmsound/json_util.hpp"
#include "mmsound/sounder.hpp"
#include "mmsound/waveform.hpp"

namespace mmsound::cli {

namespace fs = std::filesystem;
using namespace jsonutil;

namespace {

constexpr double kReferencePaprDb = 0.349;

std::uint64_t effective_seed(const Config& cfg, const Options& opt)
{
    if (opt.seed)
        return *opt.seed;
    return get_or<std::uint64_t>(cfg.doc, "seed", 1);
}

std::string out_path(const Options& opt, const std::string& name) { return (fs::path(opt.out_dir) / name).string(); }

Options with_seed(Options opt, std::uint64_t seed)
{
    opt.seed = seed;
    return opt;
}

schedule::SwitchSchedule schedule_from(const json& j, int n_tx, int n_rx, bool dual_pol, std::uint64_t seed)
{
    check_keys(j, {"mode", "frame"}, "schedule");
    const auto mode = schedule::parse_switch_mode(get_or<std::string>(j, "mode", "pseudo_random"));
    const auto frame = frame_from_json(get_or(j, "frame", json::object()));
    return schedule::snapshot_timing(schedule::gen_codebook(seed, n_tx, n_rx, dual_pol, mode), frame);
}

bool is_dual_pol(const arrays::ArrayGeometry& g)
{
    return g.size() >= 2 && g.size() % 2 == 0 && g.feed_pol[0] == schedule::Polarization::H && g.feed_pol[1] == schedule::Polarization::V &&
           g.element_positions[0] == g.element_positions[1];
}

// Everything simulate and estimate share: scene, arrays, manifolds.
struct SimulationSetup {
    channel::ChannelScene scene;
    ArraySetup tx, rx;
    arrays::ArrayManifold tx_manifold, rx_manifold;
    std::string prefix;
};

SimulationSetup simulation_setup(const Config& cfg)
{
    const auto& d = cfg.doc;
    check_keys(d, {"seed", "scene", "tx", "rx", "schedule", "n_snapshots", "noise", "lo_phase_max_deg", "waveform", "pas", "output_prefix"},
               "simulate config");
    SimulationSetup s;
    s.scene = channel::parse_scene_json(io::read_text(cfg.resolve(get_req<std::string>(d, "scene", "simulate config"))));
    s.tx = build_array(get_or(d, "tx", json::object()), s.scene.carrier_hz, cfg);
    s.rx = build_array(get_or(d, "rx", json::object()), s.scene.carrier_hz, cfg);
    const auto ftx = arrays::default_fov(s.tx.geometry);
    const auto frx = arrays::default_fov(s.rx.geometry);
    s.tx_manifold = arrays::ArrayManifold(s.tx.eadf, s.scene.carrier_hz, ftx.first, ftx.second);
    s.rx_manifold = arrays::ArrayManifold(s.rx.eadf, s.scene.carrier_hz, frx.first, frx.second);
    s.prefix = get_or<std::string>(d, "output_prefix", "sim");
    return s;
}

sounder::NoiseConfig noise_from(const json& j)
{
    check_keys(j, {"snr_db", "pathloss_db", "budget"}, "noise");
    require(!(j.contains("snr_db") && j.contains("pathloss_db")), "noise: give either snr_db or pathloss_db");
    if (j.contains("snr_db"))
        return sounder::NoiseConfig::from_snr(get_req<double>(j, "snr_db", "noise"));
    if (j.contains("pathloss_db")) {
        sounder::LinkBudget b;
        const json bj = get_or(j, "budget", json::object());
        check_keys(bj, {"noise_figure_db", "bandwidth_hz", "eirp_dbm", "rx_array_gain_db", "saturation_dbm"}, "noise.budget");
        b.noise_figure_db = get_or(bj, "noise_figure_db", b.noise_figure_db);
        b.bandwidth_hz = get_or(bj, "bandwidth_hz", b.bandwidth_hz);
        b.eirp_dbm = get_or(bj, "eirp_dbm", b.eirp_dbm);
        b.rx_array_gain_db = get_or(bj, "rx_array_gain_db", b.rx_array_gain_db);
        b.saturation_dbm = get_or(bj, "saturation_dbm", b.saturation_dbm);
        return sounder::NoiseConfig::physical(b, get_req<double>(j, "pathloss_db", "noise"));
    }
    return sounder::NoiseConfig::none();
}

std::vector<double> angle_axis(double lo_deg, double hi_deg, double step_deg)
{
    require(step_deg > 0.0 && hi_deg >= lo_deg, "angle axis: invalid range");
    std::vector<double> v;
    const auto n = static_cast<long>(std::floor((hi_deg - lo_deg) / step_deg + 1e-9));
    for (long i = 0; i <= n; ++i)
        v.push_back(deg2rad(lo_deg + step_deg * static_cast<double>(i)));
    return v;
}

std::string fmt(double v, int prec = 6)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

} // namespace

int cmd_waveform(const Config& cfg, const Options& opt, std::ostream& out)
{
    const auto& d = cfg.doc;
    check_keys(d, {"n_tones", "tone_spacing_hz", "center_offset_hz", "oversampling", "phase_rule", "root", "output"}, "waveform config");
    waveform::ToneGrid grid;
    grid.n_tones = get_or<std::size_t>(d, "n_tones", grid.n_tones);
    grid.tone_spacing_hz = get_or(d, "tone_spacing_hz", grid.tone_spacing_hz);
    grid.center_offset_hz = get_or(d, "center_offset_hz", grid.center_offset_hz);
    const unsigned oversampling = get_or(d, "oversampling", 4u);
    const auto rule = waveform::PhaseRule::parse(get_or<std::string>(d, "phase_rule", "zadoff_chu_refined"), get_or(d, "root", 1u));
    const auto w = waveform::gen_multitone(grid, oversampling, rule);
    const std::string base = out_path(opt, get_or<std::string>(d, "output", "waveform"));
    waveform::export_waveform(w, base);
    const double papr = waveform::papr_db(w);
    const json report = {{"papr_db", papr},
                         {"reference_papr_db", kReferencePaprDb},
                         {"flatness_db", waveform::spectrum_flatness_db(w)},
                         {"n_samples", w.samples.size()},
                         {"sample_rate_hz", w.sample_rate_hz},
                         {"phase_rule", w.phase_rule}};
    io::write_text(base + "_report.json", report.dump(2) + "\n");
    out << "PAPR " << fmt(papr, 4) << " dB (reference " << kReferencePaprDb << " dB)\n";
    write_manifest("waveform", opt, cfg, {base + ".bin", base + ".json", base + "_report.json"});
    return kOk;
}

int cmd_codebook(const Config& cfg, const Options& opt, std::ostream& out)
{
    const auto& d = cfg.doc;
    check_keys(d, {"seed", "n_tx", "n_rx", "dual_pol", "mode", "frame", "output"}, "codebook config");
    const std::uint64_t seed = effective_seed(cfg, opt);
    const auto mode = schedule::parse_switch_mode(get_or<std::string>(d, "mode", "pseudo_random"));
    const auto cb = schedule::gen_codebook(seed, get_or(d, "n_tx", 128), get_or(d, "n_rx", 256), get_or(d, "dual_pol", true), mode);
    const auto sched = schedule::snapshot_timing(cb, frame_from_json(get_or(d, "frame", json::object())));
    const std::string path = out_path(opt, get_or<std::string>(d, "output", "codebook.json"));
    io::write_text(path, schedule::codebook_json(sched));
    out << "entries " << sched.size() << ", frame " << sched.frame.frame_duration_ns() << " ns, snapshot "
        << sched.snapshot_duration_ns << " ns\n";
    write_manifest("codebook", with_seed(opt, seed), cfg, {path});
    return kOk;
}

int cmd_budget(const Config& cfg, const Options& opt, std::ostream& out)
{
    const auto& d = cfg.doc;
    check_keys(d, {"noise_figure_db", "bandwidth_hz", "eirp_dbm", "rx_array_gain_db", "saturation_dbm", "output"}, "budget config");
    sounder::LinkBudget b;
    b.noise_figure_db = get_or(d, "noise_figure_db", b.noise_figure_db);
    b.bandwidth_hz = get_or(d, "bandwidth_hz", b.bandwidth_hz);
    b.eirp_dbm = get_or(d, "eirp_dbm", b.eirp_dbm);
    b.rx_array_gain_db = get_or(d, "rx_array_gain_db", b.rx_array_gain_db);
    b.saturation_dbm = get_or(d, "saturation_dbm", b.saturation_dbm);
    const auto r = sounder::link_budget_report(b);
    const json report = {{"sensitivity_dbm", r.sensitivity_dbm},
                         {"isotropic_sensitivity_dbm", r.isotropic_sensitivity_dbm},
                         {"max_pathloss_db", r.max_pathloss_db},
                         {"dynamic_range_db", r.dynamic_range_db},
                         {"inputs",
                          {{"noise_figure_db", b.noise_figure_db},
                           {"bandwidth_hz", b.bandwidth_hz},
                           {"eirp_dbm", b.eirp_dbm},
                           {"rx_array_gain_db", b.rx_array_gain_db},
                           {"saturation_dbm", b.saturation_dbm}}}};
    const std::string path = out_path(opt, get_or<std::string>(d, "output", "budget.json"));
    io::write_text(path, report.dump(2) + "\n");
    out << report.dump(2) << "\n";
    write_manifest("budget", opt, cfg, {path});
    return kOk;
}

int cmd_ambiguity(const Config& cfg, const Options& opt, std::ostream& out)
{
    const auto& d = cfg.doc;
    check_keys(d, {"seed", "n_tx", "n_rx", "dual_pol", "mode", "frame", "n_seeds", "output_prefix"}, "ambiguity config");
    const std::uint64_t seed = effective_seed(cfg, opt);
    const auto mode = schedule::parse_switch_mode(get_or<std::string>(d, "mode", "pseudo_random"));
    const int n_tx = get_or(d, "n_tx", 8), n_rx = get_or(d, "n_rx", 8);
    const bool dual = get_or(d, "dual_pol", false);
    const auto frame = frame_from_json(get_or(d, "frame", json::object()));
    const int n_seeds = mode == schedule::SwitchMode::Sequential ? 1 : get_or(d, "n_seeds", 1);
    require(n_seeds >= 1, "ambiguity: n_seeds must be >= 1");
    const std::string prefix = get_or<std::string>(d, "output_prefix", "ambiguity");

    json per_seed = json::array();
    double sum = 0.0;
    std::string csv;
    for (int i = 0; i < n_seeds; ++i) {
        const auto sched = schedule::snapshot_timing(schedule::gen_codebook(seed + static_cast<std::uint64_t>(i), n_tx, n_rx, dual, mode), frame);
        const auto af = estimation::doppler_ambiguity(sched, estimation::default_doppler_grid(sched));
        const double mainlobe = 1.0 / sched.snapshot_duration_s();
        const double sl = af.max_sidelobe(mainlobe);
        sum += sl;
        per_seed.push_back({{"seed", seed + static_cast<std::uint64_t>(i)}, {"max_sidelobe", sl}, {"at_hz", af.sidelobe_location_hz(mainlobe)}});
        if (i == 0)
            csv = estimation::ambiguity_csv(af);
    }
    const std::string csv_path = out_path(opt, prefix + "_" + schedule::to_string(mode) + ".csv");
    const std::string json_path = out_path(opt, prefix + "_" + schedule::to_string(mode) + ".json");
    io::write_text(csv_path, csv);
    const json summary = {{"mode", schedule::to_string(mode)}, {"mean_max_sidelobe", sum / n_seeds}, {"per_seed", per_seed}};
    io::write_text(json_path, summary.dump(2) + "\n");
    out << "mean max sidelobe " << fmt(sum / n_seeds, 4) << " over " << n_seeds << " seed(s)\n";
    write_manifest("ambiguity", with_seed(opt, seed), cfg, {csv_path, json_path});
    return kOk;
}

int cmd_simulate(const Config& cfg, const Options& opt, std::ostream& out)
{
    const auto& d = cfg.doc;
    const std::uint64_t seed = effective_seed(cfg, opt);
    auto setup = simulation_setup(cfg);
    const auto& scene = setup.scene;
    const auto sched = schedule_from(get_or(d, "schedule", json::object()), static_cast<int>(setup.tx.geometry.size()),
                                     static_cast<int>(setup.rx.geometry.size()), is_dual_pol(setup.rx.geometry), seed);

    const json wj = get_or(d, "waveform", json::object());
    check_keys(wj, {"phase_rule", "oversampling", "root"}, "waveform");
    waveform::ToneGrid grid;
    grid.n_tones = scene.frequencies_hz.size();
    grid.tone_spacing_hz = scene.tone_spacing_hz();
    const auto wf = waveform::gen_multitone(grid, get_or(wj, "oversampling", 4u),
                                            waveform::PhaseRule::parse(get_or<std::string>(wj, "phase_rule", "zadoff_chu_quadratic"),
                                                                       get_or(wj, "root", 1u)));

    sounder::AcquisitionConfig acq;
    acq.noise = noise_from(get_or(d, "noise", json::object()));
    acq.n_snapshots = get_or<std::size_t>(d, "n_snapshots", 1);
    acq.lo_phase_max_rad = deg2rad(get_or(d, "lo_phase_max_deg", 0.0));
    const channel::ChannelSynthesizer synth(scene, setup.tx_manifold, setup.rx_manifold);
    const auto cir = sounder::acquire(synth, sched, wf, acq, seed);

    const std::string base = out_path(opt, setup.prefix);
    sounder::save_cir(cir, base + "_cir");
    io::write_text(base + "_codebook.json", schedule::codebook_json(sched));
    const auto profile = sounder::pdp(cir);
    io::write_text(base + "_pdp.csv", sounder::pdp_csv(profile, cir.delay_step_s));

    const json pj = get_or(d, "pas", json::object());
    check_keys(pj, {"az_step_deg", "el_step_deg", "el_min_deg", "el_max_deg"}, "pas");
    const double az_step = get_or(pj, "az_step_deg", 2.0);
    const auto fov = arrays::default_fov(setup.rx.geometry);
    const double az_lo = rad2deg(fov.first);
    const double az_hi = rad2deg(fov.second) - (fov.second - fov.first >= kTwoPi - 1e-9 ? az_step : 0.0);
    const auto spectrum = sounder::pas(cir, setup.rx_manifold, angle_axis(az_lo, az_hi, az_step),
                                       angle_axis(get_or(pj, "el_min_deg", -60.0), get_or(pj, "el_max_deg", 60.0), get_or(pj, "el_step_deg", 5.0)));
    io::write_text(base + "_pas.csv", sounder::pas_csv(spectrum));

    const std::size_t peak = static_cast<std::size_t>(std::max_element(profile.begin(), profile.end()) - profile.begin());
    const json summary = {{"seed", seed},
                          {"n_snapshots", cir.n_snapshots},
                          {"n_tx", cir.n_tx},
                          {"n_rx", cir.n_rx},
                          {"n_delay", cir.n_delay},
                          {"delay_step_ns", cir.delay_step_s * 1e9},
                          {"pdp_peak_delay_ns", static_cast<double>(peak) * cir.delay_step_s * 1e9},
                          {"coherent_gain", sounder::coherent_gain(cir.window)},
                          {"expected_noise_floor", sounder::delay_noise_floor(cir.noise_var, cir.window)},
                          {"saturated", cir.saturated},
                          {"schedule_checksum", cir.schedule_checksum}};
    io::write_text(base + "_summary.json", summary.dump(2) + "\n");
    if (cir.saturated)
        out << "warning: received power exceeds the saturation level\n";
    out << "PDP peak at " << fmt(static_cast<double>(peak) * cir.delay_step_s * 1e9, 4) << " ns\n";
    write_manifest("simulate", with_seed(opt, seed), cfg,
                   {base + "_cir.json", base + "_cir.bin", base + "_codebook.json", base + "_pdp.csv", base + "_pas.csv", base + "_summary.json"});
    return kOk;
}

namespace {

estimation::Observation snapshot_slice(const estimation::Observation& o, std::size_t s)
{
    estimation::Observation r = o;
    r.n_snapshots = 1;
    r.times_s.assign(o.times_s.begin() + static_cast<std::ptrdiff_t>(s * o.n_entries),
                     o.times_s.begin() + static_cast<std::ptrdiff_t>((s + 1) * o.n_entries));
    const std::size_t len = o.n_entries * o.m_f();
    r.values.assign(o.values.begin() + static_cast<std::ptrdiff_t>(s * len), o.values.begin() + static_cast<std::ptrdiff_t>((s + 1) * len));
    return r;
}

estimation::SpecularConfig specular_from(const json& j)
{
    check_keys(j, {"max_paths", "margin_db", "az_step_deg", "el_step_deg", "el_min_deg", "el_max_deg", "doppler_max_hz", "max_iterations", "max_tones"},
               "specular");
    estimation::SpecularConfig c;
    c.max_paths = get_or(j, "max_paths", c.max_paths);
    c.margin_db = get_or(j, "margin_db", c.margin_db);
    c.az_step_deg = get_or(j, "az_step_deg", c.az_step_deg);
    c.el_step_deg = get_or(j, "el_step_deg", c.el_step_deg);
    c.el_min_deg = get_or(j, "el_min_deg", c.el_min_deg);
    c.el_max_deg = get_or(j, "el_max_deg", c.el_max_deg);
    c.doppler_max_hz = get_or(j, "doppler_max_hz", c.doppler_max_hz);
    c.max_iterations = get_or(j, "max_iterations", c.max_iterations);
    c.max_tones = get_or(j, "max_tones", c.max_tones);
    return c;
}

estimation::TrackingConfig tracking_from(const json& j)
{
    check_keys(j, {"enabled", "gate_delay_ns", "gate_az_deg", "cutoff_db"}, "tracking");
    estimation::TrackingConfig c;
    c.gate_delay_ns = get_or(j, "gate_delay_ns", c.gate_delay_ns);
    c.gate_az_deg = get_or(j, "gate_az_deg", c.gate_az_deg);
    c.cutoff_db = get_or(j, "cutoff_db", c.cutoff_db);
    return c;
}

} // namespace

int cmd_estimate(const Config& cfg, const Options& opt, std::ostream& out)
{
    const auto& d = cfg.doc;
    check_keys(d, {"seed", "simulation", "cir", "codebook", "specular", "dense", "tracking", "output_prefix"}, "estimate config");
    const Config sim = load_config(cfg.resolve(get_req<std::string>(d, "simulation", "estimate config")));
    const auto setup = simulation_setup(sim);
    const std::string cir_base = d.contains("cir") ? cfg.resolve(get_req<std::string>(d, "cir", "estimate config"))
                                                   : out_path(opt, setup.prefix + "_cir");
    const std::string cb_path = d.contains("codebook") ? cfg.resolve(get_req<std::string>(d, "codebook", "estimate config"))
                                                       : out_path(opt, setup.prefix + "_codebook.json");
    const auto cir = sounder::load_cir(cir_base);
    const auto sched = schedule::parse_codebook_json(io::read_text(cb_path));
    require(sched.checksum() == cir.schedule_checksum, "estimate: codebook checksum does not match the CIR tensor header");

    const auto obs = estimation::observation_from_cir(cir, sched);
    auto scfg = specular_from(get_or(d, "specular", json::object()));
    if (scfg.doppler_max_hz <= 0.0)
        scfg.doppler_max_hz = estimation::unambiguous_doppler_hz(sched);
    const estimation::SpecularEstimator est(setup.tx_manifold, setup.rx_manifold, scfg);
    const auto result = est.estimate(obs);

    const json dj = get_or(d, "dense", json::object());
    check_keys(dj, {"enabled", "detection_sigma", "fit_angles"}, "dense");
    std::optional<estimation::DenseFit> dense;
    if (get_or(dj, "enabled", true)) {
        estimation::DenseConfig dc;
        dc.detection_sigma = get_or(dj, "detection_sigma", dc.detection_sigma);
        dc.fit_angles = get_or(dj, "fit_angles", dc.fit_angles);
        dense = estimation::estimate_dense(estimation::residual(obs, result.paths, setup.tx_manifold, setup.rx_manifold),
                                           setup.tx_manifold, setup.rx_manifold, dc);
    }

    const json tj = get_or(d, "tracking", json::object());
    const auto tcfg = tracking_from(tj);
    std::vector<estimation::TimedPaths> timed;
    if (get_or(tj, "enabled", true) && obs.n_snapshots >= 2) {
        for (std::size_t s = 0; s < obs.n_snapshots; ++s)
            timed.push_back({obs.time(s, 0), est.estimate(snapshot_slice(obs, s)).paths});
    } else {
        timed.push_back({obs.time(0, 0), result.paths});
    }
    const auto tracks = estimation::track_aoa(timed, tcfg);

    const std::string base = out_path(opt, get_or<std::string>(d, "output_prefix", "est"));
    io::write_text(base + "_result.json", estimation::result_json(result, dense ? &*dense : nullptr) + "\n");
    io::write_text(base + "_tracks.csv", estimation::tracks_csv(tracks));
    out << "paths " << result.paths.size() << (result.converged ? "" : " (not converged)") << "\n";
    for (const auto& p : result.paths)
        out << "  delay " << fmt(p.delay_s * 1e9, 3) << " ns  aoa " << fmt(rad2deg(p.aoa_az_rad), 2) << "/" << fmt(rad2deg(p.aoa_el_rad), 2)
            << " deg  aod " << fmt(rad2deg(p.aod_az_rad), 2) << "/" << fmt(rad2deg(p.aod_el_rad), 2) << " deg  doppler "
            << fmt(p.doppler_hz, 2) << " Hz  power " << fmt(10.0 * std::log10(p.power()), 2) << " dB\n";
    write_manifest("estimate", opt, cfg, {base + "_result.json", base + "_tracks.csv"});
    return result.converged ? kOk : kNumerical;
}

int cmd_track(const Config& cfg, const Options& opt, std::ostream& out)
{
    const auto& d = cfg.doc;
    check_keys(d, {"results", "times_s", "gate_delay_ns", "gate_az_deg", "cutoff_db", "output"}, "track config");
    const auto files = get_req<std::vector<std::string>>(d, "results", "track config");
    const auto times = get_req<std::vector<double>>(d, "times_s", "track config");
    require(files.size() == times.size(), "track: results and times_s must have the same length");
    require(files.size() >= 2, "track: at least two snapshot results required");
    std::vector<estimation::TimedPaths> timed;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const json r = parse(io::read_text(cfg.resolve(files[i])), files[i]);
        estimation::TimedPaths tp{times[i], {}};
        for (const auto& p : get_req<json>(r, "paths", files[i])) {
            channel::SpecularPath sp;
            sp.delay_s = get_req<double>(p, "delay_ns", files[i]) * 1e-9;
            sp.aoa_az_rad = deg2rad(get_req<double>(p, "aoa_az_deg", files[i]));
            sp.aoa_el_rad = deg2rad(get_req<double>(p, "aoa_el_deg", files[i]));
            sp.aod_az_rad = deg2rad(get_or(p, "aod_az_deg", 0.0));
            sp.aod_el_rad = deg2rad(get_or(p, "aod_el_deg", 0.0));
            sp.doppler_hz = get_or(p, "doppler_hz", 0.0);
            const auto& g = get_req<json>(p, "gain", files[i]);
            require(g.is_array() && g.size() == 2, files[i] + ": gain must be 2x2");
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    sp.gain(a, b) = complex_from(g[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)], files[i]);
            tp.paths.push_back(sp);
        }
        timed.push_back(tp);
    }
    estimation::TrackingConfig tc;
    tc.gate_delay_ns = get_or(d, "gate_delay_ns", tc.gate_delay_ns);
    tc.gate_az_deg = get_or(d, "gate_az_deg", tc.gate_az_deg);
    tc.cutoff_db = get_or(d, "cutoff_db", tc.cutoff_db);
    const auto tracks = estimation::track_aoa(timed, tc);
    const std::string path = out_path(opt, get_or<std::string>(d, "output", "tracks.csv"));
    io::write_text(path, estimation::tracks_csv(tracks));
    out << "tracks " << tracks.n_tracks << ", points " << tracks.points.size() << "\n";
    write_manifest("track", opt, cfg, {path});
    return kOk;
}

} // namespace mmsound::cli
