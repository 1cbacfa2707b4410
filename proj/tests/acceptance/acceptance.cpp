// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mmsound/binary_io.hpp"
#include "mmsound/cli.hpp"
#include "mmsound/estimation.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mmsound;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

int run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "mmsound");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

// ---------------------------------------------------------------------------

Outcome link_budget()
{
    const fs::path dir = testing::scratch_dir("acc_budget");
    write_json(dir / "budget.json", json::object());
    if (run_cli({"budget", "--config", (dir / "budget.json").string(), "--out", dir.string()}) != 0)
        return {false, "budget command failed"};
    const auto j = json::parse(io::read_text((dir / "budget.json").string()));
    const double s = j["sensitivity_dbm"], si = j["isotropic_sensitivity_dbm"], pl = j["max_pathloss_db"], dr = j["dynamic_range_db"];
    const bool ok = std::abs(s + 79.0) < 1e-9 && std::abs(si + 109.08) < 1e-9 && std::abs(pl - 152.08) <= 0.01 && std::abs(dr - 75.0) < 1e-9;
    return {ok, fmt("sensitivity %.2f dBm, isotropic %.2f dBm, max pathloss %.2f dB, dynamic range %.2f dB", s, si, pl, dr)};
}

Outcome timing()
{
    const schedule::FrameSpec f;
    const auto sched = schedule::snapshot_timing(schedule::gen_codebook(1, 128, 256, true, schedule::SwitchMode::PseudoRandom), f);
    const bool ok = f.frame_duration_ns() == 18300 && sched.size() == 32768 && sched.snapshot_duration_ns == 599654400;
    return {ok, fmt("frame %.0f ns, %.0f entries, snapshot %.0f ns", static_cast<double>(f.frame_duration_ns()),
                    static_cast<double>(sched.size()), static_cast<double>(sched.snapshot_duration_ns))};
}

Outcome waveform_papr()
{
    const auto wf = waveform::gen_multitone(waveform::ToneGrid{}, 4, waveform::PhaseRule::refined());
    const double papr = waveform::papr_db(wf.samples);
    const double flat = waveform::spectrum_flatness_db(wf);
    return {papr <= 0.5 && flat <= 1e-9, fmt("PAPR %.3f dB (bound 0.5), flatness %.2e dB (bound 1e-9)", papr, flat)};
}

Outcome codebook_invariants()
{
    const std::vector<std::pair<int, int>> sizes{{1, 2}, {8, 8}, {16, 64}, {128, 256}};
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        for (const auto& [nt, nr] : sizes)
            for (bool dual : {false, true}) {
                const auto cb = schedule::gen_codebook(seed * 7919 + 13, nt, nr, dual, schedule::SwitchMode::PseudoRandom);
                if (cb.entries.size() != static_cast<std::size_t>(nt * nr))
                    return {false, "wrong entry count"};
                std::vector<char> seen(static_cast<std::size_t>(nt * nr), 0);
                for (const auto& e : cb.entries) {
                    if (e.tx < 0 || e.tx >= nt || e.rx < 0 || e.rx >= nr)
                        return {false, "index out of range"};
                    char& s = seen[static_cast<std::size_t>(e.tx * nr + e.rx)];
                    if (s)
                        return {false, fmt("duplicate pair at seed %.0f", static_cast<double>(seed))};
                    s = 1;
                }
                if (dual)
                    for (std::size_t i = 0; i < cb.entries.size(); i += 2) {
                        const auto& a = cb.entries[i];
                        const auto& b = cb.entries[i + 1];
                        if (a.tx != b.tx || a.rx / 2 != b.rx / 2 || a.rx == b.rx)
                            return {false, fmt("dual-pol feeds not adjacent at seed %.0f", static_cast<double>(seed))};
                    }
                ++checked;
            }
    return {true, fmt("%.0f codebooks (20 seeds, up to 128x256) are permutations with adjacent polarization pairs", checked)};
}

// Matches each true path to the closest estimate in delay.
struct PathErrors {
    bool found = false;
    double delay_ns = 1e9, angle_deg = 1e9, power_db = 1e9, doppler_hz = 1e9;
};

PathErrors compare(const channel::SpecularPath& truth, const std::vector<channel::SpecularPath>& est)
{
    PathErrors out;
    const channel::SpecularPath* best = nullptr;
    for (const auto& p : est)
        if (!best || std::abs(p.delay_s - truth.delay_s) < std::abs(best->delay_s - truth.delay_s))
            best = &p;
    if (!best)
        return out;
    auto ad = [](double a, double b) { return std::abs(rad2deg(wrap_pi(a - b))); };
    out.found = true;
    out.delay_ns = std::abs(best->delay_s - truth.delay_s) * 1e9;
    out.angle_deg = std::max({ad(best->aoa_az_rad, truth.aoa_az_rad), ad(best->aoa_el_rad, truth.aoa_el_rad),
                              ad(best->aod_az_rad, truth.aod_az_rad), ad(best->aod_el_rad, truth.aod_el_rad)});
    out.power_db = std::abs(10.0 * std::log10(best->power() / truth.power()));
    out.doppler_hz = std::abs(best->doppler_hz - truth.doppler_hz);
    return out;
}

estimation::Observation acquire_obs(const std::vector<channel::SpecularPath>& paths, const arrays::ArrayManifold& m,
                                    const schedule::SwitchSchedule& sched, std::size_t m_f, double snr_db, std::uint64_t seed)
{
    const channel::ChannelSynthesizer syn(testing::make_scene(paths, m_f), m, m);
    sounder::AcquisitionConfig cfg;
    cfg.noise = sounder::NoiseConfig::from_snr(snr_db);
    const auto cir = sounder::acquire(syn, sched, testing::comb(m_f), cfg, seed);
    return estimation::observation_from_cir(cir, sched);
}

Outcome end_to_end()
{
    const auto m = testing::desk_manifold();
    const std::vector<channel::SpecularPath> truth{
        testing::make_path(18.0, 20.0, 0.0, -15.0, 5.0, {1.0, 0.0}, 25.0),
        testing::make_path(37.5, -35.0, 10.0, 30.0, 0.0, std::polar(0.6, 1.0), -40.0),
        testing::make_path(61.2, 50.0, -5.0, -40.0, -5.0, std::polar(0.4, -2.0), 60.0)};
    int successes = 0;
    double worst_tau = 0, worst_ang = 0, worst_pow = 0, worst_nu = 0;
    std::size_t extra = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto sched = testing::desk_schedule(seed, schedule::SwitchMode::PseudoRandom);
        const auto obs = acquire_obs(truth, m, sched, 256, 30.0, 100 + seed);
        estimation::SpecularConfig cfg;
        cfg.doppler_max_hz = estimation::unambiguous_doppler_hz(sched);
        const auto r = estimation::estimate_specular(obs, m, m, cfg);
        bool ok = r.paths.size() >= truth.size();
        extra += r.paths.size() > truth.size() ? r.paths.size() - truth.size() : 0;
        for (const auto& t : truth) {
            const auto e = compare(t, r.paths);
            ok = ok && e.found && e.delay_ns <= 0.5 && e.angle_deg <= 1.0 && e.power_db <= 0.5 && e.doppler_hz <= 0.5;
            worst_tau = std::max(worst_tau, e.delay_ns);
            worst_ang = std::max(worst_ang, e.angle_deg);
            worst_pow = std::max(worst_pow, e.power_db);
            worst_nu = std::max(worst_nu, e.doppler_hz);
        }
        successes += ok ? 1 : 0;
    }
    return {successes >= 9,
            fmt("%.0f/10 seeds recovered all paths; worst |dtau| %.3f ns, angle %.3f deg, power %.3f dB, ", successes, worst_tau, worst_ang,
                worst_pow) +
                fmt("Doppler %.3f Hz; %.0f extra paths in total", worst_nu, static_cast<double>(extra))};
}

Outcome doppler_ambiguity()
{
    const auto seq = testing::desk_schedule(1, schedule::SwitchMode::Sequential);
    const auto grid = estimation::default_doppler_grid(seq);
    const double mainlobe = 1.0 / seq.snapshot_duration_s();
    const double grating = estimation::doppler_ambiguity(seq, grid).max_sidelobe(mainlobe);
    double mean = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
        mean += estimation::doppler_ambiguity(testing::desk_schedule(seed, schedule::SwitchMode::PseudoRandom), grid).max_sidelobe(mainlobe);
    mean /= 20.0;
    const bool sidelobes_ok = mean <= 0.5 * grating;

    // A path moving faster than the sequential schedule can resolve.
    const auto m = testing::desk_manifold();
    const double nu = 1500.0;
    const std::vector<channel::SpecularPath> moving{testing::make_path(30.0, 15.0, 0.0, -20.0, 0.0, {1.0, 0.0}, nu)};
    auto doppler_of = [&](const schedule::SwitchSchedule& s, double& limit) {
        estimation::SpecularConfig cfg;
        cfg.max_paths = 1;
        cfg.doppler_max_hz = limit = estimation::unambiguous_doppler_hz(s);
        const auto r = estimation::estimate_specular(acquire_obs(moving, m, s, 128, 30.0, 5), m, m, cfg);
        return r.paths.empty() ? std::nan("") : r.paths[0].doppler_hz;
    };
    double lim_pr = 0, lim_seq = 0;
    const double nu_pr = doppler_of(testing::desk_schedule(2, schedule::SwitchMode::PseudoRandom), lim_pr);
    const double nu_seq = doppler_of(seq, lim_seq);
    const bool pr_ok = std::abs(nu_pr - nu) <= 1.0;
    const bool seq_aliased = !(std::abs(nu_seq - nu) <= 1.0);
    return {sidelobes_ok && pr_ok && seq_aliased,
            fmt("pseudo-random mean sidelobe %.3f vs sequential grating %.3f; ", mean, grating) +
                fmt("1500 Hz path: pseudo-random %.2f Hz (range %.0f Hz), sequential %.2f Hz (range %.0f Hz)", nu_pr, lim_pr, nu_seq,
                    lim_seq)};
}

Outcome dense_model()
{
    // Two single-polarized antennas per side and eight tones.
    const auto desk = testing::desk_manifold(-40.0, 1, 2, false);
    channel::DenseProfile d;
    d.theta_f = {10e-9, 2.0, 1.0};
    d.theta_r = {0.0, 0.0, 2.0, 2.0, 1.0, 1.0};
    d.theta_t = {0.5, 0.0, 2.0, 2.0, 1.0, 1.0};
    const auto cov = channel::dense_covariance(d, desk, desk, 8, testing::kToneSpacing);
    const auto n = static_cast<Eigen::Index>(cov.size());
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const CVec v = cov.sample(2024, {static_cast<std::uint64_t>(i)});
        const Eigen::Map<const Eigen::VectorXcd> x(v.data(), n);
        acc += x * x.adjoint();
    }
    acc /= static_cast<double>(draws);
    const Eigen::MatrixXcd ref = testing::kron(cov.r_rx(), testing::kron(cov.r_tx(), cov.r_f()));
    const double mc_err = (acc - ref).norm() / ref.norm();
    // Expected error of a complex Gaussian sample covariance: tr(R) / (|R|_F sqrt(N)).
    const double mc_expected = ref.trace().real() / ref.norm() / std::sqrt(static_cast<double>(draws));

    const Eigen::VectorXd direct = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(ref).eigenvalues();
    const Eigen::VectorXd fact = cov.eigenvalues();
    const double eig_err = (direct - fact).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff();

    const std::size_t mf = 256;
    const channel::FreqProfile fp{50e-9, 0.05, 1.0};
    const auto prof = testing::expected_delay_power(channel::toeplitz_hermitian(channel::freq_psd(fp, mf, testing::kToneSpacing)));
    const auto onset = static_cast<std::size_t>(50e-9 * testing::kToneSpacing * static_cast<double>(mf));
    std::vector<double> x, y;
    for (std::size_t k = onset + 3; k < onset + 60; ++k) {
        x.push_back(static_cast<double>(k));
        y.push_back(std::log(prof[k]));
    }
    const auto [slope, r2] = testing::line_fit(x, y);
    return {n == 32 && mc_err <= 0.05 && eig_err <= 1e-9 && r2 >= 0.999,
            fmt("Monte-Carlo error %.4f (bound 0.05, sampling expectation %.4f), ", mc_err, mc_expected) +
                fmt("eigenvalue error %.1e (bound 1e-9), R^2 %.6f, slope %.4f", eig_err, r2, slope)};
}

Outcome eadf()
{
    const auto geo = arrays::ArrayGeometry::upa(2, 2, kSpeedOfLight / testing::kCarrier / 2.0, true);
    const auto g = arrays::synth_pattern(85.0, 50.0, 20.0, geo, {testing::kCarrier});
    const auto e = arrays::compute_eadf(g, arrays::Truncation::full());
    const double rt = testing::source_error_db(g, e, testing::kCarrier);

    double worst = 0.0;
    std::size_t rows = 0, cols = 0;
    for (std::size_t el : {0u, 5u})
        for (std::size_t pol : {0u, 1u}) {
            const CVec fine = testing::oversampled_slice(g, el, pol, 10, rows, cols);
            double peak = 0.0;
            for (const auto& v : fine)
                peak = std::max(peak, std::abs(v));
            for (std::size_t r = 3; r < rows / 2 + 40; r += 31)
                for (std::size_t c = 1; c < cols; c += 47) {
                    if (r % 10 == 0 && c % 10 == 0)
                        continue;
                    const double elv = deg2rad(-90.0 + g.angles.el_step_deg * static_cast<double>(r) / 10.0);
                    const double az = deg2rad(-180.0 + g.angles.az_step_deg * static_cast<double>(c) / 10.0);
                    const cplx v = arrays::manifold(e, az, elv, testing::kCarrier)(static_cast<Eigen::Index>(el), static_cast<Eigen::Index>(pol));
                    worst = std::max(worst, std::abs(v - fine[r * cols + c]) / peak);
                }
        }
    return {rt <= -40.0 && worst <= 1e-6, fmt("round-trip error %.1f dB (bound -40), oracle deviation %.1e of peak (bound 1e-6)", rt, worst)};
}

Outcome receiver_chain()
{
    const auto iso = testing::iso_manifold();
    auto one_link = [](int n_core) {
        schedule::FrameSpec f;
        f.n_core = n_core;
        return schedule::snapshot_timing(schedule::gen_codebook(0, 1, 1, false, schedule::SwitchMode::Sequential), f);
    };
    auto run = [&](std::vector<channel::SpecularPath> paths, std::size_t m_f, double nv, int n_core, std::uint64_t seed) {
        const channel::ChannelSynthesizer syn(testing::make_scene(std::move(paths), m_f), iso, iso);
        sounder::AcquisitionConfig cfg;
        cfg.noise.noise_var = nv;
        return sounder::acquire(syn, one_link(n_core), testing::comb(m_f), cfg, seed);
    };
    double p1 = 0.0, p4 = 0.0;
    for (std::uint64_t t = 0; t < 100; ++t)
        for (int mcore : {1, 4}) {
            const auto p = sounder::pdp(run({}, 64, 1.0, mcore, 5000 + t));
            for (double v : p)
                (mcore == 1 ? p1 : p4) += v;
        }
    const double gain_db = 10.0 * std::log10(p1 / p4);

    const std::size_t m = 128;
    const auto cir = run({channel::SpecularPath{}}, m, 0.0, 4, 1);
    const auto w = sounder::hann_window(m);
    const double cg = sounder::coherent_gain(w);
    const cplx* h = cir.cir(0, 0, 0);
    double dev = std::abs(h[0] - cg) / cg;
    for (std::size_t n = 0; n < m; ++n) {
        cplx k{};
        for (std::size_t i = 0; i < m; ++i)
            k += w[i] * std::polar(1.0, kTwoPi * static_cast<double>(i * n) / static_cast<double>(m));
        dev = std::max(dev, std::abs(h[n] - k / static_cast<double>(m)) / cg);
    }
    return {std::abs(gain_db - 6.02) <= 0.5 && dev <= 1e-6,
            fmt("averaging gain %.3f dB (6.02 +- 0.5), flat-channel deviation %.1e of the window gain (bound 1e-6)", gain_db, dev)};
}

Outcome determinism()
{
    const fs::path root = testing::scratch_dir("acc_determinism");
    const fs::path cfg = root / "cfg";
    fs::create_directories(cfg);
    write_json(cfg / "scene.json",
               {{"carrier_hz", 28e9},
                {"tones", {{"n_tones", 64}, {"spacing_hz", 500e3}}},
                {"paths",
                 {{{"delay_ns", 20.0}, {"aoa_az_deg", 10.0}, {"aoa_el_deg", 0.0}, {"aod_az_deg", -5.0}, {"aod_el_deg", 0.0},
                   {"gain", {{{1.0, 0.0}, {0.0, 0.0}}, {{0.0, 0.0}, {1.0, 0.0}}}}, {"doppler_hz", 15.0}}}},
                {"dense", {{"tau_d_ns", 30.0}, {"beta_d", 0.1}, {"gamma1", 0.01}}}});
    const json arr = {{"layout", "upa"}, {"rows", 1}, {"cols", 2}, {"dual_pol", true}, {"eadf", {{"max_error_db", -50}}}};
    write_json(cfg / "simulate.json", {{"scene", "scene.json"}, {"tx", arr}, {"rx", arr}, {"n_snapshots", 2}, {"noise", {{"snr_db", 25}}},
                                       {"pas", {{"az_step_deg", 10}, {"el_step_deg", 30}}}, {"output_prefix", "det"}});
    write_json(cfg / "estimate.json", {{"simulation", "simulate.json"}, {"specular", {{"max_paths", 2}}}, {"output_prefix", "det"}});
    write_json(cfg / "waveform.json", {{"n_tones", 256}, {"tone_spacing_hz", 500e3}, {"output", "wf"}});
    write_json(cfg / "codebook.json", {{"n_tx", 16}, {"n_rx", 32}, {"output", "cb.json"}});
    write_json(cfg / "ambiguity.json", {{"n_seeds", 3}});
    write_json(cfg / "budget.json", json::object());

    const std::vector<std::string> commands{"waveform", "codebook", "budget", "ambiguity", "simulate", "estimate"};
    std::map<std::string, std::string> first;
    std::size_t compared = 0;
    int run_index = 0;
    for (const char* threads : {"1", "4", "1"}) {
        const fs::path out = root / ("run" + std::to_string(run_index++));
        fs::create_directories(out);
        for (const auto& c : commands) {
            const int rc = run_cli({c, "--config", (cfg / (c + ".json")).string(), "--seed", "21", "--threads", threads, "--out", out.string()});
            if (rc != 0)
                return {false, c + " exited with " + std::to_string(rc)};
        }
        for (const auto& f : fs::directory_iterator(out)) {
            const std::string name = f.path().filename().string();
            const std::string bytes = io::read_text(f.path().string());
            auto it = first.find(name);
            if (it == first.end()) {
                first[name] = bytes;
            } else {
                ++compared;
                if (it->second != bytes)
                    return {false, name + " differs between runs"};
            }
        }
    }
    return {compared > 0 && compared == 2 * first.size(),
            fmt("%.0f output files byte-identical over three runs with 1 and 4 threads", static_cast<double>(first.size()))};
}

} // namespace

int main()
{
    struct Criterion {
        const char* name;
        double budget_s;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria{
        {"link budget", 1.0, link_budget},
        {"timing", 1.0, timing},
        {"waveform", 5.0, waveform_papr},
        {"codebook", 10.0, codebook_invariants},
        {"end-to-end recovery", 300.0, end_to_end},
        {"Doppler ambiguity", 120.0, doppler_ambiguity},
        {"dense model", 120.0, dense_model},
        {"EADF", 60.0, eadf},
        {"receiver chain", 60.0, receiver_chain},
        {"determinism", 0.0, determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.budget_s <= 0.0 || dt <= c.budget_s;
        const bool pass = o.pass && in_time;
        failures += pass ? 0 : 1;
        std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail
                  << fmt(" [%.1f s", dt) << (c.budget_s > 0.0 ? fmt(", limit %.0f s]", c.budget_s) : std::string("]"))
                  << (in_time ? "" : " runtime exceeded") << std::endl;
    }
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
