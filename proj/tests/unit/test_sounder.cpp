// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mmsound/binary_io.hpp"
#include "mmsound/fft.hpp"
#include "support.hpp"

using namespace mmsound;
using namespace mmsound::sounder;

namespace {

schedule::SwitchSchedule one_link(int n_core = 4)
{
    schedule::FrameSpec f;
    f.n_core = n_core;
    return schedule::snapshot_timing(schedule::gen_codebook(0, 1, 1, false, schedule::SwitchMode::Sequential), f);
}

CirTensor iso_acquire(std::vector<channel::SpecularPath> paths, std::size_t m_f, double noise_var, std::size_t snapshots,
                      std::uint64_t seed, int n_core = 4)
{
    const auto iso = testing::iso_manifold();
    const channel::ChannelSynthesizer syn(testing::make_scene(std::move(paths), m_f), iso, iso);
    AcquisitionConfig cfg;
    cfg.noise.noise_var = noise_var;
    cfg.n_snapshots = snapshots;
    return acquire(syn, one_link(n_core), testing::comb(m_f), cfg, seed);
}

// Largest interpolated magnitude outside +-mainlobe bins of the peak, in dB below the peak.
double peak_to_sidelobe_db(const CVec& fine, std::size_t factor, std::size_t peak, double mainlobe_bins)
{
    const double top = std::abs(fine[peak]);
    double side = 0.0;
    const auto n = static_cast<long>(fine.size());
    for (long i = 0; i < n; ++i) {
        long d = std::labs(i - static_cast<long>(peak));
        d = std::min(d, n - d);
        if (static_cast<double>(d) > mainlobe_bins * static_cast<double>(factor))
            side = std::max(side, std::abs(fine[static_cast<std::size_t>(i)]));
    }
    return 20.0 * std::log10(top / side);
}

} // namespace

TEST_SUITE("sounder")
{
    TEST_CASE("receiver sensitivity and link budget")
    {
        LinkBudget b;
        CHECK(receiver_sensitivity(b) == doctest::Approx(-79.0).epsilon(1e-12));
        b.bandwidth_hz = 2e9;
        CHECK(receiver_sensitivity(b) == doctest::Approx(-75.99).epsilon(1e-4));
        b.noise_figure_db = 0.0;
        b.bandwidth_hz = 1.0;
        CHECK(receiver_sensitivity(b) == doctest::Approx(-174.0));
        const auto r = link_budget_report(LinkBudget{});
        CHECK(r.isotropic_sensitivity_dbm == doctest::Approx(-109.08));
        CHECK(r.max_pathloss_db == doctest::Approx(152.08));
        CHECK(r.dynamic_range_db == doctest::Approx(75.0));
    }

    TEST_CASE("physical noise mode and saturation flag")
    {
        const auto n = NoiseConfig::physical(LinkBudget{}, 120.0);
        CHECK(n.received_power_dbm == doctest::Approx(43.0 - 120.0 + 30.08));
        CHECK(n.noise_var == doctest::Approx(std::pow(10.0, (-79.0 - n.received_power_dbm) / 10.0)));
        const auto loud = NoiseConfig::physical(LinkBudget{}, 70.0);
        CHECK(loud.received_power_dbm > loud.saturation_dbm);
        const auto iso = testing::iso_manifold();
        const channel::ChannelSynthesizer syn(testing::make_scene({channel::SpecularPath{}}, 16), iso, iso);
        AcquisitionConfig cfg;
        cfg.noise = loud;
        CHECK(acquire(syn, one_link(), testing::comb(16), cfg, 1).saturated);
        cfg.noise = n;
        CHECK_FALSE(acquire(syn, one_link(), testing::comb(16), cfg, 1).saturated);
    }

    TEST_CASE("noiseless flat channel returns the window kernel with coherent-gain peak")
    {
        const std::size_t m = 128;
        const auto cir = iso_acquire({channel::SpecularPath{}}, m, 0.0, 1, 3);
        const auto w = hann_window(m);
        const cplx* h = cir.cir(0, 0, 0);
        CHECK(std::abs(h[0] - coherent_gain(w)) <= 1e-6 * coherent_gain(w));
        for (std::size_t n = 0; n < m; ++n) {
            cplx k{};
            for (std::size_t i = 0; i < m; ++i)
                k += w[i] * std::polar(1.0, kTwoPi * static_cast<double>(i * n) / static_cast<double>(m));
            k /= static_cast<double>(m);
            CHECK(std::abs(h[n] - k) <= 1e-6 * coherent_gain(w));
        }
    }

    TEST_CASE("single path peak lands at its bin with Hann-level sidelobes")
    {
        const std::size_t m = 200; // 10 ns bins
        const auto cir = iso_acquire({testing::make_path(10.0, 0.0, 0.0, 0.0, 0.0, 1.0)}, m, 0.0, 1, 3);
        const auto p = pdp(cir);
        CHECK(std::max_element(p.begin(), p.end()) - p.begin() == 1);

        const std::size_t factor = 16;
        const CVec fine = interpolate_cir(cir, 0, 0, 0, factor);
        // Oracle: window the ideal phase ramp and zero-pad directly.
        const auto w = hann_window(m);
        CVec spec(m * factor, cplx{});
        for (std::size_t k = 0; k < m; ++k)
            spec[k] = w[k] * std::polar(1.0, -kTwoPi * static_cast<double>(k) * 500e3 * 10e-9);
        const CVec oracle = fft::inverse(spec);
        const double psl_oracle = peak_to_sidelobe_db(oracle, factor, factor, 2.0);
        const double psl = peak_to_sidelobe_db(fine, factor, factor, 2.0);
        CHECK(psl == doctest::Approx(psl_oracle).epsilon(1e-6));
        CHECK(std::abs(psl - 31.5) <= 1.0);
    }

    TEST_CASE("noise-only PDP sits at the expected delay-domain floor")
    {
        const double nv = 0.01;
        const auto cir = iso_acquire({}, 250, nv, 4, 17);
        const auto p = pdp(cir);
        double mean = 0.0;
        for (double v : p)
            mean += v;
        mean /= static_cast<double>(p.size());
        const auto w = hann_window(250);
        double w2 = 0.0;
        for (double v : w)
            w2 += v * v;
        const double expected = nv / 4.0 * w2 / (250.0 * 250.0);
        CHECK(delay_noise_floor(cir.noise_var, cir.window) == doctest::Approx(expected));
        CHECK(std::abs(10.0 * std::log10(mean / expected)) <= 0.3);
    }

    TEST_CASE("four-fold averaging lowers the noise floor by 6 dB")
    {
        double p1 = 0.0, p4 = 0.0;
        for (std::uint64_t t = 0; t < 100; ++t) {
            for (int m : {1, 4}) {
                const auto p = pdp(iso_acquire({}, 64, 1.0, 1, 1000 + t, m));
                double s = 0.0;
                for (double v : p)
                    s += v;
                (m == 1 ? p1 : p4) += s;
            }
        }
        CHECK(10.0 * std::log10(p1 / p4) == doctest::Approx(6.02).epsilon(0.5 / 6.02));
    }

    TEST_CASE("averaged response is unbiased")
    {
        const std::size_t m = 32;
        const auto path = testing::make_path(25.0, 0.0, 0.0, 0.0, 0.0, cplx(0.6, 0.3));
        const auto clean = iso_acquire({path}, m, 0.0, 1, 0).frequency_response(0, 0, 0);
        const auto noisy = iso_acquire({path}, m, 0.5, 400, 8);
        CVec mean(m, cplx{});
        for (std::size_t s = 0; s < noisy.n_snapshots; ++s) {
            const CVec h = noisy.frequency_response(s, 0, 0);
            for (std::size_t k = 0; k < m; ++k)
                mean[k] += h[k] / 400.0;
        }
        // Per-tone standard error of the mean of 400 snapshots.
        const double se = std::sqrt(noisy.noise_var / 400.0);
        for (std::size_t k = 0; k < m; ++k)
            CHECK(std::abs(mean[k] - clean[k]) <= 3.0 * se * std::sqrt(2.0));
    }

    TEST_CASE("Parseval between windowed spectrum and CIR")
    {
        const auto cir = iso_acquire({testing::make_path(17.0, 0.0, 0.0, 0.0, 0.0, 1.0)}, 100, 0.1, 1, 5);
        const CVec h = cir.frequency_response(0, 0, 0);
        double ef = 0.0, et = 0.0;
        for (std::size_t k = 0; k < 100; ++k)
            ef += std::norm(cir.window[k] * h[k]);
        for (std::size_t n = 0; n < 100; ++n)
            et += std::norm(cir.cir(0, 0, 0)[n]);
        CHECK(et == doctest::Approx(ef / 100.0).epsilon(1e-9));
    }

    TEST_CASE("PDP basics")
    {
        CirTensor c;
        c.n_snapshots = 5;
        c.n_tx = c.n_rx = 1;
        c.n_delay = 8;
        c.values.assign(40, cplx{});
        for (double v : pdp(c))
            CHECK(v == 0.0);
        for (std::size_t s = 0; s < 5; ++s)
            c.cir(s, 0, 0)[0] = 1.0;
        const auto p = pdp(c);
        CHECK(p[0] == 1.0);
        for (std::size_t n = 1; n < 8; ++n)
            CHECK(p[n] == 0.0);
        CHECK_THROWS_AS(pdp(c, {{7}, {}, {}}), ValidationError);

        const auto stat = iso_acquire({testing::make_path(30.0, 0.0, 0.0, 0.0, 0.0, 1.0)}, 64, 0.0, 5, 2);
        const auto all = pdp(stat);
        const auto one = pdp(stat, {{3}, {}, {}});
        for (std::size_t n = 0; n < 64; ++n)
            CHECK(all[n] == doctest::Approx(one[n]).epsilon(1e-12));
    }

    TEST_CASE("PAS peaks at the injected directions")
    {
        const auto desk = testing::desk_manifold(-50.0, 4, 4, false);
        const auto sched = schedule::snapshot_timing(schedule::gen_codebook(1, 1, 16, false, schedule::SwitchMode::PseudoRandom),
                                                     schedule::FrameSpec{});
        const auto one = testing::iso_manifold();
        std::vector<double> az, el;
        for (double a = -80.0; a <= 80.0; a += 2.0)
            az.push_back(deg2rad(a));
        for (double e = -30.0; e <= 30.0; e += 5.0)
            el.push_back(deg2rad(e));
        AcquisitionConfig cfg;

        const channel::ChannelSynthesizer s1(testing::make_scene({testing::make_path(20.0, 0.0, 0.0, 0.0, 0.0, 1.0)}, 32), one, desk);
        const auto p1 = pas(acquire(s1, sched, testing::comb(32), cfg, 1), desk, az, el);
        const auto b1 = static_cast<std::size_t>(std::max_element(p1.power.begin(), p1.power.end()) - p1.power.begin());
        CHECK(p1.power[b1] == 1.0);
        CHECK(rad2deg(az[b1 % az.size()]) == doctest::Approx(0.0));
        CHECK(rad2deg(el[b1 / az.size()]) == doctest::Approx(0.0));

        const channel::ChannelSynthesizer s2(
            testing::make_scene({testing::make_path(20.0, -30.0, 0.0, 0.0, 0.0, 1.0), testing::make_path(300.0, 30.0, 0.0, 0.0, 0.0, 1.0)}, 32),
            one, desk);
        const auto p2 = pas(acquire(s2, sched, testing::comb(32), cfg, 1), desk, az, el);
        const std::size_t row = el.size() / 2;
        std::vector<double> maxima;
        for (std::size_t i = 1; i + 1 < az.size(); ++i) {
            const double v = p2.power[row * az.size() + i];
            if (v > p2.power[row * az.size() + i - 1] && v > p2.power[row * az.size() + i + 1] && v > 0.5)
                maxima.push_back(rad2deg(az[i]));
        }
        REQUIRE(maxima.size() == 2);
        CHECK(std::abs(maxima[0] + 30.0) <= 2.0);
        CHECK(std::abs(maxima[1] - 30.0) <= 2.0);
    }

    TEST_CASE("isotropic dense scene gives a flat PAS over the sector")
    {
        const auto desk = testing::desk_manifold(-50.0, 2, 2, false);
        const auto one = testing::iso_manifold();
        auto scene = testing::make_scene({}, 16);
        scene.dense.theta_f = {0.0, 0.5, 1.0};
        const channel::ChannelSynthesizer syn(scene, one, desk);
        const auto sched = schedule::snapshot_timing(schedule::gen_codebook(1, 1, 4, false, schedule::SwitchMode::PseudoRandom),
                                                     schedule::FrameSpec{});
        AcquisitionConfig cfg;
        cfg.n_snapshots = 100;
        std::vector<double> az, el{0.0};
        for (double a = -40.0; a <= 40.0; a += 4.0)
            az.push_back(deg2rad(a));
        const auto p = pas(acquire(syn, sched, testing::comb(16), cfg, 21), desk, az, el);
        const double lo = *std::min_element(p.power.begin(), p.power.end());
        CHECK(10.0 * std::log10(1.0 / lo) <= 3.0);
    }

    TEST_CASE("CIR files round trip and reject corruption")
    {
        const auto dir = testing::scratch_dir("cir");
        const auto cir = iso_acquire({testing::make_path(5.0, 0.0, 0.0, 0.0, 0.0, 1.0)}, 16, 0.01, 2, 4);
        save_cir(cir, dir + "/c");
        const auto back = load_cir(dir + "/c");
        CHECK(back.schedule_checksum == cir.schedule_checksum);
        CHECK(back.n_avg == 4);
        REQUIRE(back.values.size() == cir.values.size());
        for (std::size_t i = 0; i < cir.values.size(); ++i)
            CHECK(std::abs(back.values[i] - cir.values[i]) < 1e-6);
        CHECK(std::filesystem::file_size(dir + "/c.bin") == cir.values.size() * 8);

        const std::string header = io::read_text(dir + "/c.json");
        io::write_text(dir + "/c.json", header.substr(0, header.size() / 2));
        CHECK_THROWS_AS(load_cir(dir + "/c"), ValidationError);
        auto j = nlohmann::json::parse(header);
        j["dims"] = {2, 1, 1, 17};
        io::write_text(dir + "/c.json", j.dump());
        CHECK_THROWS_AS(load_cir(dir + "/c"), ValidationError);
        io::write_text(dir + "/c.json", header);
        {
            std::fstream f(dir + "/c.bin", std::ios::in | std::ios::out | std::ios::binary);
            f.seekp(4);
            f.put('\x7f');
        }
        CHECK_THROWS_AS(load_cir(dir + "/c"), ValidationError);
    }

    TEST_CASE("CSV exports carry axis headers")
    {
        const std::string csv = pdp_csv({1.0, 0.1}, 2e-9);
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);
        CHECK(line == "delay_ns,power_linear,power_db");
        std::getline(in, line);
        CHECK(line.rfind("0,", 0) == 0);
        PowerAngularSpectrum s{{0.0}, {0.0}, {1.0}};
        CHECK(pas_csv(s).rfind("az_deg,el_deg,power_linear,power_db", 0) == 0);
    }
}
