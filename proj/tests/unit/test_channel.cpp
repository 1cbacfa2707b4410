// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "mmsound/fft.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mmsound;
using namespace mmsound::channel;
using testing::kCarrier;

namespace {

// Expected delay power of a CN(0, R) frequency vector under the unitary IDFT.
schedule::SwitchSchedule single_schedule()
{
    return schedule::snapshot_timing(schedule::gen_codebook(0, 1, 1, false, schedule::SwitchMode::Sequential), schedule::FrameSpec{});
}

} // namespace

TEST_SUITE("channel")
{
    TEST_CASE("unit path through isotropic elements is flat")
    {
        const auto iso = testing::iso_manifold();
        SpecularPath p;
        const auto f = tone_frequencies(64, 500e3);
        const CVec h = specular_response({p}, iso, iso, f, 0.0);
        for (const auto& v : h)
            CHECK(std::abs(v - cplx(1.0, 0.0)) < 1e-9);
    }

    TEST_CASE("delay shows up at the matching IDFT bin")
    {
        const auto iso = testing::iso_manifold();
        SpecularPath p;
        p.delay_s = 10e-9;
        const auto f = tone_frequencies(2000, 500e3);
        const CVec h = specular_response({p}, iso, iso, f, 0.0);
        const double turns = (std::arg(h[1] / h[0])) * 1999.0 / kTwoPi;
        CHECK(std::abs(turns + 0.5e-3 * 1999.0 * 10.0) < 1e-6 * 2000);
        const CVec x = fft::inverse(h);
        std::size_t best = 0;
        for (std::size_t n = 1; n < x.size(); ++n)
            if (std::abs(x[n]) > std::abs(x[best]))
                best = n;
        CHECK(best == 10);
    }

    TEST_CASE("two equal rays half a tone period apart null every other tone")
    {
        const auto iso = testing::iso_manifold();
        SpecularPath a, b;
        a.delay_s = 20e-9;
        b.delay_s = a.delay_s + 0.5 / 500e3;
        const auto f = tone_frequencies(32, 500e3);
        const CVec h = specular_response({a, b}, iso, iso, f, 0.0);
        for (std::size_t k = 0; k < f.size(); ++k) {
            const bool odd = std::llround(f[k] / 500e3) % 2 != 0;
            if (odd)
                CHECK(std::abs(h[k]) < 1e-9);
            else
                CHECK(std::abs(h[k]) == doctest::Approx(2.0));
        }
    }

    TEST_CASE("mean power of a unit isotropic path is one")
    {
        const auto iso = testing::iso_manifold();
        SpecularPath p;
        p.delay_s = 33.3e-9;
        const CVec h = specular_response({p}, iso, iso, tone_frequencies(100, 500e3), 0.0);
        double m = 0.0;
        for (const auto& v : h)
            m += std::norm(v);
        CHECK(m / 100.0 == doctest::Approx(1.0).epsilon(1e-9));
    }

    TEST_CASE("frequency correlation vector")
    {
        FreqProfile fp{37e-9, 0.04, 2.0};
        const CVec lam = freq_psd(fp, 128, 500e3);
        CHECK(lam[0].real() == doctest::Approx(2.0 / (128 * 0.04)));
        CHECK(std::abs(lam[0].imag()) < 1e-15);
        const double tn = 37e-9 * 500e3;
        for (std::size_t k : {1u, 5u, 77u}) {
            const cplx want = (2.0 / 128.0) * std::polar(1.0, -kTwoPi * static_cast<double>(k) * tn) /
                              cplx(0.04, kTwoPi * static_cast<double>(k) / 128.0);
            CHECK(std::abs(lam[k] - want) < 1e-14);
        }
        const CVec l0 = freq_psd({0.0, 0.04, 1.0}, 64, 500e3);
        for (std::size_t k = 1; k < l0.size(); ++k)
            CHECK(std::abs(l0[k]) < std::abs(l0[k - 1]));
        CHECK_THROWS_AS(freq_psd({0.0, 0.0, 1.0}, 8, 500e3), ValidationError);
    }

    TEST_CASE("frequency covariance is Hermitian Toeplitz and PSD")
    {
        const CVec lam = freq_psd({50e-9, 0.02, 1.0}, 96, 500e3);
        const Eigen::MatrixXcd r = toeplitz_hermitian(lam);
        CHECK((r - r.adjoint()).norm() < 1e-14);
        for (Eigen::Index i = 1; i < r.rows(); ++i)
            for (Eigen::Index j = 1; j < r.cols(); ++j)
                CHECK(r(i, j) == r(i - 1, j - 1));
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(r).eigenvalues();
        CHECK(ev.minCoeff() >= -1e-10 * r.trace().real());
    }

    TEST_CASE("delay profile of the frequency covariance is a one-sided exponential")
    {
        const std::size_t m = 256;
        const double beta = 0.05;
        const FreqProfile fp{50e-9, beta, 1.0};
        const auto prof = testing::expected_delay_power(toeplitz_hermitian(freq_psd(fp, m, 500e3)));
        const double onset = 50e-9 * 500e3 * static_cast<double>(m);
        std::vector<double> x, y;
        for (std::size_t n = static_cast<std::size_t>(onset) + 3; n < static_cast<std::size_t>(onset) + 60; ++n) {
            x.push_back(static_cast<double>(n));
            y.push_back(std::log(prof[n]));
        }
        const auto [slope, r2] = testing::line_fit(x, y);
        CHECK(r2 >= 0.999);
        CHECK(slope == doctest::Approx(-beta).epsilon(0.05));
        // Little power before the onset.
        CHECK(prof[2] < 0.05 * prof[static_cast<std::size_t>(onset) + 1]);
    }

    TEST_CASE("uniform angular density on half-wavelength isotropic pairs is white")
    {
        const auto geo = arrays::ArrayGeometry::upa(1, 2, kSpeedOfLight / kCarrier / 2.0, false);
        const auto g = arrays::synth_pattern(arrays::kIsotropicHpbwDeg, arrays::kIsotropicHpbwDeg, 200.0, geo, {kCarrier});
        const arrays::ArrayManifold m(arrays::compute_eadf(g, arrays::Truncation::full()), kCarrier);
        AngularProfile ap;
        ap.amp_az = 2.0;
        ap.amp_el = 1.5;
        const auto r = angular_covariance(m, ap);
        CHECK(r(0, 0).real() == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(std::abs(r(0, 1)) < 0.01 * r(0, 0).real());

        const auto w = von_mises_weights(ap, arrays::AngleGrid{});
        double sum = 0.0;
        for (double v : w)
            sum += v;
        CHECK(sum == doctest::Approx(1.0));
    }

    TEST_CASE("von Mises concentration peaks at the mean direction")
    {
        arrays::AngleGrid grid;
        AngularProfile ap{deg2rad(30.0), deg2rad(10.0), 8.0, 8.0, 1.0, 1.0};
        const auto w = von_mises_weights(ap, grid);
        const auto best = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
        CHECK(rad2deg(grid.az_rad(best % grid.n_az())) == doctest::Approx(30.0));
        CHECK(rad2deg(grid.el_rad(best / grid.n_az())) == doctest::Approx(10.0));
    }

    TEST_CASE("Kronecker eigenvalues are the products of the factor eigenvalues")
    {
        const auto desk = testing::desk_manifold(-40.0, 1, 1, true);
        DenseProfile d;
        d.theta_f = {20e-9, 0.1, 1.0};
        d.theta_r = {0.2, 0.1, 3.0, 2.0, 1.0, 1.0};
        d.theta_t = {-0.3, 0.0, 1.0, 5.0, 1.0, 1.0};
        const auto cov = dense_covariance(d, desk, desk, 4, 500e3);
        REQUIRE(cov.size() == 16);
        const Eigen::VectorXd direct = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(cov.materialize()).eigenvalues();
        const Eigen::VectorXd fact = cov.eigenvalues();
        CHECK((direct - fact).cwiseAbs().maxCoeff() <= 1e-9 * direct.cwiseAbs().maxCoeff());

        Eigen::MatrixXcd full = testing::kron(cov.r_rx(), testing::kron(cov.r_tx(), cov.r_f()));
        CHECK((full - cov.materialize()).norm() < 1e-12 * full.norm());
        CVec x(cov.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = cplx(std::sin(1.0 + static_cast<double>(i)), std::cos(3.0 * static_cast<double>(i)));
        const CVec y = cov.apply(x);
        const Eigen::VectorXcd yd = full * Eigen::Map<const Eigen::VectorXcd>(x.data(), static_cast<Eigen::Index>(x.size()));
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(std::abs(y[i] - yd(static_cast<Eigen::Index>(i))) < 1e-12 * yd.norm());
    }

    TEST_CASE("Monte-Carlo covariance of dense draws")
    {
        const auto desk = testing::desk_manifold(-40.0, 1, 2, false);
        DenseProfile d;
        d.theta_f = {10e-9, 2.0, 1.0};
        d.theta_r = {0.0, 0.0, 2.0, 2.0, 1.0, 1.0};
        d.theta_t = {0.5, 0.0, 2.0, 2.0, 1.0, 1.0};
        const auto cov = dense_covariance(d, desk, desk, 8, 500e3);
        REQUIRE(cov.size() == 32);
        const auto n = static_cast<Eigen::Index>(cov.size());
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
        const int draws = 10000;
        for (int i = 0; i < draws; ++i) {
            const CVec v = cov.sample(99, {static_cast<std::uint64_t>(i)});
            const Eigen::Map<const Eigen::VectorXcd> x(v.data(), n);
            acc += x * x.adjoint();
        }
        acc /= static_cast<double>(draws);
        const Eigen::MatrixXcd ref = cov.materialize();
        CHECK((acc - ref).norm() / ref.norm() <= 0.05);
        CHECK(cov.clipped_fraction() <= 1e-6);
    }

    TEST_CASE("realizations: empty scene, static path, Doppler progression")
    {
        const auto iso = testing::iso_manifold();
        const auto sched = single_schedule();
        auto scene = testing::make_scene({}, 16);
        CHECK_NOTHROW(scene.validate());
        const auto zero = realize_snapshot(scene, sched, iso, iso, 0, 1);
        for (const auto& v : zero.values)
            CHECK(v == cplx{});

        SpecularPath p;
        p.delay_s = 12e-9;
        scene.paths = {p};
        const ChannelSynthesizer syn(scene, iso, iso);
        CHECK(syn.realize(sched, 0, 1).values == syn.realize(sched, 3, 1).values);

        const auto desk = testing::desk_manifold(-40.0);
        const auto ds = testing::desk_schedule(4, schedule::SwitchMode::PseudoRandom);
        for (double nu : {100.0, 200.0}) {
            auto sc = testing::make_scene({testing::make_path(15.0, 10.0, 0.0, -5.0, 0.0, 1.0, nu)}, 8);
            const ChannelSynthesizer s(sc, desk, desk);
            const auto a = s.realize(ds, 0, 0);
            const auto b = s.realize(ds, 1, 0);
            for (std::size_t e = 0; e < ds.size(); e += 9) {
                const double dt = ds.entry_time_s(1, e) - ds.entry_time_s(0, e);
                CHECK(std::abs(wrap_pi(std::arg(b.at(e, 3) / a.at(e, 3)) - kTwoPi * nu * dt)) < 1e-9);
                // Against the same entry evaluated at its own timestamp.
                CVec h(8);
                s.specular_entry(ds.codebook.entries[e].tx, ds.codebook.entries[e].rx, ds.entry_time_s(0, e), h.data());
                CHECK(std::abs(h[3] - a.at(e, 3)) < 1e-12);
            }
        }
    }

    TEST_CASE("Doppler doubles the per-entry phase slope")
    {
        const auto iso = testing::iso_manifold();
        CVec h1(4), h2(4);
        for (double nu : {37.0, 74.0}) {
            SpecularPath p;
            p.doppler_hz = nu;
            const ChannelSynthesizer s(testing::make_scene({p}, 4), iso, iso);
            s.specular_entry(0, 0, 0.0, h1.data());
            s.specular_entry(0, 0, 1e-3, h2.data());
            CHECK(std::abs(wrap_pi(std::arg(h2[0] / h1[0]) - kTwoPi * nu * 1e-3)) < 1e-9);
        }
    }

    TEST_CASE("motion-induced Doppler")
    {
        Trajectory t;
        t.waypoints = {{0.0, Eigen::Vector3d::Zero()}, {2.0, Eigen::Vector3d(3.0, 0.0, 0.0)}};
        const double v = 1.5, lambda = kSpeedOfLight / kCarrier;
        for (double az : {0.0, 0.5, 2.0})
            for (double el : {0.0, 0.3}) {
                const double want = v / lambda * std::cos(az) * std::cos(el);
                const double got = motion_doppler_hz(t, az, el, kCarrier, 0.7);
                CHECK(got == doctest::Approx(want).epsilon(1e-6));
            }
        CHECK(motion_doppler_hz(t, 0.0, 0.0, kCarrier, 5.0) == 0.0);
    }

    TEST_CASE("scene files")
    {
        auto scene = testing::make_scene({testing::make_path(12.5, 20.0, 5.0, -15.0, 0.0, cplx(0.3, -0.1), 8.0)}, 32);
        scene.dense.theta_f = {40e-9, 0.03, 0.5};
        scene.dense.theta_r.kappa_az = 2.0;
        Trajectory t;
        t.waypoints = {{0.0, Eigen::Vector3d::Zero()}, {1.0, Eigen::Vector3d(1.0, 2.0, 0.0)}};
        scene.motion = t;
        const auto back = parse_scene_json(scene_json(scene));
        REQUIRE(back.paths.size() == 1);
        CHECK(back.paths[0].delay_s == doctest::Approx(12.5e-9));
        CHECK(back.paths[0].aoa_az_rad == doctest::Approx(deg2rad(20.0)));
        CHECK(std::abs(back.paths[0].gain(1, 1) - cplx(0.3, -0.1)) < 1e-12);
        CHECK(back.dense.theta_f.tau_d_s == doctest::Approx(40e-9));
        CHECK(back.dense.theta_r.kappa_az == 2.0);
        CHECK(back.motion->waypoints.size() == 2);
        CHECK(back.frequencies_hz == scene.frequencies_hz);
        CHECK_THROWS_AS(parse_scene_json(R"({"carrier_hz": 28e9, "tones": {"n_tones": 4, "spacing_hz": 1e6}, "bogus": 1})"),
                        ValidationError);
        CHECK_THROWS_AS(parse_scene_json(R"({"carrier_hz": 28e9, "tones": {"n_tones": 4, "spacing_hz": 1e6},
            "paths": [{"delay_ns": -1, "aoa_az_deg": 0, "aoa_el_deg": 0, "aod_az_deg": 0, "aod_el_deg": 0,
                       "gain": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}]})"),
                        ValidationError);
        CHECK_THROWS_AS(parse_scene_json(R"({"carrier_hz": 28e9, "tones": {"n_tones": 4, "spacing_hz": 1e6},
            "paths": [{"delay_ns": 1}]})"),
                        ValidationError);
    }

    TEST_CASE("paths outside the panel field of view are rejected")
    {
        const auto desk = testing::desk_manifold(-40.0);
        const auto p = testing::make_path(10.0, 120.0, 0.0, 0.0, 0.0, 1.0);
        CHECK_THROWS_AS(path_spatial_matrix(p, desk, desk), ValidationError);
    }
}
