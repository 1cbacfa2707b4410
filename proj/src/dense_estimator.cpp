// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>

#include <ceres/ceres.h>

#include "mmsound/estimation.hpp"
#include "mmsound/fft.hpp"
#include "mmsound/parallel.hpp"

namespace mmsound::estimation {

std::vector<double> dense_delay_profile(const channel::FreqProfile& theta_f, double noise_var, std::size_t m_f,
                                        double tone_spacing_hz)
{
    const CVec lambda = channel::freq_psd(theta_f, m_f, tone_spacing_hz);
    const double m = static_cast<double>(m_f);
    // Fold the triangular lag weights onto one DFT period.
    CVec c(m_f);
    c[0] = m * lambda[0];
    for (std::size_t i = 1; i < m_f; ++i)
        c[i] = (m - static_cast<double>(i)) * lambda[i] + static_cast<double>(i) * std::conj(lambda[m_f - i]);
    const CVec p = fft::inverse(c);
    std::vector<double> out(m_f);
    for (std::size_t n = 0; n < m_f; ++n)
        out[n] = p[n].real() / m + noise_var;
    return out;
}

namespace {

// Averaged |unitary IDFT|^2 of all (snapshot, entry) vectors.
std::vector<double> observed_profile(const Observation& obs)
{
    const std::size_t mf = obs.m_f();
    const std::size_t n = obs.n_snapshots * obs.n_entries;
    std::vector<std::vector<double>> parts(n);
    parallel_for(n, [&](std::size_t i) {
        CVec x(obs.values.begin() + static_cast<std::ptrdiff_t>(i * mf), obs.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * mf));
        const CVec h = fft::inverse(x);
        parts[i].resize(mf);
        for (std::size_t k = 0; k < mf; ++k)
            parts[i][k] = std::norm(h[k]) / static_cast<double>(mf);
    });
    std::vector<double> out(mf, 0.0);
    for (const auto& p : parts)
        for (std::size_t k = 0; k < mf; ++k)
            out[k] += p[k] / static_cast<double>(n);
    return out;
}

struct ProfileResidual {
    ProfileResidual(const std::vector<double>& obs, double df) : obs_(obs), df_(df) {}
    bool operator()(const double* x, double* r) const
    {
        channel::FreqProfile f;
        f.tau_d_s = x[0] * 1e-9;
        f.beta_d = std::exp(x[1]);
        f.gamma1 = std::exp(x[2]);
        const auto model = dense_delay_profile(f, std::exp(x[3]), obs_.size(), df_);
        for (std::size_t n = 0; n < obs_.size(); ++n)
            r[n] = std::log(std::max(obs_[n], 1e-300)) - std::log(std::max(model[n], 1e-300));
        return true;
    }
    const std::vector<double>& obs_;
    double df_;
};

// Normalised first trigonometric moments of a spectrum over angle cells:
// (cos az, sin az, cos 2 el, sin 2 el).
std::array<double, 4> moments(const std::vector<double>& p, const std::vector<std::pair<double, double>>& cells)
{
    std::array<double, 4> m{};
    double total = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        m[0] += p[c] * std::cos(cells[c].first);
        m[1] += p[c] * std::sin(cells[c].first);
        m[2] += p[c] * std::cos(2.0 * cells[c].second);
        m[3] += p[c] * std::sin(2.0 * cells[c].second);
        total += p[c];
    }
    for (auto& v : m)
        v /= total;
    return m;
}

// Bartlett spectrum of a spatial covariance at each display cell.
std::vector<double> bartlett(const Eigen::MatrixXcd& cov, const std::vector<Eigen::MatrixXcd>& responses)
{
    std::vector<double> p(responses.size(), 0.0);
    for (std::size_t c = 0; c < responses.size(); ++c)
        for (Eigen::Index pol = 0; pol < 2; ++pol) {
            const double nb = responses[c].col(pol).squaredNorm();
            if (nb > 0.0)
                p[c] += (responses[c].col(pol).adjoint() * cov * responses[c].col(pol))(0, 0).real() / nb;
        }
    return p;
}

struct AngularModel {
    arrays::AngleGrid density_grid;
    std::vector<Eigen::MatrixXcd> density_responses;
    std::vector<std::pair<double, double>> view_cells;
    std::vector<Eigen::MatrixXcd> view_responses;

    std::vector<double> predict(const channel::AngularProfile& a) const
    {
        const auto w = channel::von_mises_weights(a, density_grid);
        const Eigen::MatrixXcd r = channel::angular_covariance(density_responses, w, 1.0);
        return bartlett(r, view_responses);
    }
};

struct MomentResidual {
    MomentResidual(const AngularModel& model, std::array<double, 4> target) : model_(model), target_(target) {}
    bool operator()(const double* x, double* r) const
    {
        channel::AngularProfile a;
        a.mu_az_rad = x[0];
        a.mu_el_rad = x[1];
        a.kappa_az = std::max(x[2], 0.0);
        a.kappa_el = std::max(x[3], 0.0);
        const auto m = moments(model_.predict(a), model_.view_cells);
        for (int i = 0; i < 4; ++i)
            r[i] = m[static_cast<std::size_t>(i)] - target_[static_cast<std::size_t>(i)];
        return true;
    }
    const AngularModel& model_;
    std::array<double, 4> target_;
};

channel::AngularProfile fit_angles(const Eigen::MatrixXcd& cov, const arrays::ArrayManifold& m, const DenseConfig& cfg)
{
    AngularModel model;
    model.density_grid.az_step_deg = cfg.az_step_deg;
    model.density_grid.el_step_deg = cfg.el_step_deg;
    const std::size_t na = model.density_grid.n_az();
    const std::size_t cells = na * model.density_grid.n_el();
    model.density_responses.resize(cells);
    parallel_for(cells, [&](std::size_t c) {
        model.density_responses[c] = m.response(model.density_grid.az_rad(c % na), model.density_grid.el_rad(c / na));
    });
    for (std::size_t c = 0; c < cells; ++c) {
        const double az = model.density_grid.az_rad(c % na);
        const double el = model.density_grid.el_rad(c / na);
        if (m.in_fov(az) && std::abs(el) < kPi / 2 - 1e-9) {
            model.view_cells.emplace_back(az, el);
            model.view_responses.push_back(model.density_responses[c]);
        }
    }
    const auto observed = bartlett(cov, model.view_responses);
    const auto target = moments(observed, model.view_cells);
    const std::size_t peak = static_cast<std::size_t>(std::max_element(observed.begin(), observed.end()) - observed.begin());

    double x[4] = {model.view_cells[peak].first, model.view_cells[peak].second, 1.0, 1.0};
    ceres::Problem problem;
    problem.AddResidualBlock(new ceres::NumericDiffCostFunction<MomentResidual, ceres::CENTRAL, 4, 4>(new MomentResidual(model, target)),
                             nullptr, x);
    problem.SetParameterLowerBound(x, 1, -kPi / 2);
    problem.SetParameterUpperBound(x, 1, kPi / 2);
    problem.SetParameterLowerBound(x, 2, 0.0);
    problem.SetParameterUpperBound(x, 2, 500.0);
    problem.SetParameterLowerBound(x, 3, 0.0);
    problem.SetParameterUpperBound(x, 3, 500.0);
    ceres::Solver::Options opts;
    opts.linear_solver_type = ceres::DENSE_QR;
    opts.max_num_iterations = 100;
    opts.num_threads = 1;
    opts.logging_type = ceres::SILENT;
    ceres::Solver::Summary summary;
    ceres::Solve(opts, &problem, &summary);
    if (summary.termination_type == ceres::FAILURE)
        throw NumericalError("angular moment fit failed: " + summary.message);

    channel::AngularProfile a;
    a.mu_az_rad = wrap_pi(x[0]);
    a.mu_el_rad = x[1];
    a.kappa_az = x[2];
    a.kappa_el = x[3];
    return a;
}

} // namespace

DenseFit estimate_dense(const Observation& obs, const arrays::ArrayManifold& tx, const arrays::ArrayManifold& rx,
                        const DenseConfig& cfg)
{
    obs.validate();
    const std::size_t mf = obs.m_f();
    require(mf >= 8, "dense fit: at least eight tones required");
    const double df = obs.frequencies_hz[1] - obs.frequencies_hz[0];
    require(df > 0.0, "dense fit: tones must increase");

    DenseFit fit;
    fit.delay_profile = observed_profile(obs);
    const auto& p = fit.delay_profile;
    const double n_avg = static_cast<double>(obs.n_snapshots * obs.n_entries);

    const double floor0 = late_delay_noise(obs);
    if (!(*std::max_element(p.begin(), p.end()) > 0.0)) {
        fit.noise_only = true;
        fit.diagnostic = "residual is identically zero";
        fit.profile.theta_f.gamma1 = 0.0;
        return fit;
    }

    // Starting point: peak position, log-linear decay slope, late floor.
    std::vector<double> sorted(p);
    std::sort(sorted.begin(), sorted.end());
    const double floor_init = std::max(std::min(floor0, sorted[sorted.size() / 10]), 1e-300);
    const std::size_t pk = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
    for (std::size_t n = pk; n < mf && n < pk + mf / 2; ++n) {
        const double v = p[n] - floor_init;
        if (v <= 2.0 * floor_init)
            break;
        const double x = static_cast<double>(n - pk), y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        cnt += 1;
    }
    double beta0 = 0.05;
    if (cnt >= 3) {
        const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
        if (slope < 0.0)
            beta0 = std::clamp(-slope, 1e-4, 10.0);
    }
    const double bin = 1.0 / (static_cast<double>(mf) * df);
    double x[4] = {static_cast<double>(pk) * bin * 1e9, std::log(beta0), std::log(std::max(p[pk] - floor_init, floor_init)),
                   std::log(floor_init)};

    ceres::Problem problem;
    problem.AddResidualBlock(
        new ceres::NumericDiffCostFunction<ProfileResidual, ceres::CENTRAL, ceres::DYNAMIC, 4>(new ProfileResidual(p, df),
                                                                                              ceres::TAKE_OWNERSHIP,
                                                                                              static_cast<int>(mf)),
        nullptr, x);
    problem.SetParameterLowerBound(x, 0, 0.0);
    problem.SetParameterUpperBound(x, 0, 1e9 / df);
    problem.SetParameterLowerBound(x, 1, std::log(1e-5));
    problem.SetParameterUpperBound(x, 1, std::log(50.0));
    const double pmax = *std::max_element(p.begin(), p.end());
    problem.SetParameterLowerBound(x, 3, std::log(pmax) - 70.0);
    problem.SetParameterUpperBound(x, 3, std::log(pmax) + 5.0);
    problem.SetParameterLowerBound(x, 2, std::log(pmax) - 70.0);
    problem.SetParameterUpperBound(x, 2, std::log(pmax) + 10.0);
    ceres::Solver::Options opts;
    opts.linear_solver_type = ceres::DENSE_QR;
    opts.max_num_iterations = 200;
    opts.num_threads = 1;
    opts.logging_type = ceres::SILENT;
    ceres::Solver::Summary summary;
    ceres::Solve(opts, &problem, &summary);
    if (summary.termination_type == ceres::FAILURE)
        throw NumericalError("dense delay fit failed: " + summary.message);

    auto& prof = fit.profile;
    prof.theta_f.tau_d_s = x[0] * 1e-9;
    prof.theta_f.beta_d = std::exp(x[1]);
    prof.theta_f.gamma1 = std::exp(x[2]);
    prof.noise_var = std::exp(x[3]);

    // Detection: the dense part must rise above the averaged noise profile by
    // more than its largest expected excursion over the delay bins.
    const auto dense_only = dense_delay_profile(prof.theta_f, 0.0, mf, df);
    const double peak = *std::max_element(dense_only.begin(), dense_only.end());
    const double excursion = (cfg.detection_sigma + std::sqrt(2.0 * std::log(static_cast<double>(mf)))) * prof.noise_var / std::sqrt(n_avg);
    if (!(peak > excursion)) {
        fit.noise_only = true;
        fit.diagnostic = "dense component not detected above the noise floor";
        prof.theta_f.gamma1 = 0.0;
        prof.noise_var = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(mf);
        return fit;
    }

    if (cfg.fit_angles) {
        // Spatial covariances on each side, noise removed.
        const auto mr = static_cast<Eigen::Index>(rx.size());
        const auto mt = static_cast<Eigen::Index>(tx.size());
        Eigen::MatrixXcd crx = Eigen::MatrixXcd::Zero(mr, mr), ctx = Eigen::MatrixXcd::Zero(mt, mt);
        Eigen::MatrixXcd h(mr, mt);
        double n_vec = 0.0;
        for (std::size_t s = 0; s < obs.n_snapshots; ++s)
            for (std::size_t k = 0; k < mf; ++k) {
                h.setZero();
                for (std::size_t e = 0; e < obs.n_entries; ++e)
                    h(obs.rx[e], obs.tx[e]) = obs.entry(s, e)[k];
                crx += h * h.adjoint();
                ctx += h.transpose() * h.conjugate();
                n_vec += 1.0;
            }
        crx -= (n_vec * static_cast<double>(mt) * prof.noise_var) * Eigen::MatrixXcd::Identity(mr, mr);
        ctx -= (n_vec * static_cast<double>(mr) * prof.noise_var) * Eigen::MatrixXcd::Identity(mt, mt);
        if (mr >= 2)
            prof.theta_r = fit_angles(crx, rx, cfg);
        if (mt >= 2)
            prof.theta_t = fit_angles(ctx, tx, cfg);
    }
    return fit;
}

} // namespace mmsound::estimation
