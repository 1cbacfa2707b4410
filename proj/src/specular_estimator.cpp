// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <ceres/ceres.h>

#include "mmsound/estimation.hpp"
#include "mmsound/fft.hpp"
#include "mmsound/parallel.hpp"

namespace mmsound::estimation {

namespace {

// tau_ns, az_r, el_r, az_t, el_t, nu_hz, Re gamma[4], Im gamma[4]; gamma row-major (rx pol, tx pol).
constexpr int kBlock = 14;
using ParamBlock = std::array<double, kBlock>;

ParamBlock pack(const channel::SpecularPath& p)
{
    ParamBlock b{};
    b[0] = p.delay_s * 1e9;
    b[1] = p.aoa_az_rad;
    b[2] = p.aoa_el_rad;
    b[3] = p.aod_az_rad;
    b[4] = p.aod_el_rad;
    b[5] = p.doppler_hz;
    for (int i = 0; i < 4; ++i) {
        b[static_cast<std::size_t>(6 + i)] = p.gain(i / 2, i % 2).real();
        b[static_cast<std::size_t>(10 + i)] = p.gain(i / 2, i % 2).imag();
    }
    return b;
}

channel::SpecularPath unpack(const double* b)
{
    channel::SpecularPath p;
    p.delay_s = std::max(b[0], 0.0) * 1e-9;
    double el_r = b[2], az_r = b[1], el_t = b[4], az_t = b[3];
    p.aoa_az_rad = wrap_pi(az_r);
    p.aoa_el_rad = std::clamp(el_r, -kPi / 2, kPi / 2);
    p.aod_az_rad = wrap_pi(az_t);
    p.aod_el_rad = std::clamp(el_t, -kPi / 2, kPi / 2);
    p.doppler_hz = b[5];
    for (int i = 0; i < 4; ++i)
        p.gain(i / 2, i % 2) = {b[6 + i], b[10 + i]};
    return p;
}

// Residual target - sum of path models, split into real and imaginary rows.
class SpecularCost final : public ceres::CostFunction {
public:
    SpecularCost(const Observation& obs, const CVec& target, const arrays::ArrayManifold& tx,
                 const arrays::ArrayManifold& rx, std::size_t n_paths)
        : obs_(obs), target_(target), tx_(tx), rx_(rx), n_paths_(n_paths)
    {
        set_num_residuals(static_cast<int>(2 * obs.size()));
        for (std::size_t i = 0; i < n_paths; ++i)
            mutable_parameter_block_sizes()->push_back(kBlock);
    }

    bool Evaluate(double const* const* params, double* residuals, double** jacobians) const override
    {
        const std::size_t mf = obs_.m_f();
        const std::size_t n = obs_.size();
        for (std::size_t i = 0; i < n; ++i) {
            residuals[2 * i] = target_[i].real();
            residuals[2 * i + 1] = target_[i].imag();
        }
        const cplx j(0.0, 1.0);
        for (std::size_t l = 0; l < n_paths_; ++l) {
            const double* b = params[l];
            Eigen::MatrixXcd br, br_a, br_e, bt, bt_a, bt_e;
            rx_.response(b[1], b[2], br, &br_a, &br_e);
            tx_.response(b[3], b[4], bt, &bt_a, &bt_e);
            Eigen::Matrix2cd g;
            for (int i = 0; i < 4; ++i)
                g(i / 2, i % 2) = {b[6 + i], b[10 + i]};
            const double tau = b[0] * 1e-9;
            CVec d(mf), dtau(mf);
            for (std::size_t k = 0; k < mf; ++k) {
                d[k] = std::polar(1.0, -kTwoPi * obs_.frequencies_hz[k] * tau);
                dtau[k] = d[k] * (-j * kTwoPi * obs_.frequencies_hz[k] * 1e-9);
            }
            double* jac = jacobians ? jacobians[l] : nullptr;
            for (std::size_t s = 0; s < obs_.n_snapshots; ++s) {
                for (std::size_t e = 0; e < obs_.n_entries; ++e) {
                    const auto r = obs_.rx[e];
                    const auto t = obs_.tx[e];
                    const double time = obs_.time(s, e);
                    const cplx p = std::polar(1.0, kTwoPi * b[5] * time);
                    const Eigen::RowVector2cd vr = br.row(r), vt = bt.row(t);
                    const cplx c0 = (vr * g * vt.transpose())(0, 0) * p;
                    const std::size_t base = (s * obs_.n_entries + e) * mf;
                    for (std::size_t k = 0; k < mf; ++k) {
                        const cplx m = c0 * d[k];
                        residuals[2 * (base + k)] -= m.real();
                        residuals[2 * (base + k) + 1] -= m.imag();
                    }
                    if (!jac)
                        continue;
                    std::array<cplx, kBlock> c{};
                    c[1] = (br_a.row(r) * g * vt.transpose())(0, 0) * p;
                    c[2] = (br_e.row(r) * g * vt.transpose())(0, 0) * p;
                    c[3] = (vr * g * bt_a.row(t).transpose())(0, 0) * p;
                    c[4] = (vr * g * bt_e.row(t).transpose())(0, 0) * p;
                    c[5] = c0 * (j * kTwoPi * time);
                    for (int i = 0; i < 4; ++i) {
                        c[static_cast<std::size_t>(6 + i)] = vr(i / 2) * vt(i % 2) * p;
                        c[static_cast<std::size_t>(10 + i)] = j * c[static_cast<std::size_t>(6 + i)];
                    }
                    for (std::size_t k = 0; k < mf; ++k) {
                        double* row_re = jac + 2 * (base + k) * kBlock;
                        double* row_im = row_re + kBlock;
                        const cplx dt = c0 * dtau[k];
                        row_re[0] = -dt.real();
                        row_im[0] = -dt.imag();
                        for (int q = 1; q < kBlock; ++q) {
                            const cplx v = c[static_cast<std::size_t>(q)] * d[k];
                            row_re[q] = -v.real();
                            row_im[q] = -v.imag();
                        }
                    }
                }
            }
        }
        return true;
    }

private:
    const Observation& obs_;
    const CVec& target_;
    const arrays::ArrayManifold& tx_;
    const arrays::ArrayManifold& rx_;
    std::size_t n_paths_;
};

struct RefineOutcome {
    int iterations = 0;
    bool converged = true;
    std::string message;
};

void set_bounds(ceres::Problem& problem, double* b, const arrays::ArrayManifold& tx, const arrays::ArrayManifold& rx)
{
    const double el_lim = kPi / 2 - 1e-6;
    problem.SetParameterLowerBound(b, 0, 0.0);
    const bool rx_full = rx.fov_az_max() - rx.fov_az_min() >= kTwoPi - 1e-9;
    const bool tx_full = tx.fov_az_max() - tx.fov_az_min() >= kTwoPi - 1e-9;
    problem.SetParameterLowerBound(b, 1, rx_full ? -2 * kTwoPi : rx.fov_az_min());
    problem.SetParameterUpperBound(b, 1, rx_full ? 2 * kTwoPi : rx.fov_az_max());
    problem.SetParameterLowerBound(b, 2, -el_lim);
    problem.SetParameterUpperBound(b, 2, el_lim);
    problem.SetParameterLowerBound(b, 3, tx_full ? -2 * kTwoPi : tx.fov_az_min());
    problem.SetParameterUpperBound(b, 3, tx_full ? 2 * kTwoPi : tx.fov_az_max());
    problem.SetParameterLowerBound(b, 4, -el_lim);
    problem.SetParameterUpperBound(b, 4, el_lim);
}

RefineOutcome refine(const Observation& obs, const CVec& target, const arrays::ArrayManifold& tx,
                     const arrays::ArrayManifold& rx, std::vector<ParamBlock>& blocks, int max_iterations)
{
    ceres::Problem::Options popts;
    popts.cost_function_ownership = ceres::TAKE_OWNERSHIP;
    ceres::Problem problem(popts);
    std::vector<double*> ptrs;
    for (auto& b : blocks)
        ptrs.push_back(b.data());
    problem.AddResidualBlock(new SpecularCost(obs, target, tx, rx, blocks.size()), nullptr, ptrs);
    for (auto* p : ptrs)
        set_bounds(problem, p, tx, rx);

    ceres::Solver::Options opts;
    opts.minimizer_type = ceres::TRUST_REGION;
    opts.trust_region_strategy_type = ceres::LEVENBERG_MARQUARDT;
    opts.linear_solver_type = ceres::DENSE_NORMAL_CHOLESKY;
    opts.max_num_iterations = max_iterations;
    opts.num_threads = 1;
    opts.function_tolerance = 1e-10;
    opts.gradient_tolerance = 1e-14;
    opts.parameter_tolerance = 1e-10;
    opts.logging_type = ceres::SILENT;
    ceres::Solver::Summary summary;
    ceres::Solve(opts, &problem, &summary);

    RefineOutcome out;
    out.iterations = static_cast<int>(summary.iterations.size());
    out.converged = summary.termination_type == ceres::CONVERGENCE;
    if (summary.termination_type == ceres::FAILURE)
        throw NumericalError("path refinement failed: " + summary.message);
    if (!out.converged)
        out.message = summary.message;
    return out;
}

double power_of(const CVec& v)
{
    double p = 0.0;
    for (const auto& x : v)
        p += std::norm(x);
    return p;
}

std::vector<SpecularEstimator::Cell> build_cells(const arrays::ArrayManifold& m, const SpecularConfig& cfg)
{
    std::vector<std::pair<double, double>> angles;
    const auto n_az = static_cast<long>(std::llround(360.0 / cfg.az_step_deg));
    const auto n_el = static_cast<long>(std::floor((cfg.el_max_deg - cfg.el_min_deg) / cfg.el_step_deg + 1e-9)) + 1;
    // Azimuth-major order so ties resolve to the lowest azimuth index.
    for (long i = 0; i < n_az; ++i) {
        const double az = deg2rad(-180.0 + cfg.az_step_deg * static_cast<double>(i));
        if (!m.in_fov(az))
            continue;
        for (long jj = 0; jj < n_el; ++jj)
            angles.emplace_back(az, deg2rad(cfg.el_min_deg + cfg.el_step_deg * static_cast<double>(jj)));
    }
    std::vector<SpecularEstimator::Cell> cells(angles.size());
    parallel_for(angles.size(), [&](std::size_t c) {
        const Eigen::MatrixXcd b = m.response(angles[c].first, angles[c].second);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(b, Eigen::ComputeThinU);
        const auto sv = svd.singularValues();
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > 1e-6 * sv(0) && sv(0) > 1e-12)
                ++rank;
        cells[c] = {angles[c].first, angles[c].second, svd.matrixU().leftCols(rank)};
    });
    return cells;
}

std::size_t best_cell(const std::vector<SpecularEstimator::Cell>& cells, const Eigen::MatrixXcd& x)
{
    std::vector<double> score(cells.size(), 0.0);
    parallel_for(cells.size(), [&](std::size_t c) {
        if (cells[c].basis.cols() > 0)
            score[c] = (cells[c].basis.adjoint() * x).squaredNorm();
    });
    std::size_t best = 0;
    for (std::size_t c = 1; c < cells.size(); ++c)
        if (score[c] > score[best])
            best = c;
    return best;
}

} // namespace

SpecularEstimator::SpecularEstimator(arrays::ArrayManifold tx, arrays::ArrayManifold rx, SpecularConfig config)
    : tx_(std::move(tx)), rx_(std::move(rx)), config_(config)
{
    require(config_.max_paths >= 1 || config_.max_paths == 0, "estimator: invalid path count");
    require(config_.delay_oversampling >= 1, "estimator: delay oversampling must be >= 1");
    require(config_.az_step_deg > 0.0 && config_.el_step_deg > 0.0, "estimator: angle steps must be positive");
    require(config_.el_min_deg >= -90.0 && config_.el_max_deg <= 90.0 && config_.el_min_deg <= config_.el_max_deg,
            "estimator: elevation range must lie in [-90, 90]");
    require(config_.max_iterations >= 1, "estimator: max_iterations must be >= 1");
    tx_cells_ = build_cells(tx_, config_);
    rx_cells_ = build_cells(rx_, config_);
    require(!tx_cells_.empty() && !rx_cells_.empty(), "estimator: angle grid does not intersect the field of view");
}

EstimationResult SpecularEstimator::estimate(const Observation& obs_in) const
{
    obs_in.validate();
    require(obs_in.m_f() >= 2, "estimator: at least two tones required");
    for (std::size_t e = 0; e < obs_in.n_entries; ++e)
        require(obs_in.tx[e] >= 0 && static_cast<std::size_t>(obs_in.tx[e]) < tx_.size() && obs_in.rx[e] >= 0 &&
                    static_cast<std::size_t>(obs_in.rx[e]) < rx_.size(),
                "estimator: entry antenna index outside the manifold");

    // Larger inputs are decimated in frequency.
    Observation obs = obs_in;
    if (obs.m_f() > config_.max_tones) {
        const std::size_t step = (obs.m_f() + config_.max_tones - 1) / config_.max_tones;
        Observation d = obs;
        d.frequencies_hz.clear();
        for (std::size_t k = 0; k < obs.m_f(); k += step)
            d.frequencies_hz.push_back(obs.frequencies_hz[k]);
        d.values.clear();
        for (std::size_t i = 0; i < obs.n_snapshots * obs.n_entries; ++i)
            for (std::size_t k = 0; k < obs.m_f(); k += step)
                d.values.push_back(obs.values[i * obs.m_f() + k]);
        obs = std::move(d);
    }

    const std::size_t mf = obs.m_f();
    const std::size_t n_se = obs.n_snapshots * obs.n_entries;
    const double df = obs.frequencies_hz[1] - obs.frequencies_hz[0];
    require(df > 0.0, "estimator: tones must increase");
    const std::vector<double> w = sounder::hann_window(mf);
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);

    const double frame = obs.frame_duration_s > 0.0 ? obs.frame_duration_s : obs.snapshot_duration_s / static_cast<double>(obs.n_entries);
    const double span = std::max(obs.snapshot_duration_s * static_cast<double>(obs.n_snapshots), frame);
    const double nu_max = config_.doppler_max_hz > 0.0 ? config_.doppler_max_hz : 1.0 / (2.0 * frame);
    const double nu_step = 1.0 / (4.0 * span);
    std::vector<double> nu_grid{0.0};
    for (long i = 1; static_cast<double>(i) * nu_step <= nu_max + 1e-9; ++i) {
        nu_grid.push_back(static_cast<double>(i) * nu_step);
        nu_grid.push_back(-static_cast<double>(i) * nu_step);
    }
    const std::size_t n_delay = mf * config_.delay_oversampling;
    const double n_cells = static_cast<double>(n_delay) * static_cast<double>(nu_grid.size()) *
                           static_cast<double>(rx_cells_.size()) * static_cast<double>(tx_cells_.size());
    const double margin = std::pow(10.0, config_.margin_db / 10.0);
    const double data_power = obs.power();

    EstimationResult result;
    std::vector<ParamBlock> blocks;
    CVec res = obs.values;
    double res_power = data_power;

    while (blocks.size() < config_.max_paths && res_power > 0.0) {
        Observation robs = obs;
        robs.values = res;
        const double sigma2 = late_delay_noise(robs);
        const double threshold = std::max(sigma2 * (4.0 + std::log(n_cells)) * margin, 1e-12 * data_power);

        // Delay: incoherent zero-padded PDP of the windowed residual.
        std::vector<double> pdp(n_delay, 0.0);
        {
            std::vector<std::vector<double>> parts(n_se);
            parallel_for(n_se, [&](std::size_t i) {
                CVec x(n_delay, cplx{});
                for (std::size_t k = 0; k < mf; ++k)
                    x[k] = w[k] * res[i * mf + k];
                const CVec h = fft::inverse(x);
                parts[i].resize(n_delay);
                for (std::size_t n = 0; n < n_delay; ++n)
                    parts[i][n] = std::norm(h[n]);
            });
            for (const auto& p : parts)
                for (std::size_t n = 0; n < n_delay; ++n)
                    pdp[n] += p[n];
        }
        const std::size_t n_best = static_cast<std::size_t>(std::max_element(pdp.begin(), pdp.end()) - pdp.begin());
        if (pdp[n_best] <= 0.0)
            break;
        const double tau = static_cast<double>(n_best) / (static_cast<double>(n_delay) * df);

        // Per-entry delay matched filter.
        CVec z(n_se);
        CVec dconj(mf);
        for (std::size_t k = 0; k < mf; ++k)
            dconj[k] = w[k] * std::polar(1.0, kTwoPi * obs.frequencies_hz[k] * tau) / wsum;
        for (std::size_t i = 0; i < n_se; ++i) {
            cplx acc{};
            for (std::size_t k = 0; k < mf; ++k)
                acc += dconj[k] * res[i * mf + k];
            z[i] = acc;
        }

        // Doppler: energy of the two dominant spatial modes after compensation.
        const auto mr = static_cast<Eigen::Index>(rx_.size());
        const auto mt = static_cast<Eigen::Index>(tx_.size());
        auto doppler_matrix = [&](double nu) {
            Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(mr, mt);
            for (std::size_t s = 0; s < obs.n_snapshots; ++s)
                for (std::size_t e = 0; e < obs.n_entries; ++e)
                    m(obs.rx[e], obs.tx[e]) += z[s * obs.n_entries + e] * std::polar(1.0, -kTwoPi * nu * obs.time(s, e));
            return m;
        };
        std::vector<double> stat(nu_grid.size());
        parallel_for(nu_grid.size(), [&](std::size_t g) {
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(doppler_matrix(nu_grid[g]));
            const auto sv = svd.singularValues();
            double v = 0.0;
            for (Eigen::Index i = 0; i < std::min<Eigen::Index>(2, sv.size()); ++i)
                v += sv(i) * sv(i);
            stat[g] = v;
        });
        const double smax = *std::max_element(stat.begin(), stat.end());
        std::size_t g_best = 0;
        while (stat[g_best] < smax * (1.0 - 1e-9))
            ++g_best;
        const double nu = nu_grid[g_best];
        const Eigen::MatrixXcd mhat = doppler_matrix(nu);

        // Angles: rx, then tx given rx, then rx given tx.
        std::size_t cr = best_cell(rx_cells_, mhat);
        const Eigen::MatrixXcd xr = (rx_cells_[cr].basis.adjoint() * mhat).transpose();
        const std::size_t ct = best_cell(tx_cells_, xr);
        cr = best_cell(rx_cells_, mhat * tx_cells_[ct].basis.conjugate());

        channel::SpecularPath cand;
        cand.delay_s = tau;
        cand.aoa_az_rad = rx_cells_[cr].az;
        cand.aoa_el_rad = rx_cells_[cr].el;
        cand.aod_az_rad = tx_cells_[ct].az;
        cand.aod_el_rad = tx_cells_[ct].el;
        cand.doppler_hz = nu;

        // Polarimetric gain by least squares.
        {
            const Eigen::MatrixXcd br = rx_.response(cand.aoa_az_rad, cand.aoa_el_rad);
            const Eigen::MatrixXcd bt = tx_.response(cand.aod_az_rad, cand.aod_el_rad);
            Eigen::Matrix4cd gram = Eigen::Matrix4cd::Zero();
            Eigen::Vector4cd rhs = Eigen::Vector4cd::Zero();
            for (std::size_t s = 0; s < obs.n_snapshots; ++s)
                for (std::size_t e = 0; e < obs.n_entries; ++e) {
                    const std::size_t i = s * obs.n_entries + e;
                    cplx u{};
                    for (std::size_t k = 0; k < mf; ++k)
                        u += std::polar(1.0, kTwoPi * obs.frequencies_hz[k] * tau) * res[i * mf + k];
                    const cplx p = std::polar(1.0, kTwoPi * nu * obs.time(s, e));
                    Eigen::Vector4cd phi;
                    for (int a = 0; a < 4; ++a)
                        phi(a) = br(obs.rx[e], a / 2) * bt(obs.tx[e], a % 2) * p;
                    gram += static_cast<double>(mf) * phi.conjugate() * phi.transpose();
                    rhs += phi.conjugate() * u;
                }
            const Eigen::Vector4cd g = gram.completeOrthogonalDecomposition().solve(rhs);
            for (int a = 0; a < 4; ++a)
                cand.gain(a / 2, a % 2) = g(a);
        }

        // Refine the new path alone on the residual, then all paths jointly.
        std::vector<ParamBlock> single{pack(cand)};
        auto o1 = refine(obs, res, tx_, rx_, single, config_.max_iterations);
        std::vector<ParamBlock> trial = blocks;
        trial.push_back(single.front());
        auto o2 = refine(obs, obs.values, tx_, rx_, trial, config_.max_iterations);

        std::vector<channel::SpecularPath> trial_paths;
        for (const auto& b : trial)
            trial_paths.push_back(unpack(b.data()));
        const CVec model = model_values(obs, trial_paths, tx_, rx_);
        CVec new_res(obs.size());
        for (std::size_t i = 0; i < new_res.size(); ++i)
            new_res[i] = obs.values[i] - model[i];
        const double new_power = power_of(new_res);
        const double improvement = res_power - new_power;
        if (!(improvement > threshold))
            break;

        blocks = std::move(trial);
        for (auto& b : blocks)
            b = pack(unpack(b.data()));
        res = std::move(new_res);
        res_power = new_power;
        result.improvement.push_back(improvement);
        result.residual_history.push_back(new_power);
        result.iterations += o1.iterations + o2.iterations;
        result.converged = o2.converged;
        result.diagnostic = o2.message;
    }

    std::vector<channel::SpecularPath> paths;
    for (const auto& b : blocks)
        paths.push_back(unpack(b.data()));
    std::vector<std::size_t> order(paths.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return paths[a].power() > paths[b].power(); });
    std::vector<double> imp;
    for (auto i : order) {
        result.paths.push_back(paths[i]);
        imp.push_back(result.improvement[i]);
    }
    result.improvement = imp;

    Observation robs = obs;
    robs.values = res;
    result.noise_var_est = late_delay_noise(robs);
    const double n = static_cast<double>(obs.size());
    if (result.noise_var_est > 0.0)
        result.log_likelihood = -n * std::log(kPi * result.noise_var_est) - res_power / result.noise_var_est;
    return result;
}

EstimationResult estimate_specular(const Observation& obs, const arrays::ArrayManifold& tx,
                                   const arrays::ArrayManifold& rx, const SpecularConfig& config)
{
    return SpecularEstimator(tx, rx, config).estimate(obs);
}

} // namespace mmsound::estimation
