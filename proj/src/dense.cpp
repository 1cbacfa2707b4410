// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>

#include "mmsound/channel.hpp"
#include "mmsound/parallel.hpp"
#include "mmsound/rng.hpp"

namespace mmsound::channel {

CVec freq_psd(const FreqProfile& theta_f, std::size_t m_f, double tone_spacing_hz)
{
    require(theta_f.beta_d > 0.0, "freq_psd: beta_d must be > 0");
    require(m_f >= 1, "freq_psd: m_f must be >= 1");
    require(tone_spacing_hz > 0.0, "freq_psd: tone spacing must be positive");
    const double tau_norm = theta_f.tau_d_s * tone_spacing_hz;
    const double m = static_cast<double>(m_f);
    CVec lambda(m_f);
    for (std::size_t k = 0; k < m_f; ++k) {
        const double kk = static_cast<double>(k);
        lambda[k] = (theta_f.gamma1 / m) * std::polar(1.0, -kTwoPi * kk * tau_norm) / cplx(theta_f.beta_d, kTwoPi * kk / m);
    }
    return lambda;
}

Eigen::MatrixXcd toeplitz_hermitian(const CVec& lambda)
{
    const auto n = static_cast<Eigen::Index>(lambda.size());
    Eigen::MatrixXcd r(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            r(i, j) = i >= j ? lambda[static_cast<std::size_t>(i - j)] : std::conj(lambda[static_cast<std::size_t>(j - i)]);
    return r;
}

std::vector<double> von_mises_weights(const AngularProfile& p, const arrays::AngleGrid& grid)
{
    grid.validate();
    require(p.kappa_az >= 0.0 && p.kappa_el >= 0.0, "von Mises: kappa must be >= 0");
    const std::size_t na = grid.n_az(), ne = grid.n_el();
    std::vector<double> w(na * ne);
    double sum = 0.0;
    for (std::size_t j = 0; j < ne; ++j) {
        const double el = grid.el_rad(j);
        const double area = std::max(std::cos(el), 0.0);
        const double we = std::exp(p.kappa_el * (std::cos(el - p.mu_el_rad) - 1.0));
        for (std::size_t i = 0; i < na; ++i) {
            const double v = area * we * std::exp(p.kappa_az * (std::cos(grid.az_rad(i) - p.mu_az_rad) - 1.0));
            w[j * na + i] = v;
            sum += v;
        }
    }
    require(sum > 0.0, "von Mises: weights vanish on the grid");
    for (auto& v : w)
        v /= sum;
    return w;
}

Eigen::MatrixXcd angular_covariance(const std::vector<Eigen::MatrixXcd>& responses, const std::vector<double>& weights,
                                    double amplitude)
{
    require(!responses.empty() && responses.size() == weights.size(), "angular covariance: responses and weights differ in size");
    const Eigen::Index m = responses.front().rows();
    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(m, m);
    for (std::size_t c = 0; c < responses.size(); ++c) {
        if (weights[c] == 0.0)
            continue;
        require(responses[c].rows() == m, "angular covariance: inconsistent response sizes");
        r.noalias() += weights[c] * responses[c] * responses[c].adjoint();
    }
    const double mean_diag = r.diagonal().real().mean();
    require(mean_diag > 0.0, "angular covariance: manifold has no power over the angular density");
    r *= amplitude / mean_diag;
    return 0.5 * (r + r.adjoint());
}

Eigen::MatrixXcd angular_covariance(const arrays::ArrayManifold& manifold, const AngularProfile& profile,
                                    const arrays::AngleGrid& grid)
{
    const auto w = von_mises_weights(profile, grid);
    const double wmax = *std::max_element(w.begin(), w.end());
    std::vector<Eigen::MatrixXcd> responses(w.size());
    std::vector<double> used(w.size(), 0.0);
    const std::size_t na = grid.n_az();
    parallel_for(w.size(), [&](std::size_t c) {
        if (w[c] <= 1e-14 * wmax)
            return;
        responses[c] = manifold.response(grid.az_rad(c % na), grid.el_rad(c / na));
        used[c] = w[c];
    });
    for (auto& r : responses)
        if (r.size() == 0)
            r = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(manifold.size()), 2);
    return angular_covariance(responses, used, profile.amp_az * profile.amp_el);
}

CVec kron3_apply(const Eigen::MatrixXcd& a_r, const Eigen::MatrixXcd& a_t, const Eigen::MatrixXcd& a_f, const CVec& x)
{
    const Eigen::Index mr = a_r.cols(), mt = a_t.cols(), mf = a_f.cols();
    require(static_cast<std::size_t>(mr * mt * mf) == x.size(), "kron3: vector length mismatch");
    // Column-major view: each column is one (r, t) frequency vector.
    Eigen::MatrixXcd y = a_f * Eigen::Map<const Eigen::MatrixXcd>(x.data(), mf, mr * mt);
    const Eigen::Index of = a_f.rows();
    const Eigen::Index ot = a_t.rows();
    const Eigen::Index orr = a_r.rows();
    Eigen::MatrixXcd z(of, ot * mr);
    for (Eigen::Index r = 0; r < mr; ++r)
        z.middleCols(r * ot, ot) = y.middleCols(r * mt, mt) * a_t.transpose();
    Eigen::Map<Eigen::MatrixXcd> zz(z.data(), of * ot, mr);
    Eigen::MatrixXcd w = zz * a_r.transpose();
    CVec out(static_cast<std::size_t>(of * ot * orr));
    Eigen::Map<Eigen::MatrixXcd>(out.data(), of * ot, orr) = w;
    return out;
}

namespace {

Eigen::MatrixXcd hermitian_sqrt(const Eigen::MatrixXcd& r, Eigen::VectorXd& eig, double& clipped)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r);
    if (es.info() != Eigen::Success)
        throw NumericalError("covariance eigendecomposition failed");
    eig = es.eigenvalues();
    const double trace = std::max(eig.cwiseAbs().sum(), std::numeric_limits<double>::min());
    double neg = 0.0;
    Eigen::VectorXd s(eig.size());
    for (Eigen::Index i = 0; i < eig.size(); ++i) {
        if (eig(i) < 0.0)
            neg -= eig(i);
        s(i) = std::sqrt(std::max(eig(i), 0.0));
    }
    clipped = neg / trace;
    return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace

KroneckerCovariance::KroneckerCovariance(Eigen::MatrixXcd r_rx, Eigen::MatrixXcd r_tx, Eigen::MatrixXcd r_f)
    : r_rx_(std::move(r_rx)), r_tx_(std::move(r_tx)), r_f_(std::move(r_f))
{
    for (const auto* m : {&r_rx_, &r_tx_, &r_f_}) {
        require(m->rows() == m->cols() && m->rows() > 0, "Kronecker covariance: factors must be square and non-empty");
        require(m->allFinite(), "Kronecker covariance: non-finite factor");
        require((*m - m->adjoint()).norm() <= 1e-9 * std::max(m->norm(), 1e-300), "Kronecker covariance: factor is not Hermitian");
    }
    double c1 = 0.0, c2 = 0.0, c3 = 0.0;
    s_rx_ = hermitian_sqrt(r_rx_, e_rx_, c1);
    s_tx_ = hermitian_sqrt(r_tx_, e_tx_, c2);
    s_f_ = hermitian_sqrt(r_f_, e_f_, c3);
    clipped_ = std::max({c1, c2, c3});
    if (clipped_ > 1e-6)
        throw NumericalError("Kronecker covariance: factor is not positive semidefinite (clipped eigenvalue mass " +
                             std::to_string(clipped_) + " of trace)");
}

CVec KroneckerCovariance::apply(const CVec& x) const { return kron3_apply(r_rx_, r_tx_, r_f_, x); }

CVec KroneckerCovariance::apply_sqrt(const CVec& white) const { return kron3_apply(s_rx_, s_tx_, s_f_, white); }

CVec KroneckerCovariance::sample(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) const
{
    RandomStream rs(seed, stream);
    CVec w(size());
    for (auto& v : w)
        v = rs.complex_normal(1.0);
    return apply_sqrt(w);
}

Eigen::VectorXd KroneckerCovariance::eigenvalues() const
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
    Eigen::Index k = 0;
    for (Eigen::Index a = 0; a < e_rx_.size(); ++a)
        for (Eigen::Index b = 0; b < e_tx_.size(); ++b)
            for (Eigen::Index c = 0; c < e_f_.size(); ++c)
                out(k++) = e_rx_(a) * e_tx_(b) * e_f_(c);
    std::sort(out.data(), out.data() + out.size());
    return out;
}

Eigen::MatrixXcd KroneckerCovariance::materialize() const
{
    const auto n = static_cast<Eigen::Index>(size());
    const Eigen::Index mt = r_tx_.rows(), mf = r_f_.rows();
    Eigen::MatrixXcd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out(i, j) = r_rx_(i / (mt * mf), j / (mt * mf)) * r_tx_((i / mf) % mt, (j / mf) % mt) * r_f_(i % mf, j % mf);
    return out;
}

KroneckerCovariance dense_covariance(const DenseProfile& dense, const arrays::ArrayManifold& tx,
                                     const arrays::ArrayManifold& rx, std::size_t m_f, double tone_spacing_hz,
                                     const arrays::AngleGrid& grid)
{
    dense.validate();
    return {angular_covariance(rx, dense.theta_r, grid), angular_covariance(tx, dense.theta_t, grid),
            toeplitz_hermitian(freq_psd(dense.theta_f, m_f, tone_spacing_hz))};
}

} // namespace mmsound::channel
