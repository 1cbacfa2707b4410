// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mmsound/arrays.hpp"
#include "mmsound/fft.hpp"
#include "mmsound/parallel.hpp"

namespace mmsound::arrays {

namespace {

// Frequency of the extended elevation axis: source rows plus the rows that
// continue over the pole onto the back hemisphere.
struct ExtendedShape {
    std::size_t n_el_src;
    std::size_t n_el_ext;
    std::size_t n_az;
};

ExtendedShape extended_shape(const AngleGrid& g)
{
    require(std::abs(g.el_min_deg + 90.0) < 1e-9 && std::abs(g.el_max_deg - 90.0) < 1e-9,
            "EADF: elevation grid must span [-90, 90] deg");
    require(g.n_el() >= 2, "EADF: elevation grid needs at least two rows");
    const std::size_t half = g.n_az() / 2;
    require(g.n_az() % 2 == 0 && half >= 1, "EADF: azimuth sample count must be even");
    return {g.n_el(), 2 * (g.n_el() - 1), g.n_az()};
}

void extend_slice(const cplx* src, cplx* ext, const ExtendedShape& s, int pole_sign)
{
    std::copy(src, src + s.n_el_src * s.n_az, ext);
    const std::size_t half = s.n_az / 2;
    for (std::size_t k = 1; k + 1 < s.n_el_src; ++k) {
        const std::size_t src_row = s.n_el_src - 1 - k;
        cplx* row = ext + (s.n_el_src - 1 + k) * s.n_az;
        for (std::size_t i = 0; i < s.n_az; ++i)
            row[i] = static_cast<double>(pole_sign) * src[src_row * s.n_az + (i + half) % s.n_az];
    }
}

// Maps a signed harmonic order onto an FFT bin, returning the weight that
// splits the Nyquist term between +N/2 and -N/2.
std::pair<std::size_t, double> fft_bin(int order, std::size_t n)
{
    const auto ni = static_cast<long>(n);
    long b = order % ni;
    if (b < 0)
        b += ni;
    const double w = (n % 2 == 0 && std::labs(order) == ni / 2) ? 0.5 : 1.0;
    return {static_cast<std::size_t>(b), w};
}

double frobenius_error_db(double err2, double ref2)
{
    if (ref2 <= 0.0)
        return err2 <= 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    if (err2 <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(err2 / ref2);
}

} // namespace

std::size_t Eadf::nearest_frequency(double frequency_hz) const
{
    require(!frequencies_hz.empty(), "EADF has no frequencies");
    std::size_t best = 0;
    for (std::size_t i = 1; i < frequencies_hz.size(); ++i)
        if (std::abs(frequencies_hz[i] - frequency_hz) < std::abs(frequencies_hz[best] - frequency_hz))
            best = i;
    double tol = 0.5e9;
    if (frequencies_hz.size() > 1) {
        double step = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < frequencies_hz.size(); ++i)
            step = std::min(step, std::abs(frequencies_hz[i] - frequencies_hz[i - 1]));
        tol = step / 2.0;
    }
    require(std::abs(frequencies_hz[best] - frequency_hz) <= tol * (1.0 + 1e-12),
            "frequency " + std::to_string(frequency_hz) + " Hz is outside the calibrated band");
    return best;
}

Eadf compute_eadf(const PatternGrid& grid, const Truncation& truncation, int pole_sign)
{
    grid.validate();
    require(pole_sign == 1 || pole_sign == -1, "EADF: pole sign must be +1 or -1");
    const ExtendedShape s = extended_shape(grid.angles);
    const std::size_t n_slices = grid.n_elements * 2 * grid.frequencies_hz.size();
    const std::size_t ext_size = s.n_el_ext * s.n_az;
    const int p_full = static_cast<int>(s.n_el_ext / 2);
    const int q_full = static_cast<int>(s.n_az / 2);

    // Spectra of every extended slice, normalised by the grid size.
    CVec spectra(n_slices * ext_size);
    parallel_for(n_slices, [&](std::size_t k) {
        CVec ext(ext_size);
        extend_slice(grid.gains.data() + k * grid.slice_size(), ext.data(), s, pole_sign);
        std::span<cplx> out(spectra.data() + k * ext_size, ext_size);
        fft::forward2d(ext, out, s.n_el_ext, s.n_az);
        for (auto& v : out)
            v /= static_cast<double>(ext_size);
    });

    const double el0 = deg2rad(grid.angles.el_min_deg);
    const double az0 = -kPi;

    auto coefficient = [&](std::size_t slice, int p, int q) {
        const auto [bp, wp] = fft_bin(p, s.n_el_ext);
        const auto [bq, wq] = fft_bin(q, s.n_az);
        return wp * wq * spectra[slice * ext_size + bp * s.n_az + bq] * std::polar(1.0, -(p * el0 + q * az0));
    };

    // Source-node error of a truncation, from an inverse transform of the
    // retained coefficients.
    double ref2 = 0.0;
    for (const auto& g : grid.gains)
        ref2 += std::norm(g);
    auto source_error_db = [&](int P, int Q) {
        std::vector<double> err(n_slices, 0.0);
        parallel_for(n_slices, [&](std::size_t k) {
            CVec trunc(ext_size, cplx{});
            for (int p = -P; p <= P; ++p) {
                const auto [bp, wp] = fft_bin(p, s.n_el_ext);
                for (int q = -Q; q <= Q; ++q) {
                    const auto [bq, wq] = fft_bin(q, s.n_az);
                    // Split Nyquist bins land on the same FFT bin twice.
                    trunc[bp * s.n_az + bq] += wp * wq * spectra[k * ext_size + bp * s.n_az + bq];
                }
            }
            CVec rec(ext_size);
            fft::inverse2d(trunc, rec, s.n_el_ext, s.n_az);
            const cplx* src = grid.gains.data() + k * grid.slice_size();
            for (std::size_t i = 0; i < grid.slice_size(); ++i)
                err[k] += std::norm(rec[i] - src[i]);
        });
        return frobenius_error_db(std::accumulate(err.begin(), err.end(), 0.0), ref2);
    };

    int P = p_full;
    int Q = q_full;
    double error_db;
    if (truncation.auto_select) {
        // Candidates ordered by coefficient count; the extended-grid energy of
        // the discarded terms screens them before the exact check.
        std::vector<double> energy(ext_size, 0.0);
        for (std::size_t k = 0; k < n_slices; ++k)
            for (std::size_t i = 0; i < ext_size; ++i)
                energy[i] += std::norm(spectra[k * ext_size + i]);
        const double total = std::accumulate(energy.begin(), energy.end(), 0.0);
        struct Candidate {
            int p, q;
            double kept;
        };
        std::vector<Candidate> cands;
        for (int p = 0; p <= p_full; ++p) {
            for (int q = 0; q <= q_full; ++q) {
                double kept = 0.0;
                for (int pp = -p; pp <= p; ++pp) {
                    const auto [bp, wp] = fft_bin(pp, s.n_el_ext);
                    for (int qq = -q; qq <= q; ++qq) {
                        const auto [bq, wq] = fft_bin(qq, s.n_az);
                        kept += wp * wq * energy[bp * s.n_az + bq];
                    }
                }
                cands.push_back({p, q, kept});
            }
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            return (2 * a.p + 1) * (2 * a.q + 1) < (2 * b.p + 1) * (2 * b.q + 1);
        });
        error_db = source_error_db(p_full, q_full);
        for (const auto& c : cands) {
            const double est = frobenius_error_db(std::max(total - c.kept, 0.0), total);
            if (est > truncation.max_error_db + 3.0)
                continue;
            const double e = source_error_db(c.p, c.q);
            if (e <= truncation.max_error_db) {
                P = c.p;
                Q = c.q;
                error_db = e;
                break;
            }
        }
        require(error_db <= truncation.max_error_db,
                "EADF: no truncation meets the requested reconstruction error bound");
    } else {
        if (truncation.el_order >= 0)
            P = std::min(truncation.el_order, p_full);
        if (truncation.az_order >= 0)
            Q = std::min(truncation.az_order, q_full);
        error_db = source_error_db(P, Q);
    }

    Eadf out;
    out.n_elements = grid.n_elements;
    out.frequencies_hz = grid.frequencies_hz;
    out.el_order = P;
    out.az_order = Q;
    out.pole_sign = pole_sign;
    out.source_grid = grid.angles;
    out.source_checksum = grid.checksum();
    out.reconstruction_error_db = error_db;
    out.coefficients.resize(n_slices * out.n_p() * out.n_q());
    for (std::size_t k = 0; k < n_slices; ++k)
        for (int p = -P; p <= P; ++p)
            for (int q = -Q; q <= Q; ++q)
                out.coefficients[(k * out.n_p() + static_cast<std::size_t>(p + P)) * out.n_q() + static_cast<std::size_t>(q + Q)] =
                    coefficient(k, p, q);
    return out;
}

namespace {

void evaluate(const Eadf& eadf, std::size_t f, double az, double el, Eigen::MatrixXcd& value, Eigen::MatrixXcd* d_az,
              Eigen::MatrixXcd* d_el)
{
    const int P = eadf.el_order;
    const int Q = eadf.az_order;
    CVec ea(eadf.n_q()), ee(eadf.n_p());
    for (int q = -Q; q <= Q; ++q)
        ea[static_cast<std::size_t>(q + Q)] = std::polar(1.0, q * az);
    for (int p = -P; p <= P; ++p)
        ee[static_cast<std::size_t>(p + P)] = std::polar(1.0, p * el);

    value.resize(static_cast<Eigen::Index>(eadf.n_elements), 2);
    if (d_az)
        d_az->resize(value.rows(), 2);
    if (d_el)
        d_el->resize(value.rows(), 2);
    const cplx j(0.0, 1.0);
    for (std::size_t e = 0; e < eadf.n_elements; ++e) {
        for (std::size_t pol = 0; pol < 2; ++pol) {
            const cplx* c = &eadf.coefficients[((e * 2 + pol) * eadf.frequencies_hz.size() + f) * eadf.n_p() * eadf.n_q()];
            cplx v{}, va{}, ve{};
            for (int p = -P; p <= P; ++p) {
                cplx row{}, row_a{};
                const cplx* cr = c + static_cast<std::size_t>(p + P) * eadf.n_q();
                for (int q = -Q; q <= Q; ++q) {
                    const cplx t = cr[q + Q] * ea[static_cast<std::size_t>(q + Q)];
                    row += t;
                    row_a += static_cast<double>(q) * t;
                }
                const cplx w = ee[static_cast<std::size_t>(p + P)];
                v += row * w;
                va += row_a * w;
                ve += static_cast<double>(p) * row * w;
            }
            const auto r = static_cast<Eigen::Index>(e);
            const auto col = static_cast<Eigen::Index>(pol);
            value(r, col) = v;
            if (d_az)
                (*d_az)(r, col) = j * va;
            if (d_el)
                (*d_el)(r, col) = j * ve;
        }
    }
}

} // namespace

Eigen::MatrixXcd manifold(const Eadf& eadf, double az_rad, double el_rad, double frequency_hz)
{
    Eigen::MatrixXcd v;
    evaluate(eadf, eadf.nearest_frequency(frequency_hz), az_rad, el_rad, v, nullptr, nullptr);
    return v;
}

ArrayManifold::ArrayManifold(Eadf eadf, double frequency_hz, double fov_az_min_rad, double fov_az_max_rad)
    : eadf_(std::move(eadf)), fov_min_(fov_az_min_rad), fov_max_(fov_az_max_rad)
{
    require(fov_max_ > fov_min_ && fov_max_ - fov_min_ <= kTwoPi + 1e-12, "manifold: invalid azimuth field of view");
    freq_index_ = eadf_.nearest_frequency(frequency_hz);
}

bool ArrayManifold::in_fov(double az_rad) const
{
    if (fov_max_ - fov_min_ >= kTwoPi - 1e-12)
        return true;
    double d = std::fmod(az_rad - fov_min_, kTwoPi);
    if (d < 0.0)
        d += kTwoPi;
    return d <= fov_max_ - fov_min_ + 1e-12;
}

Eigen::MatrixXcd ArrayManifold::response(double az_rad, double el_rad) const
{
    Eigen::MatrixXcd v;
    evaluate(eadf_, freq_index_, az_rad, el_rad, v, nullptr, nullptr);
    return v;
}

void ArrayManifold::response(double az_rad, double el_rad, Eigen::MatrixXcd& value, Eigen::MatrixXcd* d_az,
                             Eigen::MatrixXcd* d_el) const
{
    evaluate(eadf_, freq_index_, az_rad, el_rad, value, d_az, d_el);
}

} // namespace mmsound::arrays
