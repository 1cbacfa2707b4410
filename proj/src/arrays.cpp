// SPDX-License-Identifier: Apache-2.0
#include "mmsound/arrays.hpp"

#include <cmath>
#include <algorithm>

#include "mmsound/checksum.hpp"

namespace mmsound::arrays {

std::string to_string(Layout l)
{
    switch (l) {
    case Layout::UpaPanel:
        return "upa_panel";
    case Layout::Octagon:
        return "octagon";
    case Layout::Custom:
        return "custom";
    }
    return "custom";
}

void ArrayGeometry::validate() const
{
    require(!element_positions.empty(), "array geometry: no elements");
    require(element_orientations.size() == element_positions.size() && feed_pol.size() == element_positions.size(),
            "array geometry: per-element field sizes differ");
    for (const auto& o : element_orientations)
        require(std::abs(o.norm() - 1.0) < 1e-9, "array geometry: orientation is not a unit vector");
    for (const auto& p : element_positions)
        require(p.allFinite(), "array geometry: non-finite position");
}

ArrayGeometry ArrayGeometry::upa(int rows, int cols, double spacing_m, bool dual_pol, double face_az_rad,
                                 Eigen::Vector3d center)
{
    require(rows >= 1 && cols >= 1, "upa: rows and cols must be >= 1");
    require(spacing_m > 0.0, "upa: spacing must be positive");
    const Eigen::Vector3d normal(std::cos(face_az_rad), std::sin(face_az_rad), 0.0);
    const Eigen::Vector3d across(-std::sin(face_az_rad), std::cos(face_az_rad), 0.0);
    const Eigen::Vector3d up(0.0, 0.0, 1.0);
    ArrayGeometry g;
    g.layout = Layout::UpaPanel;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const Eigen::Vector3d pos = center + across * ((c - (cols - 1) / 2.0) * spacing_m) +
                                        up * ((r - (rows - 1) / 2.0) * spacing_m);
            const int feeds = dual_pol ? 2 : 1;
            for (int p = 0; p < feeds; ++p) {
                g.element_positions.push_back(pos);
                g.element_orientations.push_back(normal);
                g.feed_pol.push_back(dual_pol ? static_cast<Polarization>(p) : Polarization::V);
            }
        }
    }
    return g;
}

ArrayGeometry ArrayGeometry::octagon(int panel_rows, int panel_cols, double spacing_m, bool dual_pol)
{
    const double width = panel_cols * spacing_m;
    const double apothem = width / (2.0 * std::tan(kPi / 8.0));
    ArrayGeometry g;
    g.layout = Layout::Octagon;
    for (int face = 0; face < 8; ++face) {
        const double az = face * kPi / 4.0;
        const Eigen::Vector3d c(apothem * std::cos(az), apothem * std::sin(az), 0.0);
        auto panel = upa(panel_rows, panel_cols, spacing_m, dual_pol, az, c);
        g.element_positions.insert(g.element_positions.end(), panel.element_positions.begin(), panel.element_positions.end());
        g.element_orientations.insert(g.element_orientations.end(), panel.element_orientations.begin(),
                                      panel.element_orientations.end());
        g.feed_pol.insert(g.feed_pol.end(), panel.feed_pol.begin(), panel.feed_pol.end());
    }
    return g;
}

ArrayGeometry ArrayGeometry::sounder_tx(double carrier_hz)
{
    const double d = kSpeedOfLight / carrier_hz / 2.0;
    ArrayGeometry g;
    g.layout = Layout::UpaPanel;
    for (int pr = 0; pr < 2; ++pr) {
        for (int pc = 0; pc < 2; ++pc) {
            const Eigen::Vector3d c(0.0, (pc - 0.5) * 4.0 * d, (pr - 0.5) * 4.0 * d);
            auto panel = upa(4, 4, d, true, 0.0, c);
            g.element_positions.insert(g.element_positions.end(), panel.element_positions.begin(), panel.element_positions.end());
            g.element_orientations.insert(g.element_orientations.end(), panel.element_orientations.begin(),
                                          panel.element_orientations.end());
            g.feed_pol.insert(g.feed_pol.end(), panel.feed_pol.begin(), panel.feed_pol.end());
        }
    }
    return g;
}

ArrayGeometry ArrayGeometry::sounder_rx(double carrier_hz)
{
    return octagon(4, 4, kSpeedOfLight / carrier_hz / 2.0, true);
}

ArrayGeometry ArrayGeometry::single(Polarization pol)
{
    ArrayGeometry g;
    g.element_positions.push_back(Eigen::Vector3d::Zero());
    g.element_orientations.push_back(Eigen::Vector3d::UnitX());
    g.feed_pol.push_back(pol);
    return g;
}

std::pair<double, double> default_fov(const ArrayGeometry& geometry)
{
    if (geometry.layout == Layout::UpaPanel) {
        const auto& o = geometry.element_orientations.front();
        const double face = std::atan2(o.y(), o.x());
        return {face - kPi / 2.0, face + kPi / 2.0};
    }
    return {-kPi, kPi};
}

std::size_t AngleGrid::n_az() const { return static_cast<std::size_t>(std::llround(360.0 / az_step_deg)); }

std::size_t AngleGrid::n_el() const
{
    return static_cast<std::size_t>(std::llround((el_max_deg - el_min_deg) / el_step_deg)) + 1;
}

void AngleGrid::validate() const
{
    require(az_step_deg > 0.0 && el_step_deg > 0.0, "angle grid: steps must be positive");
    const double naz = 360.0 / az_step_deg;
    require(std::abs(naz - std::round(naz)) < 1e-9, "angle grid: azimuth step must divide 360 deg");
    const double nel = (el_max_deg - el_min_deg) / el_step_deg;
    require(el_min_deg >= -90.0 && el_max_deg <= 90.0 && el_max_deg >= el_min_deg,
            "angle grid: elevation range must lie in [-90, 90]");
    require(std::abs(nel - std::round(nel)) < 1e-9, "angle grid: elevation step must divide the elevation range");
}

void PatternGrid::validate() const
{
    angles.validate();
    require(n_elements >= 1, "pattern grid: no elements");
    require(!frequencies_hz.empty(), "pattern grid: no frequencies");
    require(gains.size() == n_elements * 2 * frequencies_hz.size() * slice_size(), "pattern grid: gain array size mismatch");
    for (const auto& g : gains)
        require(std::isfinite(g.real()) && std::isfinite(g.imag()), "pattern grid: non-finite gain");
}

std::string PatternGrid::checksum() const
{
    std::string header = std::to_string(n_elements) + "|" + std::to_string(angles.az_step_deg) + "|" +
                         std::to_string(angles.el_step_deg) + "|" + std::to_string(angles.el_min_deg) + "|" +
                         std::to_string(angles.el_max_deg);
    for (double f : frequencies_hz)
        header += "|" + std::to_string(f);
    std::vector<unsigned char> bytes(header.begin(), header.end());
    const auto* raw = reinterpret_cast<const unsigned char*>(gains.data());
    bytes.insert(bytes.end(), raw, raw + gains.size() * sizeof(cplx));
    return sha256_hex(bytes);
}

std::vector<double> calibration_frequencies()
{
    std::vector<double> f;
    for (int i = 0; i <= 16; ++i)
        f.push_back(26e9 + 250e6 * i);
    return f;
}

namespace {

// Field exponent q such that cos(hpbw/2)^(2q) = 1/2.
double cosine_exponent(double hpbw_deg)
{
    if (hpbw_deg >= kIsotropicHpbwDeg)
        return 0.0;
    return std::log(0.5) / (2.0 * std::log(std::cos(deg2rad(hpbw_deg / 2.0))));
}

double cosine_lobe(double angle, double q)
{
    if (q == 0.0)
        return 1.0;
    const double c = std::cos(angle);
    return c > 0.0 ? std::pow(c, q) : 0.0;
}

} // namespace

PatternGrid synth_pattern(double hpbw_az_deg, double hpbw_el_deg, double xpd_db, const ArrayGeometry& geometry,
                          std::vector<double> frequencies_hz, AngleGrid grid)
{
    require(hpbw_az_deg > 0.0 && hpbw_az_deg <= kIsotropicHpbwDeg, "synth_pattern: azimuth HPBW must be in (0, 180] deg");
    require(hpbw_el_deg > 0.0 && hpbw_el_deg <= kIsotropicHpbwDeg, "synth_pattern: elevation HPBW must be in (0, 180] deg");
    require(xpd_db >= 0.0, "synth_pattern: XPD must be >= 0 dB");
    geometry.validate();
    grid.validate();
    require(!frequencies_hz.empty(), "synth_pattern: no frequencies");

    PatternGrid pg;
    pg.angles = grid;
    pg.frequencies_hz = std::move(frequencies_hz);
    pg.n_elements = geometry.size();
    pg.gains.assign(pg.n_elements * 2 * pg.frequencies_hz.size() * pg.slice_size(), cplx{});

    const double q_az = cosine_exponent(hpbw_az_deg);
    const double q_el = cosine_exponent(hpbw_el_deg);
    const double cross = std::pow(10.0, -xpd_db / 20.0);
    const std::size_t n_az = grid.n_az();
    const std::size_t n_el = grid.n_el();

    for (std::size_t e = 0; e < pg.n_elements; ++e) {
        const auto& o = geometry.element_orientations[e];
        const double face_az = std::atan2(o.y(), o.x());
        const double face_el = std::asin(std::clamp(o.z(), -1.0, 1.0));
        const auto co = static_cast<std::size_t>(geometry.feed_pol[e]);
        for (std::size_t f = 0; f < pg.frequencies_hz.size(); ++f) {
            const double k = kTwoPi * pg.frequencies_hz[f] / kSpeedOfLight;
            for (std::size_t j = 0; j < n_el; ++j) {
                const double el = grid.el_rad(j);
                for (std::size_t i = 0; i < n_az; ++i) {
                    const double az = grid.az_rad(i);
                    const Eigen::Vector3d u(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
                    const double gain = cosine_lobe(wrap_pi(az - face_az), q_az) * cosine_lobe(el - face_el, q_el);
                    const cplx phase = std::polar(1.0, k * geometry.element_positions[e].dot(u));
                    pg.gains[pg.index(e, co, f, j, i)] = gain * phase;
                    pg.gains[pg.index(e, 1 - co, f, j, i)] = gain * cross * phase;
                }
            }
        }
    }
    return pg;
}

} // namespace mmsound::arrays
