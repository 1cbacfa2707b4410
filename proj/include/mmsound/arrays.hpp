// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmsound/common.hpp"
#include "mmsound/schedule.hpp"

namespace mmsound::arrays {

using schedule::Polarization;

enum class Layout { UpaPanel, Octagon, Custom };
std::string to_string(Layout l);

// Feed positions and broadside directions. With dual polarization the feed
// index is 2 * position + pol (H = 0, V = 1).
struct ArrayGeometry {
    std::vector<Eigen::Vector3d> element_positions;
    std::vector<Eigen::Vector3d> element_orientations; // unit broadside vectors
    std::vector<Polarization> feed_pol;
    Layout layout = Layout::Custom;

    std::size_t size() const { return element_positions.size(); }
    void validate() const;

    // rows x cols panel in the plane normal to `face_az_rad`, centred on
    // `center`. Position index is row-major with rows along z.
    static ArrayGeometry upa(int rows, int cols, double spacing_m, bool dual_pol,
                             double face_az_rad = 0.0, Eigen::Vector3d center = Eigen::Vector3d::Zero());
    // Eight panels of rows x cols, one per octagon face.
    static ArrayGeometry octagon(int panel_rows, int panel_cols, double spacing_m, bool dual_pol);
    // 128 feeds: four 4x4 dual-polarized panels in a 2x2 rectangle.
    static ArrayGeometry sounder_tx(double carrier_hz = 28e9);
    // 256 feeds: eight 4x4 dual-polarized panels in an octagon.
    static ArrayGeometry sounder_rx(double carrier_hz = 28e9);
    static ArrayGeometry single(Polarization pol = Polarization::V);
};

// Regular angle grid: az in [-180, 180) and el in [el_min, el_max], degrees.
struct AngleGrid {
    double az_step_deg = 2.0;
    double el_step_deg = 5.0;
    double el_min_deg = -90.0;
    double el_max_deg = 90.0;

    std::size_t n_az() const;
    std::size_t n_el() const;
    double az_rad(std::size_t i) const { return deg2rad(-180.0 + az_step_deg * static_cast<double>(i)); }
    double el_rad(std::size_t j) const { return deg2rad(el_min_deg + el_step_deg * static_cast<double>(j)); }
    void validate() const;
};

// Complex gains indexed [element][pol][frequency][el][az].
struct PatternGrid {
    AngleGrid angles;
    std::vector<double> frequencies_hz;
    std::size_t n_elements = 0;
    CVec gains;

    std::size_t index(std::size_t e, std::size_t pol, std::size_t f, std::size_t el, std::size_t az) const
    {
        return (((e * 2 + pol) * frequencies_hz.size() + f) * angles.n_el() + el) * angles.n_az() + az;
    }
    std::size_t slice_size() const { return angles.n_el() * angles.n_az(); }
    void validate() const;
    std::string checksum() const;
};

// Half-power beamwidth of 180 deg means isotropic.
inline constexpr double kIsotropicHpbwDeg = 180.0;

PatternGrid synth_pattern(double hpbw_az_deg, double hpbw_el_deg, double xpd_db, const ArrayGeometry& geometry,
                          std::vector<double> frequencies_hz = {28e9}, AngleGrid grid = {});

// Frequency list of the calibrated band: 26 to 30 GHz in 250 MHz steps.
std::vector<double> calibration_frequencies();

// Harmonic orders kept by the EADF: |p| <= el_order, |q| <= az_order.
// Negative orders mean "all"; a finite max_error_db picks the smallest
// orders meeting that reconstruction error.
struct Truncation {
    int el_order = -1;
    int az_order = -1;
    double max_error_db = 0.0; // used only when auto_select
    bool auto_select = false;

    static Truncation full() { return {}; }
    static Truncation orders(int el, int az) { return {el, az, 0.0, false}; }
    static Truncation bound(double db) { return {-1, -1, db, true}; }
};

// 2-D Fourier coefficients of the periodically extended pattern:
// g(az, el) = sum_{p,q} C[p, q] exp(j (p el + q az)).
struct Eadf {
    std::size_t n_elements = 0;
    std::vector<double> frequencies_hz;
    int el_order = 0;
    int az_order = 0;
    int pole_sign = 1;
    AngleGrid source_grid;
    std::string source_checksum;
    double reconstruction_error_db = 0.0;
    CVec coefficients; // [element][pol][freq][p + el_order][q + az_order]

    std::size_t n_p() const { return static_cast<std::size_t>(2 * el_order + 1); }
    std::size_t n_q() const { return static_cast<std::size_t>(2 * az_order + 1); }
    const cplx& coef(std::size_t e, std::size_t pol, std::size_t f, int p, int q) const
    {
        return coefficients[(((e * 2 + pol) * frequencies_hz.size() + f) * n_p() + static_cast<std::size_t>(p + el_order)) * n_q() +
                            static_cast<std::size_t>(q + az_order)];
    }
    std::size_t nearest_frequency(double frequency_hz) const;
};

// pole_sign is the factor applied to the mirrored half of the elevation
// extension: -1 for spherical field components, +1 for scalar-like grids.
Eadf compute_eadf(const PatternGrid& grid, const Truncation& truncation, int pole_sign = 1);

// Per-element, per-polarization response (n_elements x 2, columns H, V).
Eigen::MatrixXcd manifold(const Eadf& eadf, double az_rad, double el_rad, double frequency_hz);

// Evaluates an EADF at one frequency with optional angular derivatives.
class ArrayManifold {
public:
    ArrayManifold() = default;
    ArrayManifold(Eadf eadf, double frequency_hz, double fov_az_min_rad = -kPi, double fov_az_max_rad = kPi);

    std::size_t size() const { return eadf_.n_elements; }
    double frequency_hz() const { return eadf_.frequencies_hz[freq_index_]; }
    const Eadf& eadf() const { return eadf_; }
    double fov_az_min() const { return fov_min_; }
    double fov_az_max() const { return fov_max_; }
    bool in_fov(double az_rad) const;

    Eigen::MatrixXcd response(double az_rad, double el_rad) const;
    void response(double az_rad, double el_rad, Eigen::MatrixXcd& value, Eigen::MatrixXcd* d_az,
                  Eigen::MatrixXcd* d_el) const;

private:
    Eadf eadf_;
    std::size_t freq_index_ = 0;
    double fov_min_ = -kPi;
    double fov_max_ = kPi;
};

// Field of view implied by a layout: a front half-space for a single panel,
// everything for the octagon.
std::pair<double, double> default_fov(const ArrayGeometry& geometry);

// Calibration directory: header.json + element_XXXX.bin (cf32, [pol][freq][el][az]).
void save_calibration(const PatternGrid& grid, const std::string& dir, const std::string& layout = "custom");
PatternGrid load_calibration(const std::string& dir);

// EADF cache: <base>.json header + <base>.bin (little-endian float64 I/Q).
void save_eadf(const Eadf& eadf, const std::string& base_path);
Eadf load_eadf(const std::string& base_path);

} // namespace mmsound::arrays
