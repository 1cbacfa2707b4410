// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmsound/arrays.hpp"
#include "mmsound/common.hpp"
#include "mmsound/schedule.hpp"

namespace mmsound::channel {

// One plane-wave path. gain(a, b) couples tx polarization b into rx
// polarization a (H = 0, V = 1).
struct SpecularPath {
    double delay_s = 0.0;
    double aoa_az_rad = 0.0;
    double aoa_el_rad = 0.0;
    double aod_az_rad = 0.0;
    double aod_el_rad = 0.0;
    Eigen::Matrix2cd gain = Eigen::Matrix2cd::Identity();
    double doppler_hz = 0.0;

    void validate() const;
    double power() const { return gain.squaredNorm(); }
};

// Exponential delay-power profile. tau_d_s is converted to the normalised
// delay tau_d * tone_spacing; beta_d is the decay per delay bin (1 / bandwidth);
// gamma1 is the power of the first time-domain component.
struct FreqProfile {
    double tau_d_s = 0.0;
    double beta_d = 0.05;
    double gamma1 = 0.0;
};

// Product of von Mises densities in azimuth and elevation. amp_az * amp_el
// scales the mean diagonal of the resulting spatial covariance.
struct AngularProfile {
    double mu_az_rad = 0.0;
    double mu_el_rad = 0.0;
    double kappa_az = 0.0;
    double kappa_el = 0.0;
    double amp_az = 1.0;
    double amp_el = 1.0;
};

struct DenseProfile {
    FreqProfile theta_f;
    AngularProfile theta_r;
    AngularProfile theta_t;
    double noise_var = 0.0;

    void validate() const;
    bool has_dense_power() const { return theta_f.gamma1 > 0.0; }
};

// Receiver trajectory through timed waypoints, constant velocity between
// them and held at the ends.
struct Trajectory {
    struct Waypoint {
        double t_s = 0.0;
        Eigen::Vector3d position_m = Eigen::Vector3d::Zero();
    };
    std::vector<Waypoint> waypoints;

    void validate() const;
    Eigen::Vector3d displacement(double t_s) const; // relative to the first waypoint
    Eigen::Vector3d velocity(double t_s) const;
};

struct ChannelScene {
    std::vector<SpecularPath> paths;
    DenseProfile dense;
    std::optional<Trajectory> motion;
    std::vector<double> frequencies_hz; // baseband tone offsets
    double carrier_hz = 28e9;

    void validate() const;
    double tone_spacing_hz() const;
};

// Baseband frequencies (k - floor(m_f / 2)) * spacing, k = 0..m_f-1.
std::vector<double> tone_frequencies(std::size_t m_f, double spacing_hz);

// Unit vector of a direction given by azimuth and elevation.
Eigen::Vector3d direction(double az_rad, double el_rad);

// Doppler added by the receiver motion for a path arriving from (az, el).
double motion_doppler_hz(const Trajectory& motion, double aoa_az_rad, double aoa_el_rad, double carrier_hz, double t_s);

// B_R Gamma B_T^T for one path: n_rx x n_tx.
Eigen::MatrixXcd path_spatial_matrix(const SpecularPath& path, const arrays::ArrayManifold& tx,
                                     const arrays::ArrayManifold& rx);

// Transfer values of all (t, r, f) at one instant, ordered ((r * M_T + t) * M_f + f).
CVec specular_response(const std::vector<SpecularPath>& paths, const arrays::ArrayManifold& tx,
                       const arrays::ArrayManifold& rx, const std::vector<double>& frequencies_hz, double time_s);

// k-th entry (gamma1 / M_f) exp(-j 2 pi k tau_norm) / (beta_d + j 2 pi k / M_f),
// tau_norm = tau_d_s * tone_spacing_hz.
CVec freq_psd(const FreqProfile& theta_f, std::size_t m_f, double tone_spacing_hz);

// Hermitian Toeplitz matrix with first column lambda.
Eigen::MatrixXcd toeplitz_hermitian(const CVec& lambda);

// von Mises weights on an angle grid, including the cos(el) area element,
// normalised to unit sum. Layout [el][az].
std::vector<double> von_mises_weights(const AngularProfile& profile, const arrays::AngleGrid& grid);

// sum_cells w * B B^H over per-cell responses (M x 2 each), scaled so the
// mean diagonal equals amp_az * amp_el.
Eigen::MatrixXcd angular_covariance(const std::vector<Eigen::MatrixXcd>& responses, const std::vector<double>& weights,
                                    double amplitude);
Eigen::MatrixXcd angular_covariance(const arrays::ArrayManifold& manifold, const AngularProfile& profile,
                                    const arrays::AngleGrid& grid = {});

// R_R kron R_T kron R_F, kept factorised. Vectors are ordered
// ((r * M_T + t) * M_f + f).
class KroneckerCovariance {
public:
    KroneckerCovariance() = default;
    KroneckerCovariance(Eigen::MatrixXcd r_rx, Eigen::MatrixXcd r_tx, Eigen::MatrixXcd r_f);

    std::size_t size() const { return m_r() * m_t() * m_f(); }
    std::size_t m_r() const { return static_cast<std::size_t>(r_rx_.rows()); }
    std::size_t m_t() const { return static_cast<std::size_t>(r_tx_.rows()); }
    std::size_t m_f() const { return static_cast<std::size_t>(r_f_.rows()); }
    const Eigen::MatrixXcd& r_rx() const { return r_rx_; }
    const Eigen::MatrixXcd& r_tx() const { return r_tx_; }
    const Eigen::MatrixXcd& r_f() const { return r_f_; }

    CVec apply(const CVec& x) const;
    // Hermitian square root applied to a white CN(0, 1) draw.
    CVec sample(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) const;
    CVec apply_sqrt(const CVec& white) const;
    // All products of factor eigenvalues, ascending.
    Eigen::VectorXd eigenvalues() const;
    Eigen::MatrixXcd materialize() const;
    // Magnitude of negative factor eigenvalues clipped to zero, relative to
    // each factor's trace (largest of the three).
    double clipped_fraction() const { return clipped_; }

private:
    Eigen::MatrixXcd r_rx_, r_tx_, r_f_;
    Eigen::MatrixXcd s_rx_, s_tx_, s_f_;
    Eigen::VectorXd e_rx_, e_tx_, e_f_;
    double clipped_ = 0.0;
};

// y = (A_R kron A_T kron A_F) x without forming the product.
CVec kron3_apply(const Eigen::MatrixXcd& a_r, const Eigen::MatrixXcd& a_t, const Eigen::MatrixXcd& a_f, const CVec& x);

KroneckerCovariance dense_covariance(const DenseProfile& dense, const arrays::ArrayManifold& tx,
                                     const arrays::ArrayManifold& rx, std::size_t m_f, double tone_spacing_hz,
                                     const arrays::AngleGrid& grid = {});

// Stream purposes for counter-based draws.
enum class Purpose : std::uint64_t { Dense = 1, SceneNoise = 2, ReceiverNoise = 3, LoPhase = 4 };

// Transfer vectors of one snapshot, [entry][f] in codebook order.
struct SnapshotRealization {
    std::size_t n_entries = 0;
    std::size_t m_f = 0;
    CVec values;
    cplx at(std::size_t entry, std::size_t f) const { return values[entry * m_f + f]; }
};

// Precomputes path factors and the dense covariance for repeated snapshots.
class ChannelSynthesizer {
public:
    ChannelSynthesizer(ChannelScene scene, arrays::ArrayManifold tx, arrays::ArrayManifold rx,
                       const arrays::AngleGrid& dense_grid = {});

    const ChannelScene& scene() const { return scene_; }
    const arrays::ArrayManifold& tx() const { return tx_; }
    const arrays::ArrayManifold& rx() const { return rx_; }
    const std::optional<KroneckerCovariance>& covariance() const { return covariance_; }

    // Noise-free specular transfer of one entry at time t.
    void specular_entry(int tx, int rx, double time_s, cplx* out) const;
    SnapshotRealization realize(const schedule::SwitchSchedule& schedule, std::size_t snapshot, std::uint64_t seed) const;

private:
    ChannelScene scene_;
    arrays::ArrayManifold tx_, rx_;
    std::vector<Eigen::MatrixXcd> spatial_;
    std::optional<KroneckerCovariance> covariance_;
};

SnapshotRealization realize_snapshot(const ChannelScene& scene, const schedule::SwitchSchedule& schedule,
                                     const arrays::ArrayManifold& tx, const arrays::ArrayManifold& rx,
                                     std::size_t snapshot, std::uint64_t seed);

// Scene file (JSON): delays in ns, angles in degrees, gains as [re, im] pairs.
ChannelScene parse_scene_json(const std::string& text);
std::string scene_json(const ChannelScene& scene);

} // namespace mmsound::channel
