// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "mmsound/arrays.hpp"
#include "mmsound/channel.hpp"
#include "mmsound/schedule.hpp"
#include "mmsound/sounder.hpp"

namespace mmsound::estimation {

// ---- Doppler ambiguity ------------------------------------------------------

struct AmbiguityFunction {
    std::vector<double> doppler_grid_hz;
    std::vector<double> magnitude;
    // Largest value outside the main lobe |nu| < mainlobe_hz.
    double max_sidelobe(double mainlobe_hz) const;
    double sidelobe_location_hz(double mainlobe_hz) const;
};

// -1/(2 T_frame) .. 1/(2 T_frame) in steps of 1/(4 K T_frame).
std::vector<double> default_doppler_grid(const schedule::SwitchSchedule& schedule);

// Normalised correlation of the schedule's sampling pattern against a
// Doppler hypothesis: for each nu, the largest of
// |sum_k exp(j 2 pi (nu t_k + u_t x_k / n_t + u_r y_k / n_r))| / K over integer
// spatial frequencies (u_t, u_r), where x_k, y_k are the antenna position
// indices of entry k (feed index, halved for dual-polarized rx feeds).
AmbiguityFunction doppler_ambiguity(const schedule::SwitchSchedule& schedule, const std::vector<double>& doppler_grid_hz);

// Half the offset of the first grating peak (magnitude >= peak_level outside
// the main lobe 1/T_snap) on the default grid, or half the frame rate when the
// schedule has none. Doppler searches beyond this range are ambiguous.
double unambiguous_doppler_hz(const schedule::SwitchSchedule& schedule, double peak_level = 0.9);

// ---- Observation ------------------------------------------------------------

// Equalized transfer values per (snapshot, entry, tone) with entry timestamps.
struct Observation {
    std::size_t n_snapshots = 0;
    std::size_t n_entries = 0;
    std::vector<double> frequencies_hz;
    std::vector<int> tx;               // per entry
    std::vector<int> rx;               // per entry
    std::vector<double> times_s;       // [s][e]
    CVec values;                       // [s][e][k]
    double snapshot_duration_s = 0.0;
    double frame_duration_s = 0.0;

    std::size_t m_f() const { return frequencies_hz.size(); }
    std::size_t size() const { return values.size(); }
    const cplx* entry(std::size_t s, std::size_t e) const { return &values[(s * n_entries + e) * m_f()]; }
    cplx* entry(std::size_t s, std::size_t e) { return &values[(s * n_entries + e) * m_f()]; }
    double time(std::size_t s, std::size_t e) const { return times_s[s * n_entries + e]; }
    void validate() const;
    double power() const;
};

// Recovers the transfer values from a CIR tensor. Every (tx, rx) pair of the
// schedule must be present. Tones are decimated by `tone_step`.
Observation observation_from_cir(const sounder::CirTensor& cir, const schedule::SwitchSchedule& schedule,
                                 std::size_t tone_step = 1);

// Model of a set of paths on the observation's sampling points.
CVec model_values(const Observation& obs, const std::vector<channel::SpecularPath>& paths,
                  const arrays::ArrayManifold& tx, const arrays::ArrayManifold& rx);
Observation residual(const Observation& obs, const std::vector<channel::SpecularPath>& paths,
                     const arrays::ArrayManifold& tx, const arrays::ArrayManifold& rx);

// Per-tone noise variance from the last quarter of the unwindowed delay profile.
double late_delay_noise(const Observation& obs);

// ---- Specular estimator -----------------------------------------------------

struct SpecularConfig {
    std::size_t max_paths = 8;
    double margin_db = 6.0;
    std::size_t delay_oversampling = 4;
    double az_step_deg = 2.0;
    double el_step_deg = 5.0;
    double el_min_deg = -80.0;
    double el_max_deg = 80.0;
    double doppler_max_hz = 0.0; // 0: half the frame rate
    int max_iterations = 100;
    std::size_t max_tones = 512;
};

struct EstimationResult {
    std::vector<channel::SpecularPath> paths; // sorted by power, descending
    std::vector<double> improvement;          // residual-power improvement per path
    std::vector<double> residual_history;     // residual power after each accepted path
    double noise_var_est = 0.0;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = true;
    std::string diagnostic;
};

class SpecularEstimator {
public:
    SpecularEstimator(arrays::ArrayManifold tx, arrays::ArrayManifold rx, SpecularConfig config = {});

    EstimationResult estimate(const Observation& obs) const;
    const SpecularConfig& config() const { return config_; }

    // Angle-search cell with an orthonormal basis of its manifold columns.
    struct Cell {
        double az;
        double el;
        Eigen::MatrixXcd basis;
    };

private:
    arrays::ArrayManifold tx_, rx_;
    SpecularConfig config_;
    std::vector<Cell> tx_cells_, rx_cells_;
};

EstimationResult estimate_specular(const Observation& obs, const arrays::ArrayManifold& tx,
                                   const arrays::ArrayManifold& rx, const SpecularConfig& config = {});

// ---- Dense estimator --------------------------------------------------------

struct DenseFit {
    channel::DenseProfile profile;
    bool noise_only = false;
    std::string diagnostic;
    std::vector<double> delay_profile; // averaged unitary-IDFT profile of the residual
};

struct DenseConfig {
    // Dense power counts only if the fitted profile exceeds the noise floor by
    // this many standard errors of the averaged profile.
    double detection_sigma = 3.0;
    double az_step_deg = 4.0;
    double el_step_deg = 10.0;
    bool fit_angles = true;
};

// Expected unitary-IDFT delay profile of a dense component plus white noise.
std::vector<double> dense_delay_profile(const channel::FreqProfile& theta_f, double noise_var, std::size_t m_f,
                                        double tone_spacing_hz);

DenseFit estimate_dense(const Observation& residual, const arrays::ArrayManifold& tx, const arrays::ArrayManifold& rx,
                        const DenseConfig& config = {});

// ---- Tracking ---------------------------------------------------------------

struct TrackingConfig {
    double gate_delay_ns = 2.0;
    double gate_az_deg = 5.0;
    double cutoff_db = 30.0;
};

struct TrackPoint {
    double time_s;
    int track_id;
    std::size_t snapshot;
    double az_deg;
    double el_deg;
    double delay_ns;
    double power_db;
};

struct TrackEvent {
    enum class Kind { Appear, Disappear };
    Kind kind;
    int track_id;
    std::size_t snapshot; // first or last snapshot the track was seen in
};

struct TrackingResult {
    std::vector<TrackPoint> points;
    std::vector<TrackEvent> events;
    int n_tracks = 0;
};

struct TimedPaths {
    double time_s = 0.0;
    std::vector<channel::SpecularPath> paths;
};

TrackingResult track_aoa(const std::vector<TimedPaths>& snapshots, const TrackingConfig& config = {});

// ---- Exports ----------------------------------------------------------------

std::string result_json(const EstimationResult& result, const DenseFit* dense = nullptr);
std::string tracks_csv(const TrackingResult& tracks);
std::string ambiguity_csv(const AmbiguityFunction& af);

} // namespace mmsound::estimation
