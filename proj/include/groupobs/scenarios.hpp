#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "groupobs/observer.hpp"

namespace groupobs {

/// Configuration / validation failure; the CLI maps it to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Deterministic Gaussian source. Box-Muller over mt19937_64 so identical
/// seeds reproduce identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform();
  double gaussian();
  Eigen::VectorXd gaussian_vector(int n);
  Eigen::VectorXd unit_vector(int n);

 private:
  std::mt19937_64 gen_;
};

struct NoiseConfig {
  double landmark_std = 0.0;
  double bearing_std = 0.0;
  double range_std = 0.0;
};

struct BiasConfig {
  BiasMode mode = BiasMode::Off;
  Eigen::VectorXd true_omega;  // so(d) coordinates (empty = zero)
  Eigen::VectorXd true_rho;    // d*(n+m), column-major (empty = zero)
  Eigen::VectorXd init_omega;  // initial estimate
  Eigen::VectorXd init_rho;
};

struct InitConfig {
  bool from_truth = false;
  double rot_angle_deg = 170.0;   // estimator rotation offset (axis from the seed)
  double w_offset_mag = 100.0;    // Frobenius magnitude of the W offset
  double immersed_scale = 1.0;    // rescales zhat0 - z0 after the group-level init
};

struct InputConfig {
  Eigen::VectorXd gyro_amp, gyro_freq, gyro_phase;     // per so(d) component
  Eigen::VectorXd accel_amp, accel_freq, accel_phase;  // per d component
  bool gravity_cancel = true;  // accelerometer reads specific force
};

struct GramianConfig {
  bool enabled = false;
  double window = 1.0;  // seconds
  double period = 1.0;  // evaluation period, seconds
};

struct ScenarioConfig {
  std::string scenario = "slam_mot";
  double duration = 30.0;
  double step = 1e-3;
  std::uint64_t seed = 0;
  int decimate = 1;
  int shared_reduction = -1;  // -1 = preset default, else 0/1
  bool landmarks_only = false;
  std::vector<Eigen::Vector3d> slam_landmarks;  // empty = preset default
  InputConfig input;
  NoiseConfig noise;
  BiasConfig bias;
  InitConfig init;
  ObserverConfig observer;
  GramianConfig gramian;

  void validate() const;  // throws ConfigError naming the violated field
};

/// A scenario preset: the system spec plus everything needed to drive it.
struct ScenarioDef {
  std::string id;
  SystemSpec spec;
  int accel_col = 1;  // rho column carrying the accelerometer reading
  GroupElement truth0;
  bool default_reduction = false;
  Eigen::VectorXd gravity;  // world gravity, for specific-force synthesis
};

/// Navigation on rotating Earth: TFG(3,2,0), two landmarks plus one bearing
/// and one range channel (landmarks only when requested).
ScenarioDef build_rotating_earth_spec(bool landmarks_only = false);

/// SLAM with moving-object tracking: TFG(3,5,0), six landmark-type channels.
ScenarioDef build_slam_mot_spec(const std::vector<Eigen::Vector3d>& landmarks = {});

ScenarioDef scenario_preset(const ScenarioConfig& config);

/// Waveform defaults for a preset (used when the config leaves them empty).
InputConfig default_input(const ScenarioDef& def);

/// Measured input signal at time t. With gravity_cancel the accelerometer
/// component carries the specific force R^T(-g) plus the sinusoid.
AlgebraElement eval_input(const InputConfig& input, const ScenarioDef& def, double t,
                          const GroupElement& truth);

/// One RK4 step of the group dynamics in the dense embedding followed by
/// projection back onto the group.
GroupElement propagate_truth(const GroupElement& T, const AlgebraElement& u,
                             const SimAlgebraElement& A, SystemCase c, double h);

/// Same step without the projection; used by the finite-difference oracles.
Eigen::MatrixXd propagate_truth_raw(const Eigen::MatrixXd& Tembed, const AlgebraElement& u,
                                    const SimAlgebraElement& A, SystemCase c, double h);

MeasurementBatch synthesize_measurements(const GroupElement& T, const SystemSpec& spec,
                                         const NoiseConfig& noise, Rng& rng);

struct TrajectoryRow {
  double t = 0.0;
  double err_metric = 0.0;
  double err_rot_deg = 0.0;
  Eigen::VectorXd err_W;
  double err_z = 0.0;
  double err_bw = 0.0;
  double err_brho = 0.0;
  double gram_obs_min = 0.0;
  double gram_det_min = 0.0;
  double recon_residual = 0.0;
  bool recon_fresh = false;
};

struct TrajectoryLog {
  std::vector<TrajectoryRow> rows;
  RankCondition rank;
  int w_cols = 0;
  double p_eig_min = std::numeric_limits<double>::infinity();
  double p_eig_max = 0.0;
  double gram_obs_overall = std::numeric_limits<double>::infinity();
  double gram_det_overall = std::numeric_limits<double>::infinity();
  int gram_evaluations = 0;
  double log_slope = 0.0;
  bool slope_valid = false;

  const TrajectoryRow& final_row() const { return rows.back(); }
};

/// Least-squares slope of log(err_metric) over rows with fresh reconstructions
/// inside [t0, t1].
std::pair<double, bool> fit_log_slope(const std::vector<TrajectoryRow>& rows, double t0,
                                      double t1);

TrajectoryLog run_scenario(const ScenarioConfig& config);

}  // namespace groupobs
