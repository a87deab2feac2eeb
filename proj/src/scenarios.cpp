#include "groupobs/scenarios.hpp"

#include <algorithm>
#include <cmath>

namespace groupobs {

double Rng::uniform() {
  // 53-bit mantissa uniform in [0,1)
  return (gen_() >> 11) * (1.0 / 9007199254740992.0);
}

double Rng::gaussian() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Eigen::VectorXd Rng::gaussian_vector(int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = gaussian();
  return v;
}

Eigen::VectorXd Rng::unit_vector(int n) {
  Eigen::VectorXd v = gaussian_vector(n);
  while (v.norm() < 1e-12) v = gaussian_vector(n);
  return v / v.norm();
}

void ScenarioConfig::validate() const {
  if (scenario != "rotating_earth" && scenario != "slam_mot") {
    throw ConfigError("scenario: unknown id '" + scenario + "'");
  }
  if (step <= 0.0) throw ConfigError("step: must be positive");
  if (duration < 10.0 * step) throw ConfigError("duration: must be at least 10 steps");
  if (decimate < 1) throw ConfigError("decimate: must be >= 1");
  if (noise.landmark_std < 0.0) throw ConfigError("noise.landmark_std: must be nonnegative");
  if (noise.bearing_std < 0.0) throw ConfigError("noise.bearing_std: must be nonnegative");
  if (noise.range_std < 0.0) throw ConfigError("noise.range_std: must be nonnegative");
  if (observer.q <= 0.0) throw ConfigError("observer.q: must be positive");
  if (observer.r_landmark <= 0.0) throw ConfigError("observer.r_landmark: must be positive");
  if (observer.r_bearing <= 0.0) throw ConfigError("observer.r_bearing: must be positive");
  if (observer.r_range <= 0.0) throw ConfigError("observer.r_range: must be positive");
  if (observer.lambda < 0.0) throw ConfigError("observer.lambda: must be nonnegative");
  if (observer.p0 <= 0.0) throw ConfigError("observer.p0: must be positive");
  if (gramian.enabled) {
    if (gramian.window <= 0.0) throw ConfigError("gramian.window: must be positive");
    if (gramian.period <= 0.0) throw ConfigError("gramian.period: must be positive");
    if (gramian.window > duration) throw ConfigError("gramian.window: exceeds duration");
  }
  if (init.immersed_scale < 0.0) throw ConfigError("init.immersed_scale: must be nonnegative");
  if (init.rot_angle_deg < 0.0 || init.rot_angle_deg > 180.0) {
    throw ConfigError("init.rot_angle_deg: must lie in [0, 180]");
  }
  if (!slam_landmarks.empty()) {
    if (scenario != "slam_mot") throw ConfigError("landmarks: only valid for slam_mot");
    if (slam_landmarks.size() != 3) throw ConfigError("landmarks: exactly 3 positions expected");
  }
}

namespace {

constexpr double kEarthRate = 7.292115e-5;  // rad/s
constexpr double kGravity = 9.81;           // m/s^2

Eigen::VectorXd homog(const Eigen::Vector3d& bar, const Eigen::VectorXd& under) {
  Eigen::VectorXd v(3 + under.size());
  v.head(3) = bar;
  v.tail(under.size()) = under;
  return v;
}

}  // namespace

ScenarioDef build_rotating_earth_spec(bool landmarks_only) {
  ScenarioDef def;
  def.id = "rotating_earth";
  def.accel_col = 1;
  def.default_reduction = false;
  def.gravity = Eigen::Vector3d(0.0, 0.0, -kGravity);

  const Eigen::Vector3d earth_rate(0.0, 0.0, kEarthRate);

  SystemSpec spec;
  spec.system_case = SystemCase::Case1;
  spec.d = 3;
  spec.n = 2;
  spec.m = 0;
  spec.generator = SimAlgebraElement::Zero(3, 2, 0);
  spec.generator.Omega = -earth_rate;  // dynamics carry -Omega^x on the rotation
  spec.generator.gamma.col(1) = def.gravity;
  spec.generator.L << 0.0, 0.0, -1.0, 0.0;

  Eigen::VectorXd under(2);
  under << 1.0, 0.0;
  const Eigen::Vector3d dirs[4] = {{40.0, 10.0, 5.0},
                                   {-20.0, 35.0, 12.0},
                                   {15.0, -25.0, 30.0},
                                   {-30.0, -18.0, 22.0}};
  const MeasurementKind kinds[4] = {MeasurementKind::Landmark, MeasurementKind::Landmark,
                                    MeasurementKind::Bearing, MeasurementKind::Range};
  const int count = landmarks_only ? 2 : 4;
  for (int i = 0; i < count; ++i) {
    MeasurementSpec meas;
    meas.kind = kinds[i];
    meas.direction = homog(dirs[i], under);
    spec.measurements.push_back(meas);
  }
  def.spec = spec;

  def.truth0 = GroupElement::Identity(3, 2, 0);
  const Eigen::Vector3d p0(5.0, -3.0, 2.0);
  const Eigen::Vector3d v0(1.0, 0.5, -0.2);
  def.truth0.W.col(0) = p0;
  def.truth0.W.col(1) = v0 + earth_rate.cross(p0);
  return def;
}

ScenarioDef build_slam_mot_spec(const std::vector<Eigen::Vector3d>& landmarks) {
  ScenarioDef def;
  def.id = "slam_mot";
  def.accel_col = 1;
  def.default_reduction = true;
  def.gravity = Eigen::Vector3d(0.0, 0.0, -kGravity);

  std::vector<Eigen::Vector3d> lm = landmarks;
  if (lm.empty()) {
    lm = {{20.0, 2.0, 1.0}, {-3.0, 25.0, 2.0}, {4.0, -6.0, 15.0}};
  }
  if (lm.size() != 3) {
    throw std::invalid_argument("build_slam_mot_spec: exactly 3 landmark positions expected");
  }

  SystemSpec spec;
  spec.system_case = SystemCase::Case1;
  spec.d = 3;
  spec.n = 5;
  spec.m = 0;
  spec.generator = SimAlgebraElement::Zero(3, 5, 0);
  spec.generator.gamma.col(1) = def.gravity;
  spec.generator.L(1, 0) = -1.0;
  spec.generator.L(4, 3) = -1.0;

  auto under = [](std::initializer_list<double> v) {
    Eigen::VectorXd u(5);
    int k = 0;
    for (double x : v) u(k++) = x;
    return u;
  };

  for (int i = 0; i < 3; ++i) {
    MeasurementSpec meas;
    meas.kind = MeasurementKind::Landmark;
    meas.direction = homog(lm[i], under({1, 0, 0, 0, 0}));
    spec.measurements.push_back(meas);
  }
  const Eigen::Vector3d zero3 = Eigen::Vector3d::Zero();
  MeasurementSpec m4, m5, m6;
  m4.kind = m5.kind = m6.kind = MeasurementKind::Landmark;
  m4.direction = homog(zero3, under({1, 0, -1, 0, 0}));
  m5.direction = homog(zero3, under({1, 0, 0, -1, 0}));
  m6.direction = homog(zero3, under({0, 1, 0, 0, -1}));
  spec.measurements.push_back(m4);
  spec.measurements.push_back(m5);
  spec.measurements.push_back(m6);
  def.spec = spec;

  def.truth0 = GroupElement::Identity(3, 5, 0);
  def.truth0.W.col(0) = Eigen::Vector3d(1.0, 2.0, 0.0);    // p
  def.truth0.W.col(1) = Eigen::Vector3d(0.5, 0.0, 0.2);    // v
  def.truth0.W.col(2) = Eigen::Vector3d(5.0, 5.0, 3.0);    // l
  def.truth0.W.col(3) = Eigen::Vector3d(-4.0, 6.0, 2.0);   // q
  def.truth0.W.col(4) = Eigen::Vector3d(0.3, -0.2, 0.1);   // c
  return def;
}

ScenarioDef scenario_preset(const ScenarioConfig& config) {
  if (config.scenario == "rotating_earth") {
    return build_rotating_earth_spec(config.landmarks_only);
  }
  if (config.scenario == "slam_mot") {
    return build_slam_mot_spec(config.slam_landmarks);
  }
  throw ConfigError("scenario: unknown id '" + config.scenario + "'");
}

InputConfig default_input(const ScenarioDef& def) {
  InputConfig in;
  const int wd = so_dim(def.spec.d);
  in.gyro_amp = Eigen::VectorXd::Zero(wd);
  in.gyro_freq = Eigen::VectorXd::Zero(wd);
  in.gyro_phase = Eigen::VectorXd::Zero(wd);
  in.accel_amp = Eigen::VectorXd::Zero(def.spec.d);
  in.accel_freq = Eigen::VectorXd::Zero(def.spec.d);
  in.accel_phase = Eigen::VectorXd::Zero(def.spec.d);
  in.gyro_amp << 0.4, 0.3, 0.5;
  in.gyro_freq << 0.9, 1.3, 0.7;
  in.gyro_phase << 0.0, 1.0, 2.0;
  in.accel_amp << 0.6, 0.5, 0.4;
  in.accel_freq << 1.1, 0.8, 0.6;
  in.accel_phase << 0.5, 1.5, 2.5;
  return in;
}

AlgebraElement eval_input(const InputConfig& input, const ScenarioDef& def, double t,
                          const GroupElement& truth) {
  const auto& spec = def.spec;
  AlgebraElement u = AlgebraElement::Zero(spec.d, spec.n, spec.m);
  for (int i = 0; i < u.omega.size(); ++i) {
    u.omega(i) = input.gyro_amp(i) * std::sin(input.gyro_freq(i) * t + input.gyro_phase(i));
  }
  Eigen::VectorXd a(spec.d);
  for (int i = 0; i < spec.d; ++i) {
    a(i) = input.accel_amp(i) * std::sin(input.accel_freq(i) * t + input.accel_phase(i));
  }
  if (input.gravity_cancel) {
    a += truth.R.transpose() * (-def.gravity);
  }
  u.rho.col(def.accel_col) = a;
  return u;
}

namespace {

Eigen::MatrixXd truth_rhs(const Eigen::MatrixXd& M, const Eigen::MatrixXd& Ae,
                          const Eigen::MatrixXd& Ue, const Eigen::MatrixXd& Le, SystemCase c) {
  if (c == SystemCase::Case1) {
    return Ae * M + M * (Ue - Le);
  }
  return (Ue + Le) * M - M * Ae;
}

}  // namespace

Eigen::MatrixXd propagate_truth_raw(const Eigen::MatrixXd& Tembed, const AlgebraElement& u,
                                    const SimAlgebraElement& A, SystemCase c, double h) {
  const int N = static_cast<int>(Tembed.rows());
  const int nm = A.n + A.m;
  const Eigen::MatrixXd Ae = A.embed();
  const Eigen::MatrixXd Ue = u.embed();
  Eigen::MatrixXd Le = Eigen::MatrixXd::Zero(N, N);
  Le.bottomRightCorner(nm, nm) = A.L;

  const Eigen::MatrixXd k1 = truth_rhs(Tembed, Ae, Ue, Le, c);
  const Eigen::MatrixXd k2 = truth_rhs(Tembed + 0.5 * h * k1, Ae, Ue, Le, c);
  const Eigen::MatrixXd k3 = truth_rhs(Tembed + 0.5 * h * k2, Ae, Ue, Le, c);
  const Eigen::MatrixXd k4 = truth_rhs(Tembed + h * k3, Ae, Ue, Le, c);
  return Tembed + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

GroupElement propagate_truth(const GroupElement& T, const AlgebraElement& u,
                             const SimAlgebraElement& A, SystemCase c, double h) {
  const Eigen::MatrixXd M = propagate_truth_raw(T.embed(), u, A, c, h);
  return project_to_group(M, T.d, T.n, T.m);
}

MeasurementBatch synthesize_measurements(const GroupElement& T, const SystemSpec& spec,
                                         const NoiseConfig& noise, Rng& rng) {
  const int d = spec.d;
  const ActionSide side =
      (spec.system_case == SystemCase::Case1) ? ActionSide::Inverse : ActionSide::Left;
  MeasurementBatch batch;
  batch.channels.resize(spec.measurements.size());
  for (size_t i = 0; i < spec.measurements.size(); ++i) {
    const auto& meas = spec.measurements[i];
    const Eigen::VectorXd truth = act(T, meas.direction, side).head(d);
    auto& chan = batch.channels[i];
    switch (meas.kind) {
      case MeasurementKind::Landmark: {
        const Eigen::VectorXd eps = rng.gaussian_vector(d);
        chan.value = truth + noise.landmark_std * eps;
        chan.valid = true;
        break;
      }
      case MeasurementKind::Bearing: {
        const Eigen::VectorXd eps = rng.gaussian_vector(d);
        if (truth.norm() < kBearingMinNorm) {
          chan.value = Eigen::VectorXd::Zero(d);
          chan.valid = false;
        } else {
          Eigen::VectorXd v = truth / truth.norm() + noise.bearing_std * eps;
          if (v.norm() < kBearingMinNorm) {
            chan.valid = false;
            chan.value = Eigen::VectorXd::Zero(d);
          } else {
            chan.value = v / v.norm();
            chan.valid = true;
          }
        }
        break;
      }
      case MeasurementKind::Range: {
        const double eps = rng.gaussian();
        chan.value = Eigen::VectorXd::Constant(1, std::max(0.0, truth.norm() +
                                                                    noise.range_std * eps));
        chan.valid = true;
        break;
      }
    }
  }
  return batch;
}

std::pair<double, bool> fit_log_slope(const std::vector<TrajectoryRow>& rows, double t0,
                                      double t1) {
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  int n = 0;
  for (const auto& row : rows) {
    if (!row.recon_fresh || row.t < t0 || row.t > t1 || row.err_metric <= 0.0) continue;
    const double y = std::log(row.err_metric);
    st += row.t;
    sy += y;
    stt += row.t * row.t;
    sty += row.t * y;
    ++n;
  }
  if (n < 2) return {0.0, false};
  const double denom = n * stt - st * st;
  if (denom <= 0.0) return {0.0, false};
  return {(n * sty - st * sy) / denom, true};
}

namespace {

double rotation_error_deg(const Eigen::MatrixXd& Rtrue, const Eigen::MatrixXd& Rest) {
  const Eigen::MatrixXd Rel = Rtrue.transpose() * Rest;
  double angle = 0.0;
  if (Rel.rows() == 3) {
    const double c = std::clamp((Rel.trace() - 1.0) / 2.0, -1.0, 1.0);
    angle = std::acos(c);
  } else {
    angle = std::abs(std::atan2(Rel(1, 0), Rel(0, 0)));
  }
  return angle * 180.0 / M_PI;
}

}  // namespace

TrajectoryLog run_scenario(const ScenarioConfig& config) {
  config.validate();
  const ScenarioDef def = scenario_preset(config);
  const SystemSpec& spec = def.spec;
  const int d = spec.d;
  const int nm = spec.n + spec.m;

  InputConfig input = config.input;
  const InputConfig defaults = default_input(def);
  if (input.gyro_amp.size() == 0) input.gyro_amp = defaults.gyro_amp;
  if (input.gyro_freq.size() == 0) input.gyro_freq = defaults.gyro_freq;
  if (input.gyro_phase.size() == 0) input.gyro_phase = defaults.gyro_phase;
  if (input.accel_amp.size() == 0) input.accel_amp = defaults.accel_amp;
  if (input.accel_freq.size() == 0) input.accel_freq = defaults.accel_freq;
  if (input.accel_phase.size() == 0) input.accel_phase = defaults.accel_phase;
  if (input.gyro_amp.size() != so_dim(d) || input.gyro_freq.size() != so_dim(d) ||
      input.gyro_phase.size() != so_dim(d)) {
    throw ConfigError("input.gyro_*: wrong length for this scenario");
  }
  if (input.accel_amp.size() != d || input.accel_freq.size() != d ||
      input.accel_phase.size() != d) {
    throw ConfigError("input.accel_*: wrong length for this scenario");
  }

  const bool reduction =
      config.shared_reduction < 0 ? def.default_reduction : (config.shared_reduction != 0);
  ImmersedModel model = ImmersedModel::Build(spec, reduction);

  // True bias
  Eigen::VectorXd bw_true = Eigen::VectorXd::Zero(so_dim(d));
  Eigen::MatrixXd brho_true = Eigen::MatrixXd::Zero(d, nm);
  if (config.bias.true_omega.size() > 0) {
    if (config.bias.true_omega.size() != so_dim(d)) {
      throw ConfigError("bias.true_omega: wrong length");
    }
    bw_true = config.bias.true_omega;
  }
  if (config.bias.true_rho.size() > 0) {
    if (config.bias.true_rho.size() != d * nm) throw ConfigError("bias.true_rho: wrong length");
    brho_true = Eigen::Map<const Eigen::MatrixXd>(config.bias.true_rho.data(), d, nm);
  }

  ObserverConfig ocfg = config.observer;
  ocfg.bias_mode = config.bias.mode;
  if (config.bias.mode != BiasMode::Off) {
    const bool full = config.bias.mode == BiasMode::Full;
    Eigen::VectorXd b0 = Eigen::VectorXd::Zero((full ? so_dim(d) : 0) + d * nm);
    if (full && config.bias.init_omega.size() > 0) {
      if (config.bias.init_omega.size() != so_dim(d)) {
        throw ConfigError("bias.init_omega: wrong length");
      }
      b0.head(so_dim(d)) = config.bias.init_omega;
    }
    if (config.bias.init_rho.size() > 0) {
      if (config.bias.init_rho.size() != d * nm) throw ConfigError("bias.init_rho: wrong length");
      b0.tail(d * nm) = config.bias.init_rho;
    }
    ocfg.b0 = b0;
  }

  ImmersedObserver observer(model, ocfg);

  TrajectoryLog log;
  log.rank = rank_condition(model.table);
  log.w_cols = nm;

  Rng rng(config.seed);

  // Estimator initialization: rotation offset about a seeded axis plus a W
  // offset of the configured magnitude, optionally rescaled in immersed space.
  GroupElement T = def.truth0;
  GroupElement chi0 = def.truth0;
  if (!config.init.from_truth) {
    const double angle = config.init.rot_angle_deg * M_PI / 180.0;
    if (d == 3) {
      const Eigen::VectorXd axis = rng.unit_vector(3);
      chi0.R = def.truth0.R * rodrigues(angle * Eigen::Vector3d(axis));
    } else {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      Eigen::Matrix2d Rp;
      Rp << std::cos(sign * angle), -std::sin(sign * angle), std::sin(sign * angle),
          std::cos(sign * angle);
      chi0.R = def.truth0.R * Rp;
    }
    if (config.init.w_offset_mag > 0.0 && nm > 0) {
      Eigen::MatrixXd off(d, nm);
      for (int c = 0; c < nm; ++c) off.col(c) = rng.gaussian_vector(d);
      off *= config.init.w_offset_mag / off.norm();
      chi0.W = def.truth0.W + off;
    }
  }
  const Eigen::VectorXd z_true0 = model.immerse_z(T);
  Eigen::VectorXd zhat0 = model.immerse_z(chi0);
  zhat0 = z_true0 + config.init.immersed_scale * (zhat0 - z_true0);
  ObserverState state = observer.init_from_immersed(zhat0);

  const double h = config.step;
  const long steps = std::lround(config.duration / h);
  const long per_second = std::max<long>(1, std::lround(1.0 / h));

  GramianWindow window;
  long period_steps = 0;
  if (config.gramian.enabled) {
    window = GramianWindow(config.gramian.window, h);
    period_steps = std::max<long>(1, std::lround(config.gramian.period / h));
  }
  double gram_obs_cur = 0.0, gram_det_cur = 0.0;

  GroupElement recon_est = chi0;
  double recon_residual = 0.0;

  auto sample_p_band = [&]() {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(state.riccati.P);
    log.p_eig_min = std::min(log.p_eig_min, eig.eigenvalues()(0));
    log.p_eig_max = std::max(log.p_eig_max, eig.eigenvalues()(eig.eigenvalues().size() - 1));
  };

  auto append_row = [&](double t, bool fresh) {
    if (fresh) {
      const ReconstructionResult rec = observer.reconstruct(state);
      recon_est = rec.estimate;
      recon_est.n = spec.n;
      recon_est.m = spec.m;
      recon_residual = rec.residual;
    }
    TrajectoryRow row;
    row.t = t;
    row.err_metric = error_metric(recon_est, T, spec.system_case);
    row.err_rot_deg = rotation_error_deg(T.R, recon_est.R);
    row.err_W.resize(nm);
    for (int c = 0; c < nm; ++c) row.err_W(c) = (recon_est.W.col(c) - T.W.col(c)).norm();
    row.err_z = (state.zhat - model.immerse_z(T)).norm();
    row.err_bw = 0.0;
    row.err_brho = 0.0;
    if (config.bias.mode == BiasMode::Full) {
      row.err_bw = (state.bhat.head(so_dim(d)) - bw_true).norm();
      row.err_brho =
          (state.bhat.tail(d * nm) -
           Eigen::Map<const Eigen::VectorXd>(brho_true.data(), d * nm)).norm();
    } else if (config.bias.mode == BiasMode::RhoOnly) {
      row.err_bw = bw_true.norm();
      row.err_brho =
          (state.bhat -
           Eigen::Map<const Eigen::VectorXd>(brho_true.data(), d * nm)).norm();
    } else {
      row.err_bw = bw_true.norm();
      row.err_brho = brho_true.norm();
    }
    row.gram_obs_min = gram_obs_cur;
    row.gram_det_min = gram_det_cur;
    row.recon_residual = recon_residual;
    row.recon_fresh = fresh;
    log.rows.push_back(std::move(row));
  };

  log.rows.reserve(static_cast<size_t>(steps) + 1);
  sample_p_band();
  append_row(0.0, true);

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    AlgebraElement u_phys = eval_input(input, def, t, T);
    AlgebraElement u_meas = u_phys;
    u_meas.omega -= bw_true;
    u_meas.rho -= brho_true;

    const MeasurementBatch batch = synthesize_measurements(T, spec, config.noise, rng);

    if (config.gramian.enabled) {
      Eigen::MatrixXd F, H, R;
      Eigen::VectorXd c, y;
      observer.extended_system(u_meas, observer.pack(state), F, c);
      observer.measurement_model(batch, H, y, R);
      Eigen::LLT<Eigen::MatrixXd> llt(R);
      window.push(F, H.transpose() * llt.solve(H));
      if (window.full() && (k + 1) % period_steps == 0) {
        gram_obs_cur = window.observability().second;
        gram_det_cur = window.determinability().second;
        log.gram_obs_overall = std::min(log.gram_obs_overall, gram_obs_cur);
        log.gram_det_overall = std::min(log.gram_det_overall, gram_det_cur);
        ++log.gram_evaluations;
      }
    }

    try {
      state = observer.step(state, u_meas, batch, h);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("step " + std::to_string(k) + " (t=" + std::to_string(t) +
                               "): " + e.what());
    }
    T = propagate_truth(T, u_phys, spec.generator, spec.system_case, h);

    if ((k + 1) % per_second == 0 || k + 1 == steps) sample_p_band();
    const bool fresh = ((k + 1) % config.decimate == 0) || (k + 1 == steps);
    append_row(static_cast<double>(k + 1) * h, fresh);
  }

  const auto [slope, valid] = fit_log_slope(log.rows, 1.0, std::min(20.0, config.duration));
  log.log_slope = slope;
  log.slope_valid = valid;
  return log;
}

}  // namespace groupobs
