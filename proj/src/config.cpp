#include "groupobs/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace groupobs {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& path) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) {
      throw ConfigError(path + key + ": unknown key");
    }
  }
}

double get_number(const json& obj, const char* key, double fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ConfigError(path + key + ": expected a number");
  return obj[key].get<double>();
}

bool get_bool(const json& obj, const char* key, bool fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) throw ConfigError(path + key + ": expected a boolean");
  return obj[key].get<bool>();
}

Eigen::VectorXd get_vector(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) return {};
  if (!obj[key].is_array()) throw ConfigError(path + key + ": expected an array");
  Eigen::VectorXd v(obj[key].size());
  int i = 0;
  for (const auto& x : obj[key]) {
    if (!x.is_number()) throw ConfigError(path + key + ": expected numbers");
    v(i++) = x.get<double>();
  }
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

BiasMode parse_bias_mode(const std::string& s) {
  if (s == "off") return BiasMode::Off;
  if (s == "rho") return BiasMode::RhoOnly;
  if (s == "full") return BiasMode::Full;
  throw ConfigError("bias.mode: expected one of off|rho|full, got '" + s + "'");
}

std::string bias_mode_name(BiasMode m) {
  switch (m) {
    case BiasMode::Off:
      return "off";
    case BiasMode::RhoOnly:
      return "rho";
    case BiasMode::Full:
      return "full";
  }
  return "off";
}

}  // namespace

ScenarioConfig parse_config_text(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(origin + ": top level must be an object");

  reject_unknown(root,
                 {"version", "scenario", "duration", "step", "seed", "decimate",
                  "shared_reduction", "landmarks_only", "landmarks", "input", "noise", "bias",
                  "init", "observer", "gramian"},
                 "");

  if (root.contains("version") && root["version"].get<int>() != 1) {
    throw ConfigError("version: unsupported schema version");
  }

  ScenarioConfig cfg;
  if (root.contains("scenario")) {
    if (!root["scenario"].is_string()) throw ConfigError("scenario: expected a string");
    cfg.scenario = root["scenario"].get<std::string>();
  }
  cfg.duration = get_number(root, "duration", cfg.duration, "");
  cfg.step = get_number(root, "step", cfg.step, "");
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned())
      throw ConfigError("seed: expected an unsigned integer");
    cfg.seed = root["seed"].get<std::uint64_t>();
  }
  cfg.decimate = static_cast<int>(get_number(root, "decimate", cfg.decimate, ""));
  if (root.contains("shared_reduction")) {
    if (!root["shared_reduction"].is_boolean())
      throw ConfigError("shared_reduction: expected a boolean");
    cfg.shared_reduction = root["shared_reduction"].get<bool>() ? 1 : 0;
  }
  cfg.landmarks_only = get_bool(root, "landmarks_only", cfg.landmarks_only, "");

  if (root.contains("landmarks")) {
    if (!root["landmarks"].is_array()) throw ConfigError("landmarks: expected an array");
    for (const auto& item : root["landmarks"]) {
      if (!item.is_array() || item.size() != 3) {
        throw ConfigError("landmarks: expected [x, y, z] triples");
      }
      Eigen::Vector3d p;
      for (int i = 0; i < 3; ++i) {
        if (!item[i].is_number()) throw ConfigError("landmarks: expected numbers");
        p(i) = item[i].get<double>();
      }
      cfg.slam_landmarks.push_back(p);
    }
  }

  if (root.contains("input")) {
    const json& in = root["input"];
    if (!in.is_object()) throw ConfigError("input: expected an object");
    reject_unknown(in,
                   {"gyro_amp", "gyro_freq", "gyro_phase", "accel_amp", "accel_freq",
                    "accel_phase", "gravity_cancel"},
                   "input.");
    cfg.input.gyro_amp = get_vector(in, "gyro_amp", "input.");
    cfg.input.gyro_freq = get_vector(in, "gyro_freq", "input.");
    cfg.input.gyro_phase = get_vector(in, "gyro_phase", "input.");
    cfg.input.accel_amp = get_vector(in, "accel_amp", "input.");
    cfg.input.accel_freq = get_vector(in, "accel_freq", "input.");
    cfg.input.accel_phase = get_vector(in, "accel_phase", "input.");
    cfg.input.gravity_cancel = get_bool(in, "gravity_cancel", cfg.input.gravity_cancel, "input.");
  }

  if (root.contains("noise")) {
    const json& no = root["noise"];
    if (!no.is_object()) throw ConfigError("noise: expected an object");
    reject_unknown(no, {"landmark_std", "bearing_std", "range_std"}, "noise.");
    cfg.noise.landmark_std = get_number(no, "landmark_std", cfg.noise.landmark_std, "noise.");
    cfg.noise.bearing_std = get_number(no, "bearing_std", cfg.noise.bearing_std, "noise.");
    cfg.noise.range_std = get_number(no, "range_std", cfg.noise.range_std, "noise.");
  }

  if (root.contains("bias")) {
    const json& bi = root["bias"];
    if (!bi.is_object()) throw ConfigError("bias: expected an object");
    reject_unknown(bi, {"mode", "true_omega", "true_rho", "init_omega", "init_rho"}, "bias.");
    if (bi.contains("mode")) {
      if (!bi["mode"].is_string()) throw ConfigError("bias.mode: expected a string");
      cfg.bias.mode = parse_bias_mode(bi["mode"].get<std::string>());
    }
    cfg.bias.true_omega = get_vector(bi, "true_omega", "bias.");
    cfg.bias.true_rho = get_vector(bi, "true_rho", "bias.");
    cfg.bias.init_omega = get_vector(bi, "init_omega", "bias.");
    cfg.bias.init_rho = get_vector(bi, "init_rho", "bias.");
  }

  if (root.contains("init")) {
    const json& in = root["init"];
    if (!in.is_object()) throw ConfigError("init: expected an object");
    reject_unknown(in, {"from_truth", "rot_angle_deg", "w_offset_mag", "immersed_scale"},
                   "init.");
    cfg.init.from_truth = get_bool(in, "from_truth", cfg.init.from_truth, "init.");
    cfg.init.rot_angle_deg = get_number(in, "rot_angle_deg", cfg.init.rot_angle_deg, "init.");
    cfg.init.w_offset_mag = get_number(in, "w_offset_mag", cfg.init.w_offset_mag, "init.");
    cfg.init.immersed_scale =
        get_number(in, "immersed_scale", cfg.init.immersed_scale, "init.");
  }

  if (root.contains("observer")) {
    const json& ob = root["observer"];
    if (!ob.is_object()) throw ConfigError("observer: expected an object");
    reject_unknown(ob,
                   {"q", "q_s", "r_landmark", "r_bearing", "r_range", "lambda", "p0", "p0_s",
                    "p0_b", "modified_q", "modified_q_scale", "open_loop", "sigma_diag"},
                   "observer.");
    cfg.observer.q = get_number(ob, "q", cfg.observer.q, "observer.");
    cfg.observer.q_s = get_number(ob, "q_s", cfg.observer.q_s, "observer.");
    cfg.observer.r_landmark = get_number(ob, "r_landmark", cfg.observer.r_landmark, "observer.");
    cfg.observer.r_bearing = get_number(ob, "r_bearing", cfg.observer.r_bearing, "observer.");
    cfg.observer.r_range = get_number(ob, "r_range", cfg.observer.r_range, "observer.");
    cfg.observer.lambda = get_number(ob, "lambda", cfg.observer.lambda, "observer.");
    cfg.observer.p0 = get_number(ob, "p0", cfg.observer.p0, "observer.");
    cfg.observer.p0_s = get_number(ob, "p0_s", cfg.observer.p0_s, "observer.");
    cfg.observer.p0_b = get_number(ob, "p0_b", cfg.observer.p0_b, "observer.");
    cfg.observer.modified_q = get_bool(ob, "modified_q", cfg.observer.modified_q, "observer.");
    cfg.observer.modified_q_scale =
        get_number(ob, "modified_q_scale", cfg.observer.modified_q_scale, "observer.");
    cfg.observer.open_loop = get_bool(ob, "open_loop", cfg.observer.open_loop, "observer.");
    cfg.observer.sigma_diag = get_vector(ob, "sigma_diag", "observer.");
  }

  if (root.contains("gramian")) {
    const json& gr = root["gramian"];
    if (!gr.is_object()) throw ConfigError("gramian: expected an object");
    reject_unknown(gr, {"enabled", "window", "period"}, "gramian.");
    cfg.gramian.enabled = get_bool(gr, "enabled", cfg.gramian.enabled, "gramian.");
    cfg.gramian.window = get_number(gr, "window", cfg.gramian.window, "gramian.");
    cfg.gramian.period = get_number(gr, "period", cfg.gramian.period, "gramian.");
  }

  cfg.validate();
  return cfg;
}

ScenarioConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text, path);
}

std::string serialize_config(const ScenarioConfig& cfg) {
  json root;
  root["version"] = 1;
  root["scenario"] = cfg.scenario;
  root["duration"] = cfg.duration;
  root["step"] = cfg.step;
  root["seed"] = cfg.seed;
  root["decimate"] = cfg.decimate;
  if (cfg.shared_reduction >= 0) root["shared_reduction"] = cfg.shared_reduction != 0;
  root["landmarks_only"] = cfg.landmarks_only;
  if (!cfg.slam_landmarks.empty()) {
    json arr = json::array();
    for (const auto& p : cfg.slam_landmarks) arr.push_back({p(0), p(1), p(2)});
    root["landmarks"] = arr;
  }

  json in;
  if (cfg.input.gyro_amp.size()) in["gyro_amp"] = vector_to_json(cfg.input.gyro_amp);
  if (cfg.input.gyro_freq.size()) in["gyro_freq"] = vector_to_json(cfg.input.gyro_freq);
  if (cfg.input.gyro_phase.size()) in["gyro_phase"] = vector_to_json(cfg.input.gyro_phase);
  if (cfg.input.accel_amp.size()) in["accel_amp"] = vector_to_json(cfg.input.accel_amp);
  if (cfg.input.accel_freq.size()) in["accel_freq"] = vector_to_json(cfg.input.accel_freq);
  if (cfg.input.accel_phase.size()) in["accel_phase"] = vector_to_json(cfg.input.accel_phase);
  in["gravity_cancel"] = cfg.input.gravity_cancel;
  root["input"] = in;

  root["noise"] = {{"landmark_std", cfg.noise.landmark_std},
                   {"bearing_std", cfg.noise.bearing_std},
                   {"range_std", cfg.noise.range_std}};

  json bi;
  bi["mode"] = bias_mode_name(cfg.bias.mode);
  if (cfg.bias.true_omega.size()) bi["true_omega"] = vector_to_json(cfg.bias.true_omega);
  if (cfg.bias.true_rho.size()) bi["true_rho"] = vector_to_json(cfg.bias.true_rho);
  if (cfg.bias.init_omega.size()) bi["init_omega"] = vector_to_json(cfg.bias.init_omega);
  if (cfg.bias.init_rho.size()) bi["init_rho"] = vector_to_json(cfg.bias.init_rho);
  root["bias"] = bi;

  root["init"] = {{"from_truth", cfg.init.from_truth},
                  {"rot_angle_deg", cfg.init.rot_angle_deg},
                  {"w_offset_mag", cfg.init.w_offset_mag},
                  {"immersed_scale", cfg.init.immersed_scale}};

  json ob = {{"q", cfg.observer.q},
             {"q_s", cfg.observer.q_s},
             {"r_landmark", cfg.observer.r_landmark},
             {"r_bearing", cfg.observer.r_bearing},
             {"r_range", cfg.observer.r_range},
             {"lambda", cfg.observer.lambda},
             {"p0", cfg.observer.p0},
             {"p0_s", cfg.observer.p0_s},
             {"p0_b", cfg.observer.p0_b},
             {"modified_q", cfg.observer.modified_q},
             {"modified_q_scale", cfg.observer.modified_q_scale},
             {"open_loop", cfg.observer.open_loop}};
  if (cfg.observer.sigma_diag.size()) ob["sigma_diag"] = vector_to_json(cfg.observer.sigma_diag);
  root["observer"] = ob;

  root["gramian"] = {{"enabled", cfg.gramian.enabled},
                     {"window", cfg.gramian.window},
                     {"period", cfg.gramian.period}};

  return root.dump(2) + "\n";
}

namespace {

bool vec_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

}  // namespace

bool config_equal(const ScenarioConfig& a, const ScenarioConfig& b) {
  if (a.slam_landmarks.size() != b.slam_landmarks.size()) return false;
  for (size_t i = 0; i < a.slam_landmarks.size(); ++i) {
    if (a.slam_landmarks[i] != b.slam_landmarks[i]) return false;
  }
  return a.scenario == b.scenario && a.duration == b.duration && a.step == b.step &&
         a.seed == b.seed && a.decimate == b.decimate &&
         a.shared_reduction == b.shared_reduction && a.landmarks_only == b.landmarks_only &&
         vec_equal(a.input.gyro_amp, b.input.gyro_amp) &&
         vec_equal(a.input.gyro_freq, b.input.gyro_freq) &&
         vec_equal(a.input.gyro_phase, b.input.gyro_phase) &&
         vec_equal(a.input.accel_amp, b.input.accel_amp) &&
         vec_equal(a.input.accel_freq, b.input.accel_freq) &&
         vec_equal(a.input.accel_phase, b.input.accel_phase) &&
         a.input.gravity_cancel == b.input.gravity_cancel &&
         a.noise.landmark_std == b.noise.landmark_std &&
         a.noise.bearing_std == b.noise.bearing_std &&
         a.noise.range_std == b.noise.range_std && a.bias.mode == b.bias.mode &&
         vec_equal(a.bias.true_omega, b.bias.true_omega) &&
         vec_equal(a.bias.true_rho, b.bias.true_rho) &&
         vec_equal(a.bias.init_omega, b.bias.init_omega) &&
         vec_equal(a.bias.init_rho, b.bias.init_rho) &&
         a.init.from_truth == b.init.from_truth &&
         a.init.rot_angle_deg == b.init.rot_angle_deg &&
         a.init.w_offset_mag == b.init.w_offset_mag &&
         a.init.immersed_scale == b.init.immersed_scale && a.observer.q == b.observer.q &&
         a.observer.q_s == b.observer.q_s && a.observer.r_landmark == b.observer.r_landmark &&
         a.observer.r_bearing == b.observer.r_bearing &&
         a.observer.r_range == b.observer.r_range && a.observer.lambda == b.observer.lambda &&
         a.observer.p0 == b.observer.p0 && a.observer.p0_s == b.observer.p0_s &&
         a.observer.p0_b == b.observer.p0_b && a.observer.modified_q == b.observer.modified_q &&
         a.observer.modified_q_scale == b.observer.modified_q_scale &&
         a.observer.open_loop == b.observer.open_loop &&
         vec_equal(a.observer.sigma_diag, b.observer.sigma_diag) &&
         a.gramian.enabled == b.gramian.enabled && a.gramian.window == b.gramian.window &&
         a.gramian.period == b.gramian.period;
}

}  // namespace groupobs
