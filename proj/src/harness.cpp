// Copyright 2026 The suspsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "susp/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "susp/dynamics.hpp"
#include "susp/kinematics.hpp"

namespace susp {

// ---------------------------------------------------------------------------
// Counter-based random draws.
// ---------------------------------------------------------------------------

namespace {

std::uint64_t Mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

double CounterUniform(std::uint64_t seed, NoiseChannel channel,
                      std::uint64_t tick, std::uint32_t index) {
  std::uint64_t h = Mix64(seed);
  h = Mix64(h ^ (static_cast<std::uint64_t>(channel) + 0xd1b54a32d192ed03ULL));
  h = Mix64(h ^ (tick + 0x2545f4914f6cdd1dULL));
  h = Mix64(h ^ (static_cast<std::uint64_t>(index) + 0x9e6c63d0876a9a47ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double CounterGaussian(std::uint64_t seed, NoiseChannel channel,
                       std::uint64_t tick, std::uint32_t index) {
  const double u1 = CounterUniform(seed, channel, tick, 2 * index);
  const double u2 = CounterUniform(seed, channel, tick, 2 * index + 1);
  // 1 - u1 lies in (0, 1], keeping the logarithm finite.
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * M_PI * u2);
}

// ---------------------------------------------------------------------------
// Enum names.
// ---------------------------------------------------------------------------

std::string ToString(ControllerKind k) {
  switch (k) {
    case ControllerKind::kNone: return "none";
    case ControllerKind::kLqr: return "lqr";
    case ControllerKind::kPdPlusTask: return "pdplus";
  }
  return "?";
}

std::string ToString(EstimatorKind k) {
  return k == EstimatorKind::kTrueState ? "true_state" : "ekf";
}

std::string ToString(TaskChoice k) {
  switch (k) {
    case TaskChoice::kAuto: return "auto";
    case TaskChoice::kOmni5: return "omni5";
    case TaskChoice::kUnder3: return "under3";
  }
  return "?";
}

std::string ToString(GravityCompMode k) {
  switch (k) {
    case GravityCompMode::kAuto: return "auto";
    case GravityCompMode::kOn: return "on";
    case GravityCompMode::kOff: return "off";
  }
  return "?";
}

namespace {

ControllerKind ControllerFromString(const std::string& s) {
  if (s == "none") return ControllerKind::kNone;
  if (s == "lqr") return ControllerKind::kLqr;
  if (s == "pdplus") return ControllerKind::kPdPlusTask;
  throw ScenarioError("unknown controller: " + s);
}

EstimatorKind EstimatorFromString(const std::string& s) {
  if (s == "true_state") return EstimatorKind::kTrueState;
  if (s == "ekf") return EstimatorKind::kEkf;
  throw ScenarioError("unknown estimator: " + s);
}

TaskChoice TaskFromString(const std::string& s) {
  if (s == "auto") return TaskChoice::kAuto;
  if (s == "omni5") return TaskChoice::kOmni5;
  if (s == "under3") return TaskChoice::kUnder3;
  throw ScenarioError("unknown task: " + s);
}

GravityCompMode GravityCompFromString(const std::string& s) {
  if (s == "auto") return GravityCompMode::kAuto;
  if (s == "on") return GravityCompMode::kOn;
  if (s == "off") return GravityCompMode::kOff;
  throw ScenarioError("unknown gravity compensation mode: " + s);
}

// ---------------------------------------------------------------------------
// Formatting helpers.
// ---------------------------------------------------------------------------

std::string Fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string FmtVec(const VecXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += Fmt(v[i]);
  }
  return out;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double ParseDouble(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (Trim(v.substr(pos)).empty()) return x;
  } catch (const std::exception&) {
  }
  throw ScenarioError("invalid number for " + key + ": '" + v + "'");
}

VecXd ParseVec(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  std::vector<double> vals;
  std::string tok;
  while (in >> tok) vals.push_back(ParseDouble(key, tok));
  if (vals.empty()) throw ScenarioError("empty vector for " + key);
  VecXd out(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = vals[i];
  return out;
}

VecXd ParseVecN(const std::string& key, const std::string& v,
                Eigen::Index n) {
  const VecXd out = ParseVec(key, v);
  if (out.size() != n) {
    throw ScenarioError(key + " expects " + std::to_string(n) + " values");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ScenarioError(key + " expects true or false, got '" + v + "'");
}

std::uint64_t ParseSeed(const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (Trim(v.substr(pos)).empty() && v.find('-') == std::string::npos) {
      return x;
    }
  } catch (const std::exception&) {
  }
  throw ScenarioError("invalid seed: '" + v + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario serialization.
// ---------------------------------------------------------------------------

std::string SerializeScenario(const Scenario& s) {
  std::string out;
  auto kv = [&](const std::string& k, const std::string& v) {
    out += k + " = " + v + "\n";
  };
  kv("platform", ToString(s.platform));
  kv("controller", ToString(s.controller));
  kv("estimator", ToString(s.estimator));
  kv("duration", Fmt(s.duration));
  kv("dt_sim", Fmt(s.dtSim));
  kv("dt_ctrl", Fmt(s.dtCtrl));
  kv("seed", std::to_string(s.seed));
  kv("x0.q", FmtVec(s.q0));
  kv("x0.qd", FmtVec(s.qd0));
  kv("params.l1", Fmt(s.params.L1));
  kv("params.l2", Fmt(s.params.L2));
  kv("params.m1", Fmt(s.params.m1));
  kv("params.m2", Fmt(s.params.m2));
  kv("params.inertia", FmtVec(s.params.inertia));
  kv("params.arm_length", Fmt(s.params.armLength));
  kv("params.gravity", Fmt(s.params.gravity));
  kv("params.f_max", Fmt(s.fMax));
  kv("lqr.q_diag", FmtVec(s.lqrQDiag));
  kv("lqr.r_scale", Fmt(s.lqrRScale));
  kv("pdplus.task", ToString(s.task));
  kv("pdplus.kp", FmtVec(s.pdKp));
  kv("pdplus.kd", FmtVec(s.pdKd));
  kv("pdplus.target", FmtVec(s.pdTarget));
  kv("pdplus.gravity_comp", ToString(s.gravityComp));
  kv("sensors.velocity.rate", Fmt(s.velocitySensor.rate));
  kv("sensors.velocity.std", Fmt(s.velocitySensor.std));
  kv("sensors.orientation.rate", Fmt(s.orientationSensor.rate));
  kv("sensors.orientation.std", Fmt(s.orientationSensor.std));
  kv("ekf.q_angles", Fmt(s.ekfQAngles));
  kv("ekf.q_rates", Fmt(s.ekfQRates));
  kv("ekf.p0_angles", Fmt(s.ekfP0Angles));
  kv("ekf.p0_rates", Fmt(s.ekfP0Rates));
  kv("noise.process_angles", Fmt(s.processNoiseAngles));
  kv("noise.process_rates", Fmt(s.processNoiseRates));
  kv("ideal_allocation", s.idealAllocation ? "true" : "false");
  return out;
}

Scenario ParseScenario(const std::string& text) {
  Scenario s;
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ScenarioError("line " + std::to_string(lineNo) +
                          ": expected 'key = value', got '" + t + "'");
    }
    const std::string key = Trim(t.substr(0, eq));
    const std::string val = Trim(t.substr(eq + 1));
    if (key.empty() || val.empty()) {
      throw ScenarioError("line " + std::to_string(lineNo) +
                          ": empty key or value");
    }

    if (key == "platform") {
      s.platform = PlatformKindFromString(val);
    } else if (key == "controller") {
      s.controller = ControllerFromString(val);
    } else if (key == "estimator") {
      s.estimator = EstimatorFromString(val);
    } else if (key == "duration") {
      s.duration = ParseDouble(key, val);
    } else if (key == "dt_sim") {
      s.dtSim = ParseDouble(key, val);
    } else if (key == "dt_ctrl") {
      s.dtCtrl = ParseDouble(key, val);
    } else if (key == "seed") {
      s.seed = ParseSeed(val);
    } else if (key == "x0.q") {
      s.q0 = ParseVecN(key, val, 5);
    } else if (key == "x0.qd") {
      s.qd0 = ParseVecN(key, val, 5);
    } else if (key == "params.l1") {
      s.params.L1 = ParseDouble(key, val);
    } else if (key == "params.l2") {
      s.params.L2 = ParseDouble(key, val);
    } else if (key == "params.m1") {
      s.params.m1 = ParseDouble(key, val);
    } else if (key == "params.m2") {
      s.params.m2 = ParseDouble(key, val);
    } else if (key == "params.inertia") {
      s.params.inertia = ParseVecN(key, val, 3);
    } else if (key == "params.arm_length") {
      s.params.armLength = ParseDouble(key, val);
    } else if (key == "params.gravity") {
      s.params.gravity = ParseDouble(key, val);
    } else if (key == "params.f_max") {
      s.fMax = ParseDouble(key, val);
    } else if (key == "lqr.q_diag") {
      s.lqrQDiag = ParseVecN(key, val, 10);
    } else if (key == "lqr.r_scale") {
      s.lqrRScale = ParseDouble(key, val);
    } else if (key == "pdplus.task") {
      s.task = TaskFromString(val);
    } else if (key == "pdplus.kp") {
      s.pdKp = ParseVec(key, val);
    } else if (key == "pdplus.kd") {
      s.pdKd = ParseVec(key, val);
    } else if (key == "pdplus.target") {
      s.pdTarget = ParseVec(key, val);
    } else if (key == "pdplus.gravity_comp") {
      s.gravityComp = GravityCompFromString(val);
    } else if (key == "sensors.velocity.rate") {
      s.velocitySensor.rate = ParseDouble(key, val);
    } else if (key == "sensors.velocity.std") {
      s.velocitySensor.std = ParseDouble(key, val);
    } else if (key == "sensors.orientation.rate") {
      s.orientationSensor.rate = ParseDouble(key, val);
    } else if (key == "sensors.orientation.std") {
      s.orientationSensor.std = ParseDouble(key, val);
    } else if (key == "ekf.q_angles") {
      s.ekfQAngles = ParseDouble(key, val);
    } else if (key == "ekf.q_rates") {
      s.ekfQRates = ParseDouble(key, val);
    } else if (key == "ekf.p0_angles") {
      s.ekfP0Angles = ParseDouble(key, val);
    } else if (key == "ekf.p0_rates") {
      s.ekfP0Rates = ParseDouble(key, val);
    } else if (key == "noise.process_angles") {
      s.processNoiseAngles = ParseDouble(key, val);
    } else if (key == "noise.process_rates") {
      s.processNoiseRates = ParseDouble(key, val);
    } else if (key == "ideal_allocation") {
      s.idealAllocation = ParseBool(key, val);
    } else {
      throw ScenarioError("unknown scenario key: '" + key + "'");
    }
  }
  ValidateScenario(s);
  return s;
}

Scenario LoadScenarioFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseScenario(buf.str());
}

void WriteTextFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Validation and resolution.
// ---------------------------------------------------------------------------

namespace {

TaskKind ResolveTask(const Scenario& s) {
  if (s.task == TaskChoice::kOmni5) return TaskKind::kOmni5;
  if (s.task == TaskChoice::kUnder3) return TaskKind::kUnder3;
  return s.platform == PlatformKind::kOmnidirectional ? TaskKind::kOmni5
                                                      : TaskKind::kUnder3;
}

int TaskWidth(TaskKind k) { return k == TaskKind::kOmni5 ? 5 : 3; }

// Expands 3-entry PD settings (planar position + yaw) onto the full task:
// the attitude gain covers roll, pitch, and yaw; positional targets map to
// the matching coordinates with zero roll/pitch targets.
VecXd ExpandGains(const VecXd& g, int w) {
  if (g.size() == w) return g;
  VecXd out(5);
  out << g[0], g[1], g[2], g[2], g[2];
  return out;
}

VecXd ExpandTarget(const VecXd& t, int w) {
  if (t.size() == w) return t;
  VecXd out(5);
  out << t[0], t[1], 0.0, 0.0, t[2];
  return out;
}

}  // namespace

void ValidateScenario(const Scenario& s) {
  if (!(s.duration > 0) || !std::isfinite(s.duration)) {
    throw ScenarioError("duration must be positive");
  }
  if (!(s.dtSim > 0) || !(s.dtCtrl > 0)) {
    throw ScenarioError("time steps must be positive");
  }
  if (s.dtSim > s.dtCtrl + 1e-15) {
    throw ScenarioError("dt_sim must not exceed dt_ctrl");
  }
  const double ratio = s.dtCtrl / s.dtSim;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw ScenarioError("dt_ctrl must be an integer multiple of dt_sim");
  }
  if (!s.params.valid()) throw ScenarioError("invalid pendulum parameters");
  if (!(s.fMax > 0)) throw ScenarioError("params.f_max must be positive");
  if (s.lqrQDiag.size() != 10 || s.lqrQDiag.minCoeff() < 0) {
    throw ScenarioError("lqr.q_diag must be 10 nonnegative values");
  }
  if (!(s.lqrRScale > 0)) throw ScenarioError("lqr.r_scale must be positive");
  if (!s.q0.allFinite() || !s.qd0.allFinite()) {
    throw ScenarioError("x0 must be finite");
  }

  const Eigen::Index ng = s.pdKp.size();
  if (ng != 3 && ng != 5) {
    throw ScenarioError("pdplus.kp must have 3 or 5 entries");
  }
  if (s.pdKd.size() != ng || s.pdTarget.size() != ng) {
    throw ScenarioError("pdplus.kp, pdplus.kd, pdplus.target sizes differ");
  }
  if (s.pdKp.minCoeff() < 0 || s.pdKd.minCoeff() < 0) {
    throw ScenarioError("pd gains must be nonnegative");
  }
  if (s.controller == ControllerKind::kPdPlusTask) {
    const TaskKind tk = ResolveTask(s);
    if (tk == TaskKind::kOmni5 &&
        s.platform != PlatformKind::kOmnidirectional) {
      throw ScenarioError(
          "the full 5-coordinate task requires the omnidirectional platform");
    }
    if (ng == 5 && tk == TaskKind::kUnder3) {
      throw ScenarioError("5-entry pd gains with a 3-coordinate task");
    }
  }
  if (s.velocitySensor.rate < 0 || s.orientationSensor.rate < 0 ||
      s.velocitySensor.std < 0 || s.orientationSensor.std < 0) {
    throw ScenarioError("sensor rates and stds must be nonnegative");
  }
  if (s.ekfQAngles < 0 || s.ekfQRates < 0 || !(s.ekfP0Angles > 0) ||
      !(s.ekfP0Rates > 0)) {
    throw ScenarioError("ekf noise settings must be nonnegative (p0 > 0)");
  }
  if (s.processNoiseAngles < 0 || s.processNoiseRates < 0) {
    throw ScenarioError("process noise must be nonnegative");
  }
}

// ---------------------------------------------------------------------------
// Metrics helpers.
// ---------------------------------------------------------------------------

double SettlingTime(const std::vector<double>& t,
                    const std::vector<double>& v, double band, double floor) {
  if (t.empty() || t.size() != v.size()) {
    throw std::invalid_argument("settling time needs a nonempty (t, v) series");
  }
  const double thr = band * std::max(std::abs(v.front()), floor);
  std::size_t lastOut = t.size();  // sentinel: none outside
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > thr) lastOut = i;
  }
  if (lastOut == t.size()) return 0.0;
  if (lastOut + 1 >= t.size()) return -1.0;  // still outside at the end
  return t[lastOut + 1];
}

// ---------------------------------------------------------------------------
// Scenario execution.
// ---------------------------------------------------------------------------

namespace {

// Everything derived from the scenario before the loop starts.
struct RunSetup {
  PlatformConfig cfg;
  int nMotors = 0;
  TaskKind taskKind = TaskKind::kUnder3;
  TaskGains gains;            // resolved PD+ gains
  MatXd K;                    // LQR gain (m x 10)
  MatXd lqrBsel;              // input embedding used for the design
  int ctrlEvery = 2;          // sim steps per control tick
  int nTicks = 0;
  int velEvery = 0;           // ticks between velocity packets (0 = never)
  int oriEvery = 0;
  Mat10 ekfQ = Mat10::Zero();
  Mat10 ekfP0 = Mat10::Zero();
  SensorChannel velChan;
  SensorChannel oriChan;
};

RunSetup BuildSetup(const Scenario& s) {
  RunSetup r;
  r.cfg = BuiltinPlatform(s.platform);
  r.cfg.fMax = s.fMax;
  r.nMotors = static_cast<int>(r.cfg.A.cols());
  r.ctrlEvery = static_cast<int>(std::llround(s.dtCtrl / s.dtSim));
  r.nTicks = static_cast<int>(std::llround(s.duration / s.dtCtrl));
  if (r.nTicks < 1) throw ScenarioError("duration shorter than one tick");

  if (s.controller == ControllerKind::kLqr) {
    r.lqrBsel = r.cfg.Bsel;
    const LinearizedDynamics lin =
        Linearize(Vec10::Zero(), Vec6::Zero(), s.params, r.lqrBsel);
    const MatXd Q = MatXd(s.lqrQDiag.asDiagonal());
    const MatXd R = s.lqrRScale *
                    MatXd::Identity(r.lqrBsel.cols(), r.lqrBsel.cols());
    r.K = SolveCare(lin.A, lin.B, Q, R).K;
  }

  r.taskKind = ResolveTask(s);
  if (s.controller == ControllerKind::kPdPlusTask) {
    const int w = TaskWidth(r.taskKind);
    r.gains.kp = ExpandGains(s.pdKp, w);
    r.gains.kd = ExpandGains(s.pdKd, w);
    r.gains.xDes = ExpandTarget(s.pdTarget, w);
    r.gains.xdDes = VecXd::Zero(w);
    r.gains.xddDes = VecXd::Zero(w);
    switch (s.gravityComp) {
      case GravityCompMode::kOn: r.gains.gravityComp = true; break;
      case GravityCompMode::kOff: r.gains.gravityComp = false; break;
      case GravityCompMode::kAuto:
        r.gains.gravityComp = r.gains.xDes.cwiseAbs().maxCoeff() > 0;
        break;
    }
  }

  auto ticksFor = [&](double rate) -> int {
    if (!(rate > 0)) return 0;
    return std::max(1, static_cast<int>(std::llround(1.0 / (rate * s.dtCtrl))));
  };
  r.velEvery = ticksFor(s.velocitySensor.rate);
  r.oriEvery = ticksFor(s.orientationSensor.rate);

  Vec10 qdiag;
  qdiag << Vec5::Constant(s.ekfQAngles), Vec5::Constant(s.ekfQRates);
  r.ekfQ = qdiag.asDiagonal();
  Vec10 p0;
  p0 << Vec5::Constant(s.ekfP0Angles), Vec5::Constant(s.ekfP0Rates);
  r.ekfP0 = p0.asDiagonal();

  r.velChan = DefaultChannel(SensorId::kVelocity);
  r.velChan.rate = s.velocitySensor.rate;
  r.velChan.R = s.velocitySensor.std * s.velocitySensor.std * Mat3::Identity();
  r.oriChan = DefaultChannel(SensorId::kOrientation);
  r.oriChan.rate = s.orientationSensor.rate;
  r.oriChan.R =
      s.orientationSensor.std * s.orientationSensor.std * Mat3::Identity();
  return r;
}

// Per-tick controller output.
struct TickCommand {
  Vec6 wrenchCmd = Vec6::Zero();   // commanded body wrench (canonical 6D)
  BodyWrench applied;              // wrench the plant actually receives
  VecXd thrusts;                   // per-motor thrusts (zeros when ideal)
  VecXd pwm;
  bool saturated = false;
};

[[noreturn]] void AbortRun(double t, const Vec10& x, const char* what) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "scenario aborted at t = %.6f s: %s; state q = [%g %g %g %g "
                "%g], qd = [%g %g %g %g %g]",
                t, what, x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8],
                x[9]);
  throw NumericalError(buf);
}

}  // namespace

RunResult RunScenario(const Scenario& s) {
  ValidateScenario(s);
  const RunSetup r = BuildSetup(s);
  const PendulumParams& P = s.params;
  const bool useEkf = s.estimator == EstimatorKind::kEkf;
  const bool isPd = s.controller == ControllerKind::kPdPlusTask;
  const int w = TaskWidth(r.taskKind);

  Vec10 x;
  x << s.q0, s.qd0;

  EkfState est;
  est.x = x;
  est.P = r.ekfP0;
  est.t = 0.0;
  if (useEkf) {
    // Draw the initial estimate around the truth with covariance P0 so the
    // filter's stated uncertainty matches its actual initial error.
    for (int i = 0; i < 10; ++i) {
      est.x[i] += std::sqrt(r.ekfP0(i, i)) *
                  CounterGaussian(s.seed, NoiseChannel::kInitialEstimate, 0,
                                  static_cast<std::uint32_t>(i));
    }
  }

  RunResult out;
  out.log.dt = s.dtCtrl;
  out.log.scenarioEcho = SerializeScenario(s);
  auto& cols = out.log.columns;
  cols.push_back("t");
  for (int i = 1; i <= 5; ++i) cols.push_back("q" + std::to_string(i));
  for (int i = 1; i <= 5; ++i) cols.push_back("qd" + std::to_string(i));
  for (int i = 1; i <= 5; ++i) cols.push_back("qhat" + std::to_string(i));
  for (int i = 1; i <= 5; ++i) cols.push_back("qdhat" + std::to_string(i));
  for (const char* n : {"u_fx", "u_fy", "u_fz", "u_mx", "u_my", "u_mz"})
    cols.push_back(n);
  for (int i = 1; i <= r.nMotors; ++i) cols.push_back("f" + std::to_string(i));
  for (int i = 1; i <= r.nMotors; ++i)
    cols.push_back("pwm" + std::to_string(i));
  for (int i = 1; i <= w; ++i) cols.push_back("task" + std::to_string(i));
  cols.push_back("nees");
  const std::size_t nCols = cols.size();

  std::vector<MotorCommand> motorLog;
  motorLog.reserve(static_cast<std::size_t>(r.nTicks));
  int satCount = 0;
  double pdResidualMax = isPd && !useEkf ? 0.0 : -1.0;

  TickCommand cmd;
  cmd.thrusts = VecXd::Zero(r.nMotors);
  cmd.pwm = VecXd::Zero(r.nMotors);

  std::uint64_t simStep = 0;
  const double procA = std::sqrt(s.processNoiseAngles * s.dtSim);
  const double procR = std::sqrt(s.processNoiseRates * s.dtSim);

  auto taskCoordsOf = [&](const Vec10& state) -> VecXd {
    try {
      return TaskCoordinates(Vec5(state.head<5>()), P, r.taskKind);
    } catch (const NumericalError&) {
      return VecXd::Constant(w, std::nan(""));
    }
  };

  auto appendRow = [&](double t) {
    VecXd row(static_cast<Eigen::Index>(nCols));
    Eigen::Index at = 0;
    row[at++] = t;
    row.segment<10>(at) = x;
    at += 10;
    row.segment<10>(at) = useEkf ? est.x : x;
    at += 10;
    row.segment<6>(at) = cmd.wrenchCmd;
    at += 6;
    row.segment(at, r.nMotors) = cmd.thrusts;
    at += r.nMotors;
    row.segment(at, r.nMotors) = cmd.pwm;
    at += r.nMotors;
    row.segment(at, w) = taskCoordsOf(x);
    at += w;
    double nees = -1.0;
    if (useEkf) {
      const Vec10 e = est.x - x;
      const Eigen::LLT<Mat10> llt(est.P);
      if (llt.info() == Eigen::Success) {
        nees = e.dot(llt.solve(e));
        out.nees.push_back(nees);
      }
    }
    row[at++] = nees;
    out.log.rows.push_back(row);
  };

  for (int k = 0; k < r.nTicks; ++k) {
    const double t = k * s.dtCtrl;

    // --- Measurement arrivals (gated: absent channels contribute nothing).
    if (useEkf) {
      auto arrive = [&](const SensorChannel& chan, int every,
                        NoiseChannel noise, SensorId id) {
        if (every <= 0 || k % every != 0) return;
        Vec3 z;
        try {
          z = ChannelModel(x, P, id);
        } catch (const NumericalError&) {
          return;  // channel unusable at this instant (gimbal-adjacent)
        }
        const double sd = std::sqrt(chan.R(0, 0));
        for (int i = 0; i < 3; ++i) {
          z[i] += sd * CounterGaussian(s.seed, noise,
                                       static_cast<std::uint64_t>(k),
                                       static_cast<std::uint32_t>(i));
        }
        MeasurementPacket pkt;
        pkt.t = t;
        pkt.channel = id;
        pkt.z = z;
        try {
          est = EkfUpdate(est, pkt, chan, P);
        } catch (const NumericalError&) {
          // Correction unusable (estimate gimbal-adjacent); keep the prior.
        }
      };
      arrive(r.velChan, r.velEvery, NoiseChannel::kVelocitySensor,
             SensorId::kVelocity);
      arrive(r.oriChan, r.oriEvery, NoiseChannel::kOrientationSensor,
             SensorId::kOrientation);
    }

    // --- Controller.
    const Vec10 fb = useEkf ? est.x : x;
    cmd.saturated = false;
    try {
      if (s.controller == ControllerKind::kNone) {
        cmd.wrenchCmd.setZero();
        cmd.applied = BodyWrench::Zero();
        cmd.thrusts.setZero();
        cmd.pwm.setZero();
      } else if (s.controller == ControllerKind::kLqr) {
        const VecXd u = LqrCommand(r.K, fb);
        cmd.wrenchCmd = r.lqrBsel * u;
        if (s.idealAllocation) {
          cmd.applied = BodyWrench::FromVector(cmd.wrenchCmd);
          cmd.thrusts.setZero();
          cmd.pwm.setZero();
        } else {
          const AllocationResult a = AllocateThrusts(u, r.cfg);
          cmd.thrusts = a.thrusts;
          cmd.pwm = PwmOfThrusts(a.thrusts, r.cfg.fMax);
          cmd.saturated = a.saturated;
          cmd.applied = BodyWrench::FromVector(Vec6(r.cfg.Bsel * a.achieved));
        }
      } else {
        const Vec5 qFb = fb.head<5>();
        const Vec5 qdFb = fb.tail<5>();
        const Mat65 Jbody = BodyJacobian(qFb, P);
        if (r.taskKind == TaskKind::kOmni5) {
          const TaskQuantities tq =
              TaskSpaceQuantities(qFb, qdFb, P, TaskKind::kOmni5);
          const VecXd F = PdPlusOmni(tq, r.gains);
          const Vec5 tau = tq.J.transpose() * F;
          // Canonical commanded wrench: the minimum-norm body wrench whose
          // joint torque equals tau.
          const Vec6 uMin =
              Jbody * (Jbody.transpose() * Jbody).llt().solve(tau);
          cmd.wrenchCmd = uMin;
          if (s.idealAllocation) {
            cmd.applied = BodyWrench::FromVector(uMin);
            cmd.thrusts.setZero();
            cmd.pwm.setZero();
          } else {
            // Allocate in joint-torque space so the full rotor null space
            // is available to realize tau.
            const MatXd G = Jbody.transpose() * r.cfg.A;
            const AllocationResult a = BoundedMinNorm(G, tau, 0.0, r.cfg.fMax);
            cmd.thrusts = a.thrusts;
            cmd.pwm = PwmOfThrusts(a.thrusts, r.cfg.fMax);
            cmd.saturated = a.saturated;
            cmd.applied = BodyWrench::FromVector(Vec6(r.cfg.A * a.thrusts));
          }
        } else {
          const TaskDecomposition dec =
              UnderactuatedDecomposition(qFb, qdFb, P);
          const VecXd Fx = PdPlusUnder(dec, r.gains);
          const ActuationSplit split =
              ResolveActuation(Fx, dec, qFb, P, r.cfg);
          cmd.wrenchCmd = r.cfg.Bsel * split.up;
          if (s.idealAllocation) {
            cmd.applied = BodyWrench::FromVector(cmd.wrenchCmd);
            cmd.thrusts.setZero();
            cmd.pwm.setZero();
          } else {
            const AllocationResult a = AllocateThrusts(split.up, r.cfg);
            cmd.thrusts = a.thrusts;
            cmd.pwm = PwmOfThrusts(a.thrusts, r.cfg.fMax);
            cmd.saturated = a.saturated;
            cmd.applied =
                BodyWrench::FromVector(Vec6(r.cfg.Bsel * a.achieved));
          }
        }
      }
    } catch (const NumericalError& e) {
      AbortRun(t, x, e.what());
    }
    if (cmd.saturated) ++satCount;
    if (!s.idealAllocation && s.controller != ControllerKind::kNone) {
      motorLog.push_back(MotorCommand{cmd.thrusts, cmd.pwm});
    }

    // --- Closed-loop identity residual (true-state PD+ runs).
    if (isPd && !useEkf) {
      try {
        const Vec5 q = x.head<5>();
        const Vec5 qd = x.tail<5>();
        const DynamicsTerms d = EvalDynamicsTerms(q, qd, P);
        const Vec5 tauApplied =
            BodyJacobian(q, P).transpose() * cmd.applied.ToVector();
        const Vec5 qdd = d.M.llt().solve(tauApplied - d.C * qd - d.g);
        const TaskQuantities tq = TaskSpaceQuantities(q, qd, P, r.taskKind);
        const VecXd xdd = tq.J * qdd + tq.Jdot * qd;
        const VecXd resid =
            tq.Lambda * (r.gains.xddDes - xdd) +
            (tq.mu + MatXd(r.gains.kd.asDiagonal())) * (r.gains.xdDes - tq.xd) +
            r.gains.kp.asDiagonal() * (r.gains.xDes - tq.x);
        pdResidualMax = std::max(pdResidualMax, resid.norm());
      } catch (const NumericalError& e) {
        AbortRun(t, x, e.what());
      }
    }

    appendRow(t);

    // --- Plant propagation over one control period (zero-order hold).
    try {
      for (int j = 0; j < r.ctrlEvery; ++j) {
        x = StepRk4(x, cmd.applied, s.dtSim, P);
        if (procA > 0 || procR > 0) {
          for (int i = 0; i < 5; ++i) {
            if (procA > 0) {
              x[i] += procA * CounterGaussian(s.seed, NoiseChannel::kProcess,
                                              simStep,
                                              static_cast<std::uint32_t>(i));
            }
            if (procR > 0) {
              x[5 + i] += procR *
                          CounterGaussian(s.seed, NoiseChannel::kProcess,
                                          simStep,
                                          static_cast<std::uint32_t>(5 + i));
            }
          }
        }
        ++simStep;
        if (!x.allFinite()) AbortRun((k + 1) * s.dtCtrl, x, "state diverged");
      }
    } catch (const NumericalError& e) {
      AbortRun(k * s.dtCtrl, x, e.what());
    }

    // --- Filter prediction under the applied wrench.
    if (useEkf) {
      try {
        est = EkfPredict(est, cmd.applied, s.dtCtrl, r.ekfQ, P);
      } catch (const NumericalError& e) {
        AbortRun(k * s.dtCtrl, x, e.what());
      }
    }
  }
  appendRow(r.nTicks * s.dtCtrl);

  // --- Metrics.
  Metrics& m = out.metrics;
  {
    std::vector<double> ts(out.log.rows.size());
    for (std::size_t i = 0; i < out.log.rows.size(); ++i)
      ts[i] = out.log.rows[i][0];
    for (int j = 0; j < 5; ++j) {
      std::vector<double> series(out.log.rows.size());
      for (std::size_t i = 0; i < out.log.rows.size(); ++i)
        series[i] = out.log.rows[i][1 + j];
      m.settlingTime[j] = SettlingTime(ts, series, 0.02);
      double pk = 0;
      for (double v : series) pk = std::max(pk, std::abs(v));
      m.peak[j] = pk;
    }
  }
  m.energy = motorLog.empty() ? 0.0 : EnergyEstimate(motorLog, s.dtCtrl);
  m.saturationFraction =
      r.nTicks > 0 ? static_cast<double>(satCount) / r.nTicks : 0.0;
  {
    const VecXd lastTask = taskCoordsOf(x);
    if (isPd && lastTask.allFinite()) {
      m.finalTaskError = (lastTask - r.gains.xDes).norm();
    } else {
      m.finalTaskError = x.head<5>().norm();
    }
  }
  m.pdResidualMax = pdResidualMax;
  if (!out.nees.empty()) {
    int inBand = 0;
    for (double v : out.nees) {
      if (v >= kChi2Lo10 && v <= kChi2Hi10) ++inBand;
    }
    m.neesInBandFraction = static_cast<double>(inBand) /
                           static_cast<double>(out.nees.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Platform comparison.
// ---------------------------------------------------------------------------

PlatformComparison ComparePlatforms(const Scenario& base) {
  PlatformComparison c;
  const std::array<PlatformKind, 3> kinds = {PlatformKind::kOmnidirectional,
                                             PlatformKind::kPlanarThrust,
                                             PlatformKind::kMinimalActuated};
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    ComparisonEntry& e = c.entries[i];
    e.platform = kinds[i];
    Scenario s = base;
    s.platform = kinds[i];
    try {
      e.result = RunScenario(s);
      e.ok = true;
    } catch (const std::exception& ex) {
      e.ok = false;
      e.error = ex.what();
    }
  }
  for (int i = 0; i < 2; ++i) {
    const ComparisonEntry& od = c.entries[0];
    const ComparisonEntry& other = c.entries[static_cast<std::size_t>(i + 1)];
    if (od.ok && other.ok && od.result.metrics.energy > 0) {
      c.energyDeltaPct[static_cast<std::size_t>(i)] =
          100.0 * (other.result.metrics.energy - od.result.metrics.energy) /
          od.result.metrics.energy;
    } else {
      c.energyDeltaPct[static_cast<std::size_t>(i)] =
          std::numeric_limits<double>::quiet_NaN();
    }
  }
  return c;
}

std::string FormatComparison(const PlatformComparison& c) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %12s %10s %12s %11s %12s\n",
                "platform", "energy", "dE_vs_od", "settle_max", "saturation",
                "final_err");
  out += buf;
  for (std::size_t i = 0; i < c.entries.size(); ++i) {
    const ComparisonEntry& e = c.entries[i];
    if (!e.ok) {
      std::snprintf(buf, sizeof buf, "%-18s failed: %s\n",
                    ToString(e.platform).c_str(), e.error.c_str());
      out += buf;
      continue;
    }
    const Metrics& m = e.result.metrics;
    const double settleMax = m.settlingTime.maxCoeff();
    const bool unsettled = m.settlingTime.minCoeff() < 0;
    char settleBuf[32];
    if (unsettled) {
      std::snprintf(settleBuf, sizeof settleBuf, "%s", "unsettled");
    } else {
      std::snprintf(settleBuf, sizeof settleBuf, "%.3f", settleMax);
    }
    char deltaBuf[32];
    if (i == 0) {
      std::snprintf(deltaBuf, sizeof deltaBuf, "%s", "--");
    } else if (std::isnan(c.energyDeltaPct[i - 1])) {
      std::snprintf(deltaBuf, sizeof deltaBuf, "%s", "n/a");
    } else {
      std::snprintf(deltaBuf, sizeof deltaBuf, "%+.1f%%",
                    c.energyDeltaPct[i - 1]);
    }
    std::snprintf(buf, sizeof buf, "%-18s %12.4f %10s %12s %11.3f %12.4g\n",
                  ToString(e.platform).c_str(), m.energy, deltaBuf, settleBuf,
                  m.saturationFraction, m.finalTaskError);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export.
// ---------------------------------------------------------------------------

namespace {

std::string CommentBlock(const std::string& text) {
  std::string out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out += "# " + line + "\n";
  return out;
}

int ColumnIndex(const SimLog& log, const std::string& name) {
  for (std::size_t i = 0; i < log.columns.size(); ++i) {
    if (log.columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

std::string FormatMetrics(const Metrics& m) {
  std::string out;
  out += "# metric.settling_time = " + FmtVec(m.settlingTime) + "\n";
  out += "# metric.peak = " + FmtVec(m.peak) + "\n";
  out += "# metric.energy = " + Fmt(m.energy) + "\n";
  out += "# metric.saturation_fraction = " + Fmt(m.saturationFraction) + "\n";
  out += "# metric.final_task_error = " + Fmt(m.finalTaskError) + "\n";
  out += "# metric.pd_residual_max = " + Fmt(m.pdResidualMax) + "\n";
  out += "# metric.nees_in_band = " + Fmt(m.neesInBandFraction) + "\n";
  return out;
}

std::string RenderCsv(const SimLog& log) {
  std::string out = CommentBlock(log.scenarioEcho);
  for (std::size_t i = 0; i < log.columns.size(); ++i) {
    if (i) out += ',';
    out += log.columns[i];
  }
  out += '\n';
  for (const VecXd& row : log.rows) {
    for (Eigen::Index i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += Fmt(row[i]);
    }
    out += '\n';
  }
  return out;
}

void ExportLog(const RunResult& r, const Scenario& s,
               const std::string& prefix) {
  WriteTextFile(prefix + ".csv", RenderCsv(r.log));
  std::string summary = SerializeScenario(s);
  summary += FormatMetrics(r.metrics);
  WriteTextFile(prefix + "_summary.txt", summary);
}

void ExportComparison(const PlatformComparison& c, const Scenario& s,
                      const std::string& prefix) {
  WriteTextFile(prefix + "_table.txt",
                CommentBlock(SerializeScenario(s)) + FormatComparison(c));

  // Row count shared across completed runs (identical scenario timing).
  std::size_t nRows = 0;
  for (const ComparisonEntry& e : c.entries) {
    if (e.ok) nRows = nRows ? std::min(nRows, e.result.log.rows.size())
                            : e.result.log.rows.size();
  }
  const std::array<std::string, 3> tag = {"od", "pt", "ma"};

  auto exportFig = [&](const std::string& name,
                       const std::vector<std::string>& perPlatformCols) {
    std::string csv = "t";
    for (std::size_t p = 0; p < c.entries.size(); ++p) {
      for (const std::string& col : perPlatformCols) {
        const SimLog& log = c.entries[p].result.log;
        if (!c.entries[p].ok || ColumnIndex(log, col) < 0) continue;
        csv += "," + tag[p] + "_" + col;
      }
    }
    csv += '\n';
    for (std::size_t i = 0; i < nRows; ++i) {
      std::string line;
      bool first = true;
      for (std::size_t p = 0; p < c.entries.size(); ++p) {
        if (!c.entries[p].ok) continue;
        const SimLog& log = c.entries[p].result.log;
        if (first) {
          line += Fmt(log.rows[i][0]);
          first = false;
        }
        for (const std::string& col : perPlatformCols) {
          const int idx = ColumnIndex(log, col);
          if (idx < 0) continue;
          line += "," + Fmt(log.rows[i][static_cast<Eigen::Index>(idx)]);
        }
      }
      csv += line + '\n';
    }
    WriteTextFile(prefix + "_fig_" + name + ".csv", csv);
  };

  exportFig("joints", {"q1", "q2", "q3", "q4", "q5"});
  exportFig("wrench", {"u_fx", "u_fy", "u_fz", "u_mx", "u_my", "u_mz"});
  exportFig("task", {"task1", "task2", "task3", "task4", "task5"});

  // Cumulative PWM-weighted thrust integral per platform.
  {
    std::string csv = "t";
    for (std::size_t p = 0; p < c.entries.size(); ++p) {
      if (c.entries[p].ok) csv += "," + tag[p] + "_energy";
    }
    csv += '\n';
    std::array<double, 3> acc = {0, 0, 0};
    for (std::size_t i = 0; i < nRows; ++i) {
      std::string line;
      bool first = true;
      for (std::size_t p = 0; p < c.entries.size(); ++p) {
        if (!c.entries[p].ok) continue;
        const SimLog& log = c.entries[p].result.log;
        if (first) {
          line += Fmt(log.rows[i][0]);
          first = false;
        }
        // Columns f1..fn and pwm1..pwmn are contiguous blocks.
        double power = 0;
        const int f0 = ColumnIndex(log, "f1");
        const int nm = ColumnIndex(log, "pwm1") - f0;
        if (f0 >= 0 && nm > 0) {
          for (int j = 0; j < nm; ++j) {
            power += log.rows[i][f0 + j] * log.rows[i][f0 + nm + j];
          }
        }
        line += "," + Fmt(acc[p]);
        acc[p] += power * log.dt;
      }
      csv += line + '\n';
    }
    WriteTextFile(prefix + "_fig_energy.csv", csv);
  }
}

// ---------------------------------------------------------------------------
// Measurement replay.
// ---------------------------------------------------------------------------

std::vector<MeasurementPacket> ParseMeasurementCsv(const std::string& text) {
  std::vector<MeasurementPacket> out;
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  bool seenContent = false;
  while (std::getline(in, line)) {
    ++lineNo;
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const bool firstContent = !seenContent;
    seenContent = true;
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : t) {
      if (ch == ',') {
        fields.push_back(Trim(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    fields.push_back(Trim(cur));
    if (fields.size() != 5) {
      throw ScenarioError("measurement line " + std::to_string(lineNo) +
                          ": expected 5 comma-separated fields");
    }
    // Optional header row: first content line (comments and blanks may
    // precede it, matching the exported-CSV shape) whose leading field is
    // not numeric.
    if (firstContent && !fields[0].empty() &&
        !std::isdigit(static_cast<unsigned char>(fields[0][0])) &&
        fields[0][0] != '-' && fields[0][0] != '+' && fields[0][0] != '.') {
      continue;
    }
    MeasurementPacket pkt;
    pkt.t = ParseDouble("t", fields[0]);
    if (fields[1] == "velocity" || fields[1] == "0") {
      pkt.channel = SensorId::kVelocity;
    } else if (fields[1] == "orientation" || fields[1] == "1") {
      pkt.channel = SensorId::kOrientation;
    } else {
      throw ScenarioError("measurement line " + std::to_string(lineNo) +
                          ": unknown channel '" + fields[1] + "'");
    }
    for (int i = 0; i < 3; ++i) {
      pkt.z[i] = ParseDouble("z", fields[static_cast<std::size_t>(2 + i)]);
    }
    if (!pkt.z.allFinite() || !std::isfinite(pkt.t)) {
      throw ScenarioError("measurement line " + std::to_string(lineNo) +
                          ": non-finite entry");
    }
    if (!out.empty() && pkt.t < out.back().t - 1e-12) {
      throw ScenarioError("measurement timestamps must be non-decreasing");
    }
    out.push_back(pkt);
  }
  return out;
}

SimLog ReplayEstimate(const Scenario& s,
                      const std::vector<MeasurementPacket>& packets) {
  ValidateScenario(s);
  const RunSetup r = BuildSetup(s);

  EkfState est;
  est.x << s.q0, s.qd0;
  est.P = r.ekfP0;
  est.t = 0.0;

  SimLog log;
  log.dt = 0.0;  // packet-driven rows are not uniformly spaced
  log.scenarioEcho = SerializeScenario(s);
  log.columns.push_back("t");
  for (int i = 1; i <= 5; ++i)
    log.columns.push_back("qhat" + std::to_string(i));
  for (int i = 1; i <= 5; ++i)
    log.columns.push_back("qdhat" + std::to_string(i));
  log.columns.push_back("p_trace");

  for (const MeasurementPacket& pkt : packets) {
    const double gap = pkt.t - est.t;
    if (gap > 1e-12) {
      const int n = std::max(
          1, static_cast<int>(std::ceil(gap / s.dtCtrl - 1e-9)));
      const double h = gap / n;
      for (int i = 0; i < n; ++i) {
        est = EkfPredict(est, BodyWrench::Zero(), h, r.ekfQ, s.params);
      }
    }
    const SensorChannel& chan =
        pkt.channel == SensorId::kVelocity ? r.velChan : r.oriChan;
    est = EkfUpdate(est, pkt, chan, s.params);
    est.t = pkt.t;

    VecXd row(12);
    row[0] = pkt.t;
    row.segment<10>(1) = est.x;
    row[11] = est.P.trace();
    log.rows.push_back(row);
  }
  return log;
}

}  // namespace susp
