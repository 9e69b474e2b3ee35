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

#ifndef SUSP_HARNESS_HPP_
#define SUSP_HARNESS_HPP_

// Scenario execution and experiment plumbing: reproducible closed-loop
// simulation of the suspended platform under LQR or task-space PD+ control,
// with true-state or EKF feedback, multi-rate sensor noise, thrust
// allocation, metrics, platform comparison, and CSV/summary export.
//
// Determinism contract: every random draw comes from a counter-based
// generator keyed by (seed, channel, tick, index), so identical scenarios
// and seeds produce bit-identical logs regardless of execution order or
// batch parallelism.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "susp/allocation.hpp"
#include "susp/control.hpp"
#include "susp/estimation.hpp"
#include "susp/types.hpp"

namespace susp {

// ---------------------------------------------------------------------------
// Counter-based random draws.
// ---------------------------------------------------------------------------

// Independent noise streams; the channel id is part of the counter key.
enum class NoiseChannel : std::uint32_t {
  kProcess = 0,
  kVelocitySensor = 1,
  kOrientationSensor = 2,
  kInitialEstimate = 3,
};

// Uniform draw in [0, 1) fully determined by (seed, channel, tick, index).
double CounterUniform(std::uint64_t seed, NoiseChannel channel,
                      std::uint64_t tick, std::uint32_t index);

// Standard normal draw fully determined by (seed, channel, tick, index).
double CounterGaussian(std::uint64_t seed, NoiseChannel channel,
                       std::uint64_t tick, std::uint32_t index);

// ---------------------------------------------------------------------------
// Scenario description.
// ---------------------------------------------------------------------------

enum class ControllerKind { kNone, kLqr, kPdPlusTask };
enum class EstimatorKind { kTrueState, kEkf };
enum class TaskChoice { kAuto, kOmni5, kUnder3 };
enum class GravityCompMode { kAuto, kOn, kOff };

std::string ToString(ControllerKind k);
std::string ToString(EstimatorKind k);
std::string ToString(TaskChoice k);
std::string ToString(GravityCompMode k);

// Per-channel sensor configuration (publish rate and noise std deviation).
struct SensorSettings {
  double rate = 100.0;  // Hz; 0 disables the channel
  double std = 1e-2;    // per-axis standard deviation
};

// Complete description of one reproducible experiment. Defaults reproduce
// the joint-space oscillation-damping study on the omnidirectional platform
// (initial joint angles 0.15, 0.2, 0.2, 0, 0 rad, 25 s horizon, 500 Hz
// control with 2x oversampled integration).
struct Scenario {
  PlatformKind platform = PlatformKind::kOmnidirectional;
  ControllerKind controller = ControllerKind::kLqr;
  EstimatorKind estimator = EstimatorKind::kTrueState;

  Vec5 q0 = (Vec5() << 0.15, 0.2, 0.2, 0.0, 0.0).finished();
  Vec5 qd0 = Vec5::Zero();
  double duration = 25.0;
  double dtSim = 1e-3;
  double dtCtrl = 2e-3;
  std::uint64_t seed = 1;

  PendulumParams params{};
  double fMax = 9.0;

  // Joint-space damper weights (state penalty diagonal and input scale).
  VecXd lqrQDiag =
      (VecXd(10) << 200, 200, 20, 0.01, 0.01, 50, 50, 1, 0.01, 0.01)
          .finished();
  double lqrRScale = 1.0;

  // Task-space PD+ settings. Gains may carry 3 entries (planar position +
  // yaw) or 5 (position + roll/pitch/yaw, full task only); 3-entry gains
  // applied to the full task reuse the attitude gain for roll and pitch.
  TaskChoice task = TaskChoice::kAuto;
  VecXd pdKp = (VecXd(3) << 400, 400, 100).finished();
  VecXd pdKd = (VecXd(3) << 40, 40, 20).finished();
  VecXd pdTarget = VecXd::Zero(3);
  GravityCompMode gravityComp = GravityCompMode::kAuto;

  SensorSettings velocitySensor{100.0, 1e-2};
  SensorSettings orientationSensor{50.0, 3.1622776601683794e-3};

  // Filter tuning: process noise and initial covariance diagonals.
  double ekfQAngles = 1e-6;
  double ekfQRates = 1e-4;
  double ekfP0Angles = 1e-4;
  double ekfP0Rates = 1e-4;

  // Truth-side process noise power spectral densities (0 = deterministic
  // plant). Set these equal to the filter tuning for consistency studies.
  double processNoiseAngles = 0.0;
  double processNoiseRates = 0.0;

  // Apply the commanded wrench exactly, bypassing motor limits; used for
  // controller-identity studies where saturation would mask the law.
  bool idealAllocation = false;
};

// Parses the line-oriented "key = value" scenario format ('#' comments and
// blank lines ignored; unknown keys rejected). Throws ScenarioError.
Scenario ParseScenario(const std::string& text);

// Serializes every field (defaults materialized) so any run's header is a
// complete, re-parseable scenario. ParseScenario(SerializeScenario(s))
// reproduces s exactly.
std::string SerializeScenario(const Scenario& s);

// File convenience wrappers. Throw IoError on unreadable/unwritable paths.
Scenario LoadScenarioFile(const std::string& path);
void WriteTextFile(const std::string& path, const std::string& content);

// Validates cross-field invariants (positive duration, dt_ctrl an integer
// multiple of dt_sim, known enums, gain sizes). Throws ScenarioError.
void ValidateScenario(const Scenario& s);

// ---------------------------------------------------------------------------
// Execution results.
// ---------------------------------------------------------------------------

// Uniformly sampled run log (one row per control tick plus a final row).
struct SimLog {
  std::vector<std::string> columns;
  std::vector<VecXd> rows;
  std::string scenarioEcho;  // serialized resolved scenario
  double dt = 0.0;           // row spacing (s)
};

// Scalar summaries of one run. Settling entries are -1 when the joint never
// stays inside its band.
struct Metrics {
  Vec5 settlingTime = -Vec5::Ones();
  Vec5 peak = Vec5::Zero();
  double energy = 0.0;              // PWM-weighted thrust integral
  double saturationFraction = 0.0;  // fraction of saturated control ticks
  double finalTaskError = 0.0;
  // Max closed-loop identity residual; meaningful for PD+ with true-state
  // feedback, -1 otherwise.
  double pdResidualMax = -1.0;
  // Fraction of NEES samples inside the 95% chi-square band (10 DoF);
  // -1 when no filter ran.
  double neesInBandFraction = -1.0;
};

struct RunResult {
  SimLog log;
  Metrics metrics;
  std::vector<double> nees;  // per-tick posterior NEES (EKF runs only)
};

// First time after which |signal| stays within band*max(|signal[0]|, floor)
// through the end of the series; 0 if always inside, -1 if never settles.
double SettlingTime(const std::vector<double>& t,
                    const std::vector<double>& v, double band,
                    double floor = 1e-3);

// 95% central chi-square band for 10 degrees of freedom.
inline constexpr double kChi2Lo10 = 3.2469727802;
inline constexpr double kChi2Hi10 = 20.4831774486;

// Runs one scenario to completion. Deterministic given the scenario (seed
// included). Numerical failures abort with the failing timestamp and state
// in the error message.
RunResult RunScenario(const Scenario& s);

// ---------------------------------------------------------------------------
// Platform comparison.
// ---------------------------------------------------------------------------

struct ComparisonEntry {
  PlatformKind platform = PlatformKind::kOmnidirectional;
  bool ok = false;
  std::string error;  // set when the run failed
  RunResult result;
};

struct PlatformComparison {
  std::array<ComparisonEntry, 3> entries;  // od, planar thrust, minimal
  // Energy change relative to the omnidirectional run, percent (negative =
  // cheaper): [planar thrust, minimal actuated]. NaN when unavailable.
  std::array<double, 2> energyDeltaPct;
};

// Runs the identical scenario on all three platforms (task and input maps
// adapt per platform; gains and seed are shared) and tabulates the metrics.
PlatformComparison ComparePlatforms(const Scenario& base);

// Human-readable comparison table.
std::string FormatComparison(const PlatformComparison& c);

// ---------------------------------------------------------------------------
// Export.
// ---------------------------------------------------------------------------

// Writes <prefix>.csv (scenario echo as '#' comments, header row, %.17g
// values) and <prefix>_summary.txt (re-parseable scenario followed by
// commented metrics). Throws IoError on failure.
void ExportLog(const RunResult& r, const Scenario& s,
               const std::string& prefix);

// Writes the comparison table plus per-figure CSVs:
//   <prefix>_fig_joints.csv   time + 5 joints x 3 platforms (16 columns)
//   <prefix>_fig_energy.csv   time + cumulative energy per platform
//   <prefix>_fig_task.csv     time + task coordinates per platform
//   <prefix>_fig_wrench.csv   time + commanded wrench per platform
void ExportComparison(const PlatformComparison& c, const Scenario& s,
                      const std::string& prefix);

// Renders metrics as '#'-commented key = value lines.
std::string FormatMetrics(const Metrics& m);

// Renders a log as CSV: scenario echo as '#' comments, a header row, then
// one full-precision line per sample.
std::string RenderCsv(const SimLog& log);

// ---------------------------------------------------------------------------
// Measurement replay.
// ---------------------------------------------------------------------------

// Parses a measurement CSV with columns (t, channel, z1, z2, z3); channel is
// "velocity" or "orientation". Header row optional. Timestamps must be
// non-decreasing. Throws ScenarioError on malformed content.
std::vector<MeasurementPacket> ParseMeasurementCsv(const std::string& text);

// Filter-only replay: starting from the scenario's initial state and
// covariance, predicts under zero wrench between packets (substeps of
// dt_ctrl) and applies each packet's correction. Returns one log row per
// packet: (t, x_hat, trace P).
SimLog ReplayEstimate(const Scenario& s,
                      const std::vector<MeasurementPacket>& packets);

}  // namespace susp

#endif  // SUSP_HARNESS_HPP_
