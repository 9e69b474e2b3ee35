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

#ifndef SUSP_ESTIMATION_HPP_
#define SUSP_ESTIMATION_HPP_

// Continuous-discrete extended Kalman filter over the 10-dimensional
// pendulum state (q, qd) with per-channel intermittent measurement gating.
//
// Prediction integrates both the state and the covariance Lyapunov flow
// jointly with RK4, re-linearizing the dynamics at every integrator stage.
// Corrections arrive as independent 3-row channels (world-frame platform
// velocity and ZYX Euler orientation); a channel that publishes nothing at a
// tick simply contributes no update. Covariance corrections use the Joseph
// form so positive semi-definiteness survives the gated multi-rate regime.

#include <vector>

#include "susp/dynamics.hpp"
#include "susp/types.hpp"

namespace susp {

// Identifies one of the two 3-dimensional sensor channels.
enum class SensorId { kVelocity, kOrientation };

// Static description of a sensor channel: publish rate, noise covariance,
// and where its rows live inside the stacked 6-dimensional measurement.
struct SensorChannel {
  SensorId id = SensorId::kVelocity;
  double rate = 100.0;           // Hz
  Mat3 R = 1e-4 * Mat3::Identity();
  int offset = 0;                // first row in the stacked measurement
};

// One sensor sample. Orientation angles are expected wrapped to (-pi, pi].
struct MeasurementPacket {
  double t = 0.0;
  SensorId channel = SensorId::kVelocity;
  Vec3 z = Vec3::Zero();
};

// Filter state: estimate, covariance, and the time both refer to.
struct EkfState {
  Vec10 x = Vec10::Zero();
  Mat10 P = Mat10::Zero();
  double t = 0.0;
};

// Default channel configurations (velocity 100 Hz with R = 1e-4 I at rows
// 0..2, orientation 50 Hz with R = 1e-5 I at rows 3..5).
SensorChannel DefaultChannel(SensorId id);

// Default continuous process noise: diag(1e-6 on angles, 1e-4 on rates).
Mat10 DefaultProcessNoise();

// Wraps an angle to (-pi, pi].
double WrapAngle(double a);

// Stacked measurement map h(x): world-frame platform velocity followed by
// the ZYX Euler angles of the platform frame. Throws NumericalError when the
// orientation extraction is degenerate (pitch within 1e-6 of +-pi/2).
VecXd MeasurementModel(const Vec10& x, const PendulumParams& params);

// One channel of the measurement map; the velocity channel stays usable at
// orientations where the Euler extraction is degenerate.
Vec3 ChannelModel(const Vec10& x, const PendulumParams& params, SensorId id);

// Measurement jacobian dh/dx by central finite differences (step 1e-6).
// Orientation rows difference through the angle wrap.
MatXd MeasurementJacobian(const Vec10& x, const PendulumParams& params);

// 3x10 jacobian of a single channel, same scheme as MeasurementJacobian.
MatXd ChannelJacobian(const Vec10& x, const PendulumParams& params,
                      SensorId id);

// Propagates estimate and covariance over dt under the applied body wrench:
// xdot = f(x, u), Pdot = F P + F' P + Q_proc with F = df/dx re-evaluated at
// each RK4 stage. The result covariance is re-symmetrized.
EkfState EkfPredict(const EkfState& state, const BodyWrench& u, double dt,
                    const Mat10& Qproc, const PendulumParams& params);

// Result of a generic linear(ized) measurement correction.
struct LinearUpdate {
  VecXd x;
  MatXd P;
  MatXd K;
};

// Joseph-form correction x+ = x + K y, P+ = (I-KH) P (I-KH)' + K R K' with
// K = P H' (H P H' + R)^-1. Throws NumericalError when the innovation
// covariance is not invertible.
LinearUpdate JosephUpdate(const VecXd& x, const MatXd& P, const VecXd& y,
                          const MatXd& H, const MatXd& R);

// Applies the correction for one arriving channel: only that channel's rows
// of h and H enter, so channels that publish nothing contribute no update.
// Orientation residuals are wrapped to (-pi, pi].
EkfState EkfUpdate(const EkfState& state, const MeasurementPacket& pkt,
                   const SensorChannel& channel, const PendulumParams& params);

}  // namespace susp

#endif  // SUSP_ESTIMATION_HPP_
