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

#include "susp/estimation.hpp"

#include <cmath>
#include <stdexcept>

#include "susp/kinematics.hpp"

namespace susp {

namespace {

constexpr int kChannelDim = 3;

Mat10 Symmetrized(const Mat10& M) { return 0.5 * (M + M.transpose()); }

}  // namespace

SensorChannel DefaultChannel(SensorId id) {
  SensorChannel c;
  c.id = id;
  if (id == SensorId::kVelocity) {
    c.rate = 100.0;
    c.R = 1e-4 * Mat3::Identity();
    c.offset = 0;
  } else {
    c.rate = 50.0;
    c.R = 1e-5 * Mat3::Identity();
    c.offset = kChannelDim;
  }
  return c;
}

Mat10 DefaultProcessNoise() {
  Vec10 d;
  d << 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4;
  return d.asDiagonal();
}

double WrapAngle(double a) {
  a = std::remainder(a, 2 * M_PI);
  if (a <= -M_PI) a += 2 * M_PI;
  return a;
}

Vec3 ChannelModel(const Vec10& x, const PendulumParams& params, SensorId id) {
  if (!x.allFinite()) throw NumericalError("non-finite state in measurement");
  const Vec5 q = x.head<5>();
  const Kinematics kin = EvalKinematics(q, params);
  if (id == SensorId::kVelocity) {
    return kin.Jv2 * x.tail<5>();
  }
  if (GimbalDegenerate(kin.R2)) {
    throw NumericalError(
        "orientation measurement degenerate near gimbal lock");
  }
  return EulerZyx(kin.R2);
}

VecXd MeasurementModel(const Vec10& x, const PendulumParams& params) {
  VecXd h(2 * kChannelDim);
  h.head<3>() = ChannelModel(x, params, SensorId::kVelocity);
  h.tail<3>() = ChannelModel(x, params, SensorId::kOrientation);
  return h;
}

MatXd ChannelJacobian(const Vec10& x, const PendulumParams& params,
                      SensorId id) {
  constexpr double kStep = 1e-6;
  MatXd H(kChannelDim, 10);
  for (int k = 0; k < 10; ++k) {
    Vec10 xp = x;
    Vec10 xm = x;
    xp[k] += kStep;
    xm[k] -= kStep;
    const Vec3 hp = ChannelModel(xp, params, id);
    const Vec3 hm = ChannelModel(xm, params, id);
    for (int r = 0; r < kChannelDim; ++r) {
      double d = hp[r] - hm[r];
      // Orientation rows live on the circle: difference through the wrap so
      // a sample next to the +-pi seam still yields the local derivative.
      if (id == SensorId::kOrientation) d = WrapAngle(d);
      H(r, k) = d / (2 * kStep);
    }
  }
  return H;
}

MatXd MeasurementJacobian(const Vec10& x, const PendulumParams& params) {
  MatXd H(2 * kChannelDim, 10);
  H.topRows<3>() = ChannelJacobian(x, params, SensorId::kVelocity);
  H.bottomRows<3>() = ChannelJacobian(x, params, SensorId::kOrientation);
  return H;
}

EkfState EkfPredict(const EkfState& state, const BodyWrench& u, double dt,
                    const Mat10& Qproc, const PendulumParams& params) {
  if (!(dt > 0)) throw std::invalid_argument("prediction step must be > 0");
  if ((Qproc - Qproc.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("process noise must be symmetric");
  }

  const Vec6 u6 = u.ToVector();
  struct Stage {
    Vec10 xdot;
    Mat10 Pdot;
  };
  auto flow = [&](const Vec10& x, const Mat10& P) -> Stage {
    Stage s;
    s.xdot = StateDerivative(x, u, params);
    const Mat10 F = Linearize(x, u6, params).A;
    s.Pdot = F * P + P * F.transpose() + Qproc;
    return s;
  };

  const Stage k1 = flow(state.x, state.P);
  const Stage k2 = flow(Vec10(state.x + 0.5 * dt * k1.xdot),
                        Mat10(state.P + 0.5 * dt * k1.Pdot));
  const Stage k3 = flow(Vec10(state.x + 0.5 * dt * k2.xdot),
                        Mat10(state.P + 0.5 * dt * k2.Pdot));
  const Stage k4 = flow(Vec10(state.x + dt * k3.xdot),
                        Mat10(state.P + dt * k3.Pdot));

  EkfState out;
  out.x = state.x +
          (dt / 6) * (k1.xdot + 2 * k2.xdot + 2 * k3.xdot + k4.xdot);
  out.P = Symmetrized(
      state.P + (dt / 6) * (k1.Pdot + 2 * k2.Pdot + 2 * k3.Pdot + k4.Pdot));
  out.t = state.t + dt;
  return out;
}

LinearUpdate JosephUpdate(const VecXd& x, const MatXd& P, const VecXd& y,
                          const MatXd& H, const MatXd& R) {
  const Eigen::Index n = x.size();
  const Eigen::Index m = y.size();
  if (P.rows() != n || P.cols() != n || H.rows() != m || H.cols() != n ||
      R.rows() != m || R.cols() != m) {
    throw std::invalid_argument("inconsistent measurement-update dimensions");
  }
  const MatXd S = H * P * H.transpose() + R;
  const Eigen::LLT<MatXd> llt(S);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
    throw NumericalError("innovation covariance not invertible");
  }
  LinearUpdate out;
  // K = P H' S^-1, computed through the factorization of S.
  out.K = llt.solve(H * P).transpose();
  out.x = x + out.K * y;
  const MatXd IKH = MatXd::Identity(n, n) - out.K * H;
  out.P = IKH * P * IKH.transpose() + out.K * R * out.K.transpose();
  out.P = 0.5 * (out.P + out.P.transpose());
  return out;
}

EkfState EkfUpdate(const EkfState& state, const MeasurementPacket& pkt,
                   const SensorChannel& channel,
                   const PendulumParams& params) {
  if (!pkt.z.allFinite()) throw NumericalError("non-finite measurement");
  if (pkt.channel != channel.id) {
    throw std::invalid_argument("packet routed to the wrong channel");
  }
  const Vec3 h = ChannelModel(state.x, params, channel.id);
  Vec3 y = pkt.z - h;
  if (channel.id == SensorId::kOrientation) {
    for (int r = 0; r < kChannelDim; ++r) y[r] = WrapAngle(y[r]);
  }
  const MatXd H = ChannelJacobian(state.x, params, channel.id);
  const LinearUpdate up = JosephUpdate(state.x, state.P, y, H, channel.R);
  EkfState out;
  out.x = up.x;
  out.P = up.P;
  out.t = state.t;
  return out;
}

}  // namespace susp
