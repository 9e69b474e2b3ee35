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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "susp/types.hpp"

// Kinematics of the suspended platform.
//
// World frame: z up, gravity along -z, cable anchor at the origin. The
// link-1 frame is R1 = Rx(q0) Ry(q1) Rz(q2) and the platform (link-2) frame
// is R2 = R1 Rx(q3) Ry(q4), all rotations active and right-handed. Each link
// hangs along the local -z axis, so at q = 0 the platform COM sits at
// (0, 0, -(L1+L2)).
//
// Because every factor is a single-axis rotation, configuration partials of
// any sub-product are exact: d(Rx(a))/da = [ex]^ Rx(a), and inserting the
// generator at position k differentiates the chain with respect to q_k.

namespace susp {

namespace detail {

// Returns [e_axis]^ * X without forming the generator matrix.
template <typename Scalar>
Mat3T<Scalar> CrossMul(int axis, const Mat3T<Scalar>& X) {
  Mat3T<Scalar> Y;
  switch (axis) {
    case 0:
      Y.row(0).setZero();
      Y.row(1) = -X.row(2);
      Y.row(2) = X.row(1);
      break;
    case 1:
      Y.row(0) = X.row(2);
      Y.row(1).setZero();
      Y.row(2) = -X.row(0);
      break;
    default:
      Y.row(0) = -X.row(1);
      Y.row(1) = X.row(0);
      Y.row(2).setZero();
      break;
  }
  return Y;
}

template <typename Scalar>
Mat3T<Scalar> AxisRotation(int axis, Scalar a) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(a);
  const Scalar s = sin(a);
  Mat3T<Scalar> R;
  switch (axis) {
    case 0:
      R << Scalar(1), Scalar(0), Scalar(0),  //
          Scalar(0), c, -s,                  //
          Scalar(0), s, c;
      break;
    case 1:
      R << c, Scalar(0), s,                 //
          Scalar(0), Scalar(1), Scalar(0),  //
          -s, Scalar(0), c;
      break;
    default:
      R << c, -s, Scalar(0),       //
          s, c, Scalar(0),         //
          Scalar(0), Scalar(0), Scalar(1);
      break;
  }
  return R;
}

// Product chain Rx(q0) Ry(q1) Rz(q2) Rx(q3) Ry(q4) with all interval
// products cached, plus exact first and second partials of any prefix.
template <typename Scalar>
struct RotationChain {
  static constexpr std::array<int, 5> kAxes{0, 1, 2, 0, 1};

  explicit RotationChain(const Vec5T<Scalar>& q) {
    for (int i = 0; i < 5; ++i) {
      table_[i][i] = AxisRotation(kAxes[i], q[i]);
    }
    for (int i = 0; i < 5; ++i) {
      for (int j = i + 1; j < 5; ++j) {
        table_[i][j] = table_[i][j - 1] * table_[j][j];
      }
    }
  }

  // Product of factors i..j inclusive; identity when i > j.
  const Mat3T<Scalar>& Prod(int i, int j) const {
    if (i > j) {
      static const Mat3T<Scalar> kIdentity = Mat3T<Scalar>::Identity();
      return kIdentity;
    }
    return table_[i][j];
  }

  // d(Prod(0, last)) / dq_k, for k <= last.
  Mat3T<Scalar> D1(int k, int last) const {
    return Prod(0, k - 1) * CrossMul(kAxes[k], Prod(k, last));
  }

  // d^2(Prod(0, last)) / dq_k dq_l, for k <= l <= last.
  Mat3T<Scalar> D2(int k, int l, int last) const {
    if (k == l) {
      return Prod(0, k - 1) *
             CrossMul(kAxes[k], CrossMul(kAxes[k], Prod(k, last)));
    }
    const Mat3T<Scalar> tail =
        Prod(k, l - 1) * CrossMul(kAxes[l], Prod(l, last));
    return Prod(0, k - 1) * CrossMul(kAxes[k], tail);
  }

 private:
  Mat3T<Scalar> table_[5][5];
};

template <typename Scalar>
Vec3T<Scalar> VeeSkew(const Mat3T<Scalar>& S) {
  return Vec3T<Scalar>(Scalar(0.5) * (S(2, 1) - S(1, 2)),
                       Scalar(0.5) * (S(0, 2) - S(2, 0)),
                       Scalar(0.5) * (S(1, 0) - S(0, 1)));
}

}  // namespace detail

// First-order kinematics: frames, mass positions and velocity jacobians.
template <typename Scalar>
struct KinematicsT {
  Mat3T<Scalar> R1;       // world rotation of the link-1 frame
  Mat3T<Scalar> R2;       // world rotation of the platform frame
  Vec3T<Scalar> p1;       // elbow mass position, world frame
  Vec3T<Scalar> p2;       // platform COM position, world frame
  Mat35T<Scalar> Jv1;     // world linear-velocity jacobian of p1
  Mat35T<Scalar> Jv2;     // world linear-velocity jacobian of p2
  Mat35T<Scalar> Jw;      // body angular-velocity jacobian of the platform
};

// Kinematics plus the configuration partials d(J)/dq_k of each jacobian,
// needed for Coriolis and derivative terms.
template <typename Scalar>
struct KinematicsPartialsT {
  KinematicsT<Scalar> kin;
  std::array<Mat35T<Scalar>, 5> dJv1;
  std::array<Mat35T<Scalar>, 5> dJv2;
  std::array<Mat35T<Scalar>, 5> dJw;
};

using Kinematics = KinematicsT<double>;
using KinematicsPartials = KinematicsPartialsT<double>;

template <typename Derived>
KinematicsT<typename Derived::Scalar> EvalKinematics(
    const Eigen::MatrixBase<Derived>& qIn,
    const PendulumParamsT<typename Derived::Scalar>& P) {
  using Scalar = typename Derived::Scalar;
  const Vec5T<Scalar> q = qIn;
  const detail::RotationChain<Scalar> ch(q);
  KinematicsT<Scalar> k;
  k.R1 = ch.Prod(0, 2);
  k.R2 = ch.Prod(0, 4);
  const Vec3T<Scalar> d1(Scalar(0), Scalar(0), -P.L1);
  const Vec3T<Scalar> d2(Scalar(0), Scalar(0), -P.L2);
  k.p1 = k.R1 * d1;
  k.p2 = k.p1 + k.R2 * d2;
  for (int i = 0; i < 5; ++i) {
    const Mat3T<Scalar> dR2 = ch.D1(i, 4);
    k.Jv1.col(i) = i < 3 ? Vec3T<Scalar>(ch.D1(i, 2) * d1)
                         : Vec3T<Scalar>(Vec3T<Scalar>::Zero());
    k.Jv2.col(i) = k.Jv1.col(i) + dR2 * d2;
    k.Jw.col(i) = detail::VeeSkew<Scalar>(k.R2.transpose() * dR2);
  }
  return k;
}

template <typename Derived>
KinematicsPartialsT<typename Derived::Scalar> EvalKinematicsPartials(
    const Eigen::MatrixBase<Derived>& qIn,
    const PendulumParamsT<typename Derived::Scalar>& P) {
  using Scalar = typename Derived::Scalar;
  const Vec5T<Scalar> q = qIn;
  const detail::RotationChain<Scalar> ch(q);
  KinematicsPartialsT<Scalar> out;
  KinematicsT<Scalar>& k = out.kin;
  k.R1 = ch.Prod(0, 2);
  k.R2 = ch.Prod(0, 4);
  const Vec3T<Scalar> d1(Scalar(0), Scalar(0), -P.L1);
  const Vec3T<Scalar> d2(Scalar(0), Scalar(0), -P.L2);
  k.p1 = k.R1 * d1;
  k.p2 = k.p1 + k.R2 * d2;

  std::array<Mat3T<Scalar>, 5> dR2;
  for (int i = 0; i < 5; ++i) {
    dR2[i] = ch.D1(i, 4);
    k.Jv1.col(i) = i < 3 ? Vec3T<Scalar>(ch.D1(i, 2) * d1)
                         : Vec3T<Scalar>(Vec3T<Scalar>::Zero());
    k.Jv2.col(i) = k.Jv1.col(i) + dR2[i] * d2;
    k.Jw.col(i) = detail::VeeSkew<Scalar>(k.R2.transpose() * dR2[i]);
  }

  Mat3T<Scalar> d2R2[5][5];
  for (int i = 0; i < 5; ++i) {
    for (int j = i; j < 5; ++j) {
      d2R2[i][j] = ch.D2(i, j, 4);
      d2R2[j][i] = d2R2[i][j];
    }
  }
  for (int kdx = 0; kdx < 5; ++kdx) {
    for (int i = 0; i < 5; ++i) {
      const Vec3T<Scalar> dJv1col =
          (i < 3 && kdx < 3)
              ? Vec3T<Scalar>(ch.D2(std::min(i, kdx), std::max(i, kdx), 2) * d1)
              : Vec3T<Scalar>(Vec3T<Scalar>::Zero());
      out.dJv1[kdx].col(i) = dJv1col;
      out.dJv2[kdx].col(i) = dJv1col + d2R2[i][kdx] * d2;
      out.dJw[kdx].col(i) = detail::VeeSkew<Scalar>(
          dR2[kdx].transpose() * dR2[i] + k.R2.transpose() * d2R2[i][kdx]);
    }
  }
  return out;
}

// ZYX (roll, pitch, yaw) angles of R = Rz(yaw) Ry(pitch) Rx(roll).
template <typename Scalar>
Vec3T<Scalar> EulerZyx(const Mat3T<Scalar>& R) {
  using std::asin;
  using std::atan2;
  const Scalar sp = std::clamp(-R(2, 0), Scalar(-1), Scalar(1));
  return Vec3T<Scalar>(atan2(R(2, 1), R(2, 2)), asin(sp),
                       atan2(R(1, 0), R(0, 0)));
}

// W such that omega_body = W * d/dt(roll, pitch, yaw) for ZYX angles.
template <typename Scalar>
Mat3T<Scalar> EulerRateMatrix(const Vec3T<Scalar>& euler) {
  using std::cos;
  using std::sin;
  const Scalar cr = cos(euler[0]);
  const Scalar sr = sin(euler[0]);
  const Scalar cp = cos(euler[1]);
  const Scalar sp = sin(euler[1]);
  Mat3T<Scalar> W;
  W << Scalar(1), Scalar(0), -sp,  //
      Scalar(0), cr, cp * sr,      //
      Scalar(0), -sr, cp * cr;
  return W;
}

// Pitch angles within this margin of +/- pi/2 make the ZYX parametrization
// unusable (the yaw/roll axes coincide).
inline constexpr double kGimbalLockMargin = 1e-6;

template <typename Scalar>
bool GimbalDegenerate(const Mat3T<Scalar>& R) {
  using std::abs;
  const Scalar sp = std::clamp(-R(2, 0), Scalar(-1), Scalar(1));
  using std::asin;
  const Scalar pitch = asin(sp);
  return abs(abs(pitch) - Scalar(M_PI / 2)) < Scalar(kGimbalLockMargin);
}

// World pose and velocity of the platform body.
template <typename Scalar>
BasePoseT<Scalar> ForwardKinematics(const JointStateT<Scalar>& s,
                                    const PendulumParamsT<Scalar>& P) {
  const KinematicsT<Scalar> k = EvalKinematics(s.q, P);
  BasePoseT<Scalar> pose;
  pose.p = k.p2;
  pose.R = k.R2;
  pose.v = k.Jv2 * s.qd;
  pose.omega = k.Jw * s.qd;
  pose.euler = EulerZyx(k.R2);
  return pose;
}

// Maps joint rates to the platform body twist (body-frame linear velocity
// stacked on body angular velocity).
template <typename Derived>
Mat65T<typename Derived::Scalar> BodyJacobian(
    const Eigen::MatrixBase<Derived>& q,
    const PendulumParamsT<typename Derived::Scalar>& P) {
  using Scalar = typename Derived::Scalar;
  const KinematicsT<Scalar> k = EvalKinematics(q, P);
  Mat65T<Scalar> J;
  J.template topRows<3>() = k.R2.transpose() * k.Jv2;
  J.template bottomRows<3>() = k.Jw;
  return J;
}

}  // namespace susp
