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

#include <array>
#include <cmath>

#include "susp/kinematics.hpp"
#include "susp/types.hpp"

// Joint-space dynamics M(q) qdd + C(q, qd) qd + g(q) = tau, with
// tau = J(q)^T u for a wrench u applied at the platform in its body frame.
//
// The mass matrix is assembled from the velocity jacobians,
//   M = m1 Jv1^T Jv1 + m2 Jv2^T Jv2 + Jw^T diag(I_body) Jw,
// and its configuration partials follow from the exact jacobian partials, so
// the Coriolis matrix built from Christoffel symbols satisfies the
// skew-symmetry of (Mdot - 2C) to machine precision.

namespace susp {

template <typename Scalar>
struct MassPartialsT {
  Mat5T<Scalar> M;
  std::array<Mat5T<Scalar>, 5> dM;  // dM/dq_k
};

using MassPartials = MassPartialsT<double>;

namespace detail {

template <typename Scalar>
Mat5T<Scalar> AssembleMass(const KinematicsT<Scalar>& k,
                           const PendulumParamsT<Scalar>& P) {
  Mat5T<Scalar> M = P.m1 * (k.Jv1.transpose() * k.Jv1) +
                    P.m2 * (k.Jv2.transpose() * k.Jv2) +
                    k.Jw.transpose() * P.inertia.asDiagonal() * k.Jw;
  return Scalar(0.5) * (M + M.transpose());
}

}  // namespace detail

template <typename Derived>
Mat5T<typename Derived::Scalar> MassMatrix(
    const Eigen::MatrixBase<Derived>& q,
    const PendulumParamsT<typename Derived::Scalar>& P) {
  return detail::AssembleMass(EvalKinematics(q, P), P);
}

template <typename Derived>
MassPartialsT<typename Derived::Scalar> MassMatrixPartials(
    const Eigen::MatrixBase<Derived>& q,
    const PendulumParamsT<typename Derived::Scalar>& P) {
  using Scalar = typename Derived::Scalar;
  const KinematicsPartialsT<Scalar> kp = EvalKinematicsPartials(q, P);
  MassPartialsT<Scalar> out;
  out.M = detail::AssembleMass(kp.kin, P);
  for (int kdx = 0; kdx < 5; ++kdx) {
    const Mat5T<Scalar> T =
        P.m1 * (kp.kin.Jv1.transpose() * kp.dJv1[kdx]) +
        P.m2 * (kp.kin.Jv2.transpose() * kp.dJv2[kdx]) +
        kp.kin.Jw.transpose() * P.inertia.asDiagonal() * kp.dJw[kdx];
    out.dM[kdx] = T + T.transpose();
  }
  return out;
}

// Christoffel-symbol Coriolis matrix: C_ij = sum_k c_ijk qd_k with
// c_ijk = (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) / 2.
template <typename Scalar>
Mat5T<Scalar> CoriolisFromPartials(const MassPartialsT<Scalar>& mp,
                                   const Vec5T<Scalar>& qd) {
  Mat5T<Scalar> C;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      Scalar cij(0);
      for (int k = 0; k < 5; ++k) {
        cij += (mp.dM[k](i, j) + mp.dM[j](i, k) - mp.dM[i](j, k)) * qd[k];
      }
      C(i, j) = Scalar(0.5) * cij;
    }
  }
  return C;
}

template <typename DerivedQ, typename DerivedV>
Mat5T<typename DerivedQ::Scalar> CoriolisMatrix(
    const Eigen::MatrixBase<DerivedQ>& q,
    const Eigen::MatrixBase<DerivedV>& qd,
    const PendulumParamsT<typename DerivedQ::Scalar>& P) {
  using Scalar = typename DerivedQ::Scalar;
  const Vec5T<Scalar> qdv = qd;
  return CoriolisFromPartials(MassMatrixPartials(q, P), qdv);
}

template <typename Scalar>
Vec5T<Scalar> GravityFromKinematics(const KinematicsT<Scalar>& k,
                                    const PendulumParamsT<Scalar>& P) {
  return P.gravity *
         (P.m1 * k.Jv1.row(2) + P.m2 * k.Jv2.row(2)).transpose();
}

template <typename Derived>
Vec5T<typename Derived::Scalar> GravityVector(
    const Eigen::MatrixBase<Derived>& q,
    const PendulumParamsT<typename Derived::Scalar>& P) {
  return GravityFromKinematics(EvalKinematics(q, P), P);
}

// Potential energy with datum V(q = 0) = 0.
template <typename Derived>
typename Derived::Scalar PotentialEnergy(
    const Eigen::MatrixBase<Derived>& q,
    const PendulumParamsT<typename Derived::Scalar>& P) {
  using Scalar = typename Derived::Scalar;
  const KinematicsT<Scalar> k = EvalKinematics(q, P);
  return P.gravity * (P.m1 * (k.p1.z() + P.L1) +
                      P.m2 * (k.p2.z() + P.L1 + P.L2));
}

template <typename Derived>
typename Derived::Scalar TotalEnergy(
    const Eigen::MatrixBase<Derived>& x,
    const PendulumParamsT<typename Derived::Scalar>& P) {
  using Scalar = typename Derived::Scalar;
  const Vec5T<Scalar> q = x.template head<5>();
  const Vec5T<Scalar> qd = x.template tail<5>();
  return Scalar(0.5) * qd.dot(MassMatrix(q, P) * qd) + PotentialEnergy(q, P);
}

// Everything the control modules need at one configuration.
template <typename Scalar>
struct DynamicsTermsT {
  Mat5T<Scalar> M;
  Mat5T<Scalar> C;
  Vec5T<Scalar> g;
  KinematicsT<Scalar> kin;
  MassPartialsT<Scalar> massPartials;
};

using DynamicsTerms = DynamicsTermsT<double>;

template <typename DerivedQ, typename DerivedV>
DynamicsTermsT<typename DerivedQ::Scalar> EvalDynamicsTerms(
    const Eigen::MatrixBase<DerivedQ>& q,
    const Eigen::MatrixBase<DerivedV>& qdIn,
    const PendulumParamsT<typename DerivedQ::Scalar>& P) {
  using Scalar = typename DerivedQ::Scalar;
  const Vec5T<Scalar> qd = qdIn;
  const KinematicsPartialsT<Scalar> kp = EvalKinematicsPartials(q, P);
  DynamicsTermsT<Scalar> out;
  out.kin = kp.kin;
  out.massPartials.M = detail::AssembleMass(kp.kin, P);
  for (int kdx = 0; kdx < 5; ++kdx) {
    const Mat5T<Scalar> T =
        P.m1 * (kp.kin.Jv1.transpose() * kp.dJv1[kdx]) +
        P.m2 * (kp.kin.Jv2.transpose() * kp.dJv2[kdx]) +
        kp.kin.Jw.transpose() * P.inertia.asDiagonal() * kp.dJw[kdx];
    out.massPartials.dM[kdx] = T + T.transpose();
  }
  out.M = out.massPartials.M;
  out.C = CoriolisFromPartials(out.massPartials, qd);
  out.g = GravityFromKinematics(kp.kin, P);
  return out;
}

// Joint torques produced by a platform body wrench: tau = J^T u.
template <typename Scalar>
Vec5T<Scalar> JointTorques(const KinematicsT<Scalar>& k,
                           const BodyWrenchT<Scalar>& u) {
  return k.Jv2.transpose() * (k.R2 * u.f) + k.Jw.transpose() * u.m;
}

namespace detail {

template <typename Scalar>
Vec5T<Scalar> SolveAccel(const DynamicsTermsT<Scalar>& d,
                         const Vec5T<Scalar>& qd,
                         const BodyWrenchT<Scalar>& u) {
  const Eigen::LLT<Mat5T<Scalar>> llt(d.M);
  if (llt.info() != Eigen::Success ||
      llt.rcond() < Scalar(1e-12)) {
    throw NumericalError("mass matrix numerically singular");
  }
  return llt.solve(JointTorques(d.kin, u) - d.C * qd - d.g);
}

}  // namespace detail

// State-space dynamics xdot = f(x, u) for x = (q, qd).
template <typename Derived>
Vec10T<typename Derived::Scalar> StateDerivative(
    const Eigen::MatrixBase<Derived>& xIn,
    const BodyWrenchT<typename Derived::Scalar>& u,
    const PendulumParamsT<typename Derived::Scalar>& P) {
  using Scalar = typename Derived::Scalar;
  const Vec10T<Scalar> x = xIn;
  if (!x.allFinite() || !u.f.allFinite() || !u.m.allFinite()) {
    throw NumericalError("non-finite state or wrench");
  }
  const Vec5T<Scalar> q = x.template head<5>();
  const Vec5T<Scalar> qd = x.template tail<5>();
  const DynamicsTermsT<Scalar> d = EvalDynamicsTerms(q, qd, P);
  Vec10T<Scalar> xdot;
  xdot.template head<5>() = qd;
  xdot.template tail<5>() = detail::SolveAccel(d, qd, u);
  return xdot;
}

// One classical Runge-Kutta step with the wrench held constant.
template <typename Derived>
Vec10T<typename Derived::Scalar> StepRk4(
    const Eigen::MatrixBase<Derived>& xIn,
    const BodyWrenchT<typename Derived::Scalar>& u,
    typename Derived::Scalar dt,
    const PendulumParamsT<typename Derived::Scalar>& P) {
  using Scalar = typename Derived::Scalar;
  const Vec10T<Scalar> x = xIn;
  const Vec10T<Scalar> k1 = StateDerivative(x, u, P);
  const Vec10T<Scalar> x2 = x + Scalar(0.5) * dt * k1;
  const Vec10T<Scalar> k2 = StateDerivative(x2, u, P);
  const Vec10T<Scalar> x3 = x + Scalar(0.5) * dt * k2;
  const Vec10T<Scalar> k3 = StateDerivative(x3, u, P);
  const Vec10T<Scalar> x4 = x + dt * k3;
  const Vec10T<Scalar> k4 = StateDerivative(x4, u, P);
  return x + (dt / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

struct LinearizedDynamics {
  Mat10 A;   // d(xdot)/dx
  MatXd B;   // d(xdot)/du, one column per exposed wrench component
};

// Jacobians of StateDerivative about (x0, u0). The wrench enters through
// Bsel: u = Bsel * u_m maps the m exposed components to the body wrench, so
// B has one column per exposed component (Bsel = I6 for a full wrench).
//
// The velocity block is analytic: d(C(q,qd) qd)/dqd follows from the same
// Christoffel symbols used for C. The configuration block uses central
// differences of the forward dynamics.
inline LinearizedDynamics Linearize(const Vec10& x0, const Vec6& u0,
                                    const PendulumParams& P,
                                    const MatXd& Bsel) {
  if (Bsel.rows() != 6) {
    throw std::invalid_argument("Bsel must have 6 rows");
  }
  const Vec5 q = x0.head<5>();
  const Vec5 qd = x0.tail<5>();
  const BodyWrench w0 = BodyWrench::FromVector(u0);
  const DynamicsTerms d = EvalDynamicsTerms(q, qd, P);
  const Eigen::LLT<Mat5> llt(d.M);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
    throw NumericalError("mass matrix numerically singular");
  }

  LinearizedDynamics lin;
  lin.A.setZero();
  lin.A.topRightCorner<5, 5>().setIdentity();

  // d(C qd)/dqd_l = sum_j (c_ijl + c_ilj) qd_j = (C + C2)_il where C2 is the
  // Christoffel contraction over the middle index.
  Mat5 C2;
  for (int i = 0; i < 5; ++i) {
    for (int l = 0; l < 5; ++l) {
      double v = 0;
      for (int j = 0; j < 5; ++j) {
        v += 0.5 * (d.massPartials.dM[l](i, j) + d.massPartials.dM[j](i, l) -
                    d.massPartials.dM[i](j, l)) *
             qd[j];
      }
      C2(i, l) = v;
    }
  }
  lin.A.bottomRightCorner<5, 5>() = -llt.solve(Mat5(d.C + C2));

  for (int i = 0; i < 5; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(q[i]));
    Vec10 xp = x0;
    Vec10 xm = x0;
    xp[i] += h;
    xm[i] -= h;
    const Vec10 fp = StateDerivative(xp, w0, P);
    const Vec10 fm = StateDerivative(xm, w0, P);
    lin.A.block<5, 1>(5, i) = (fp.tail<5>() - fm.tail<5>()) / (2 * h);
  }

  Mat65 Jbody;
  Jbody.topRows<3>() = d.kin.R2.transpose() * d.kin.Jv2;
  Jbody.bottomRows<3>() = d.kin.Jw;
  lin.B.setZero(10, Bsel.cols());
  lin.B.bottomRows(5) = llt.solve(MatXd(Jbody.transpose() * Bsel));
  return lin;
}

inline LinearizedDynamics Linearize(const Vec10& x0, const Vec6& u0,
                                    const PendulumParams& P) {
  return Linearize(x0, u0, P, MatXd::Identity(6, 6));
}

}  // namespace susp
