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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "susp/dynamics.hpp"
#include "susp/kinematics.hpp"

using namespace susp;

namespace {

PendulumParams DefaultParams() { return PendulumParams{}; }

Vec5 RandomQ(oracle::Sampler& s) { return s.UniformVec<5>(-1.2, 1.2); }
Vec5 RandomQd(oracle::Sampler& s) { return s.UniformVec<5>(-2.0, 2.0); }

oracle::PlanarPendulum PlanarOf(const PendulumParams& P, double Iaxis) {
  return oracle::PlanarPendulum{P.L1, P.L2, P.m1, P.m2, Iaxis, P.gravity};
}

}  // namespace

TEST_CASE("forward kinematics: frozen poses") {
  const PendulumParams P = DefaultParams();

  JointState s;
  BasePose pose = ForwardKinematics(s, P);
  CHECK(pose.p.isApprox(Vec3(0, 0, -(P.L1 + P.L2)), 1e-14));
  CHECK(pose.R.isApprox(Mat3::Identity(), 1e-14));
  CHECK(pose.euler.norm() == doctest::Approx(0.0).epsilon(1e-14));

  // Pure yaw of the first link spins the platform frame but leaves the
  // hanging geometry untouched.
  s.q << 0, 0, M_PI / 2, 0, 0;
  pose = ForwardKinematics(s, P);
  CHECK(pose.p.isApprox(Vec3(0, 0, -(P.L1 + P.L2)), 1e-12));
  CHECK(pose.euler[2] == doctest::Approx(M_PI / 2).epsilon(1e-12));

  // Pitching the first link by +pi/2: the active rotation Ry(pi/2) maps the
  // hanging direction -z onto -x, so the chain swings to the -x axis.
  s.q << 0, M_PI / 2, 0, 0, 0;
  pose = ForwardKinematics(s, P);
  CHECK(pose.p.isApprox(Vec3(-(P.L1 + P.L2), 0, 0), 1e-12));

  // Elbow roll only: first link untouched, second link tips toward +y.
  s.q << 0, 0, 0, M_PI / 2, 0;
  pose = ForwardKinematics(s, P);
  CHECK(pose.p.isApprox(Vec3(0, P.L2, -P.L1), 1e-12));
}

TEST_CASE("forward kinematics: euler angles reconstruct the rotation") {
  const PendulumParams P = DefaultParams();
  oracle::Sampler rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    JointState s;
    s.q = RandomQ(rng);
    const BasePose pose = ForwardKinematics(s, P);
    const Mat3 R = detail::AxisRotation(2, pose.euler[2]) *
                   detail::AxisRotation(1, pose.euler[1]) *
                   detail::AxisRotation(0, pose.euler[0]);
    CHECK((R - pose.R).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("body jacobian: matches the forward-kinematics twist") {
  const PendulumParams P = DefaultParams();
  oracle::Sampler rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    JointState s;
    s.q = RandomQ(rng);
    s.qd = RandomQd(rng);
    const BasePose pose = ForwardKinematics(s, P);
    const Mat65 J = BodyJacobian(s.q, P);
    const Vec6 twist = J * s.qd;
    CHECK((twist.head<3>() - pose.R.transpose() * pose.v).norm() < 1e-9);
    CHECK((twist.tail<3>() - pose.omega).norm() < 1e-9);
  }

  // At rest, the elbow-pitch column swings the COM along body x with moment
  // arm L2: d(p2)/dq4 = [e_y]^ (0,0,-L2) = (-L2, 0, 0).
  const Mat65 J0 = BodyJacobian(Vec5::Zero(), P);
  CHECK(J0.col(4).head<3>().isApprox(Vec3(-P.L2, 0, 0), 1e-12));
  CHECK(J0.col(4).tail<3>().isApprox(Vec3(0, 1, 0), 1e-12));
  CHECK(J0.col(4).head<3>().norm() == doctest::Approx(P.L2).epsilon(1e-12));
}

TEST_CASE("mass matrix: symmetry and positive definiteness") {
  const PendulumParams P = DefaultParams();
  oracle::Sampler rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec5 q = RandomQ(rng);
    const Mat5 M = MassMatrix(q, P);
    CHECK((M - M.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Mat5> es(M);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("mass matrix: hanging-pose pitch entry closed form") {
  const PendulumParams P = DefaultParams();
  const Mat5 M = MassMatrix(Vec5::Zero(), P);
  const double expected = (P.m1 + P.m2) * P.L1 * P.L1 + P.m2 * P.L2 * P.L2 +
                          2 * P.m2 * P.L1 * P.L2 + P.inertia[1];
  CHECK(M(1, 1) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("mass matrix: planar sections match the Lagrangian oracle") {
  const PendulumParams P = DefaultParams();
  oracle::Sampler rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    // x-z plane swing: joints (q1, q4) about the y axes, inertia Iyy.
    {
      const double a1 = rng.Uniform(-1.2, 1.2);
      const double a2 = rng.Uniform(-1.2, 1.2);
      Vec5 q = Vec5::Zero();
      q[1] = a1;
      q[4] = a2;
      const Mat5 M = MassMatrix(q, P);
      const Eigen::Matrix2d Mp =
          oracle::PlanarMass(PlanarOf(P, P.inertia[1]), a2);
      CHECK(M(1, 1) == doctest::Approx(Mp(0, 0)).epsilon(1e-12));
      CHECK(M(1, 4) == doctest::Approx(Mp(0, 1)).epsilon(1e-12));
      CHECK(M(4, 4) == doctest::Approx(Mp(1, 1)).epsilon(1e-12));
    }
    // y-z plane swing: joints (q0, q3) about the x axes, inertia Ixx.
    {
      const double a1 = rng.Uniform(-1.2, 1.2);
      const double a2 = rng.Uniform(-1.2, 1.2);
      Vec5 q = Vec5::Zero();
      q[0] = a1;
      q[3] = a2;
      const Mat5 M = MassMatrix(q, P);
      const Eigen::Matrix2d Mp =
          oracle::PlanarMass(PlanarOf(P, P.inertia[0]), a2);
      CHECK(M(0, 0) == doctest::Approx(Mp(0, 0)).epsilon(1e-12));
      CHECK(M(0, 3) == doctest::Approx(Mp(0, 1)).epsilon(1e-12));
      CHECK(M(3, 3) == doctest::Approx(Mp(1, 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("mass matrix: hanging yaw rotates the elbow block by conjugation") {
  // At q = (0,0,s,0,0) the elbow joint axes are yawed by s while the mass
  // geometry stays axisymmetric, so with Ixx = Iyy the velocity map gives
  // M(s) = U(s)^T M(0) U(s) with U = blkdiag(I3, Rot2(s)).
  const PendulumParams P = DefaultParams();
  REQUIRE(P.inertia[0] == P.inertia[1]);
  const Mat5 M0 = MassMatrix(Vec5::Zero(), P);
  for (double s : {0.3, -0.8, 1.4, 2.9}) {
    Vec5 q = Vec5::Zero();
    q[2] = s;
    const Mat5 Ms = MassMatrix(q, P);
    Mat5 U = Mat5::Identity();
    U(3, 3) = std::cos(s);
    U(3, 4) = -std::sin(s);
    U(4, 3) = std::sin(s);
    U(4, 4) = std::cos(s);
    CHECK((Ms - U.transpose() * M0 * U).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mass matrix partials: match high-order finite differences") {
  const PendulumParams P = DefaultParams();
  oracle::Sampler rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec5 q = RandomQ(rng);
    const MassPartials mp = MassMatrixPartials(q, P);
    for (int k = 0; k < 5; ++k) {
      const Mat5 dMfd = oracle::CentralDiff4(
          [&](double h) {
            Vec5 qh = q;
            qh[k] += h;
            return MassMatrix(qh, P);
          },
          1e-4);
      CHECK((mp.dM[k] - dMfd).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("coriolis: planar sections match the textbook vector") {
  const PendulumParams P = DefaultParams();
  oracle::Sampler rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const double a1 = rng.Uniform(-1.2, 1.2);
    const double a2 = rng.Uniform(-1.2, 1.2);
    const double w1 = rng.Uniform(-2, 2);
    const double w2 = rng.Uniform(-2, 2);

    // x-z plane: (q1, q4) about y.
    Vec5 q = Vec5::Zero();
    Vec5 qd = Vec5::Zero();
    q[1] = a1;
    q[4] = a2;
    qd[1] = w1;
    qd[4] = w2;
    const Vec5 cq = CoriolisMatrix(q, qd, P) * qd;
    const Eigen::Vector2d cp =
        oracle::PlanarCoriolis(PlanarOf(P, P.inertia[1]), a2, w1, w2) *
        Eigen::Vector2d(w1, w2);
    CHECK(cq[1] == doctest::Approx(cp[0]).epsilon(1e-10));
    CHECK(cq[4] == doctest::Approx(cp[1]).epsilon(1e-10));
    // Planar motion generates no out-of-plane Coriolis forces.
    CHECK(std::abs(cq[0]) < 1e-10);
    CHECK(std::abs(cq[3]) < 1e-10);
  }
}

TEST_CASE("coriolis: Mdot - 2C is skew symmetric") {
  const PendulumParams P = DefaultParams();
  oracle::Sampler rng(32);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec5 q = RandomQ(rng);
    const Vec5 qd = RandomQd(rng);
    const Mat5 C = CoriolisMatrix(q, qd, P);
    // Mdot along the motion, from a fourth-order difference in time.
    const Mat5 Mdot = oracle::CentralDiff4(
        [&](double h) { return MassMatrix(Vec5(q + h * qd), P); }, 1e-4);
    const Mat5 S = Mdot - 2 * C;
    Vec5 v = rng.UniformVec<5>(-1, 1).normalized();
    CHECK(std::abs(v.dot(S * v)) < 1e-9);
    CHECK((S + S.transpose()).cwiseAbs().maxCoeff() < 1e-8);
  }

  const Vec5 q = RandomQ(rng);
  CHECK(CoriolisMatrix(q, Vec5::Zero(), P).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gravity: restoring torque and gradient property") {
  const PendulumParams P = DefaultParams();
  CHECK(GravityVector(Vec5::Zero(), P).norm() == doctest::Approx(0.0));

  // First link horizontal: the pitch component carries the full moment.
  Vec5 q = Vec5::Zero();
  q[1] = M_PI / 2;
  const Vec5 g = GravityVector(q, P);
  const double expected =
      (P.m1 + P.m2) * P.gravity * P.L1 + P.m2 * P.gravity * P.L2;
  CHECK(std::abs(g[1]) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(g[1] > 0.0);  // positive gradient opposes the deflection

  oracle::Sampler rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec5 qr = RandomQ(rng);
    const Vec5 gv = GravityVector(qr, P);
    Vec5 gfd;
    for (int k = 0; k < 5; ++k) {
      gfd[k] = oracle::CentralDiff2(
          [&](double h) {
            Vec5 qh = qr;
            qh[k] += h;
            return PotentialEnergy(qh, P);
          },
          1e-6);
    }
    CHECK((gv - gfd).norm() / std::max(1.0, gfd.norm()) < 1e-6);
  }
}

TEST_CASE("energy: datum and inverted configuration") {
  const PendulumParams P = DefaultParams();
  CHECK(TotalEnergy(Vec10::Zero(), P) == doctest::Approx(0.0));

  Vec10 x = Vec10::Zero();
  x[1] = M_PI;  // both links straight up
  const double expected =
      2 * P.gravity * (P.m1 * P.L1 + P.m2 * (P.L1 + P.L2));
  CHECK(TotalEnergy(x, P) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("energy: conserved over a 10 s unforced swing") {
  const PendulumParams P = DefaultParams();
  Vec10 x = Vec10::Zero();
  x.head<5>() << 0.15, 0.2, 0.2, 0, 0;
  const double e0 = TotalEnergy(x, P);
  const double dt = 1e-3;
  double maxDrift = 0.0;
  for (int i = 0; i < 10000; ++i) {
    x = StepRk4(x, BodyWrench::Zero(), dt, P);
    maxDrift = std::max(maxDrift, std::abs(TotalEnergy(x, P) - e0));
  }
  CHECK(maxDrift / std::abs(e0) < 1e-6);
}

TEST_CASE("energy: spinning the platform about the cable is a symmetry") {
  // With Ixx = Iyy, shifting q3 at a configuration with no elbow deflection
  // re-gauges the platform spin: the (q1, q2) motion and the energy history
  // are unchanged.
  const PendulumParams P = DefaultParams();
  Vec10 xa = Vec10::Zero();
  xa.head<5>() << 0.15, 0.2, 0.2, 0, 0;
  Vec10 xb = xa;
  xb[2] += 1.1;

  const double dt = 1e-3;
  for (int i = 0; i < 2000; ++i) {
    xa = StepRk4(xa, BodyWrench::Zero(), dt, P);
    xb = StepRk4(xb, BodyWrench::Zero(), dt, P);
    if (i % 100 == 0) {
      CHECK(std::abs(TotalEnergy(xa, P) - TotalEnergy(xb, P)) < 1e-9);
      CHECK(std::abs(xa[0] - xb[0]) < 1e-9);
      CHECK(std::abs(xa[1] - xb[1]) < 1e-9);
    }
  }
}

TEST_CASE("state derivative: yaw moment decouples at rest") {
  const PendulumParams P = DefaultParams();
  BodyWrench u;
  u.m = Vec3(0, 0, 0.5);
  const Vec10 xdot = StateDerivative(Vec10::Zero(), u, P);
  const Mat5 M = MassMatrix(Vec5::Zero(), P);
  CHECK(xdot.head<5>().norm() == doctest::Approx(0.0));
  CHECK(xdot[7] == doctest::Approx(0.5 / M(2, 2)).epsilon(1e-12));
  CHECK(M(2, 2) == doctest::Approx(P.inertia[2]).epsilon(1e-12));
  Vec5 rest = xdot.tail<5>();
  rest[2] = 0;
  CHECK(rest.norm() < 1e-14);
}

TEST_CASE("state derivative: rejects bad inputs") {
  const PendulumParams P = DefaultParams();
  Vec10 x = Vec10::Zero();
  x[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(StateDerivative(x, BodyWrench::Zero(), P), NumericalError);

  // The chart degenerates when the first link pitches to +/- pi/2: the roll
  // and yaw axes align and the mass matrix loses rank.
  Vec10 xg = Vec10::Zero();
  xg[1] = M_PI / 2;
  CHECK_THROWS_AS(StateDerivative(xg, BodyWrench::Zero(), P), NumericalError);
}

TEST_CASE("linearize: matches finite differences of the dynamics") {
  const PendulumParams P = DefaultParams();
  oracle::Sampler rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    Vec10 x;
    x.head<5>() = rng.UniformVec<5>(-0.8, 0.8);
    x.tail<5>() = rng.UniformVec<5>(-1.0, 1.0);
    Vec6 u = rng.UniformVec<6>(-2, 2);
    const LinearizedDynamics lin = Linearize(x, u, P);
    const BodyWrench w = BodyWrench::FromVector(u);

    Mat10 Afd;
    for (int k = 0; k < 10; ++k) {
      Afd.col(k) = oracle::CentralDiff2(
          [&](double h) {
            Vec10 xh = x;
            xh[k] += h;
            return StateDerivative(xh, w, P);
          },
          1e-5);
    }
    CHECK((lin.A - Afd).norm() / Afd.norm() < 1e-6);

    MatXd Bfd(10, 6);
    for (int k = 0; k < 6; ++k) {
      Bfd.col(k) = oracle::CentralDiff2(
          [&](double h) {
            Vec6 uh = u;
            uh[k] += h;
            return StateDerivative(x, BodyWrench::FromVector(uh), P);
          },
          1e-5);
    }
    CHECK((lin.B - Bfd).norm() / Bfd.norm() < 1e-6);
  }
}

TEST_CASE("linearize: hanging equilibrium structure and spectrum") {
  const PendulumParams P = DefaultParams();
  const LinearizedDynamics lin = Linearize(Vec10::Zero(), Vec6::Zero(), P);

  CHECK(lin.A.topLeftCorner<5, 5>().cwiseAbs().maxCoeff() == 0.0);
  CHECK((lin.A.topRightCorner<5, 5>() - Mat5::Identity())
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(lin.A.bottomRightCorner<5, 5>().cwiseAbs().maxCoeff() < 1e-9);

  // Bottom-left block is -M^{-1} dg/dq.
  Mat5 dgdq;
  for (int k = 0; k < 5; ++k) {
    dgdq.col(k) = oracle::CentralDiff2(
        [&](double h) {
          Vec5 qh = Vec5::Zero();
          qh[k] += h;
          return GravityVector(qh, P);
        },
        1e-6);
  }
  const Mat5 M = MassMatrix(Vec5::Zero(), P);
  const Mat5 expected = -M.llt().solve(dgdq);
  CHECK((lin.A.bottomLeftCorner<5, 5>() - expected).norm() /
            expected.norm() <
        1e-6);

  // Conservative system: all eigenvalues on the imaginary axis, two pendulum
  // modes per swing plane plus the torque-free yaw pair at the origin.
  Eigen::EigenSolver<Mat10> es(lin.A);
  int zeros = 0;
  for (int i = 0; i < 10; ++i) {
    CHECK(std::abs(es.eigenvalues()[i].real()) < 1e-6);
    if (std::abs(es.eigenvalues()[i]) < 1e-6) {
      ++zeros;
    } else {
      CHECK(std::abs(es.eigenvalues()[i].imag()) > 0.5);
    }
  }
  CHECK(zeros == 2);
}

TEST_CASE("linearize: input map respects the exposed wrench components") {
  const PendulumParams P = DefaultParams();
  MatXd Bsel = MatXd::Zero(6, 3);
  Bsel(0, 0) = 1;
  Bsel(1, 1) = 1;
  Bsel(5, 2) = 1;

  Vec10 x;
  x.head<5>() << 0.15, 0.2, 0.2, 0, 0;
  x.tail<5>().setZero();
  const LinearizedDynamics full = Linearize(x, Vec6::Zero(), P);
  const LinearizedDynamics reduced = Linearize(x, Vec6::Zero(), P, Bsel);

  CHECK(reduced.B.cols() == 3);
  CHECK((reduced.B - full.B * Bsel).norm() < 1e-12);
  CHECK(reduced.B.topRows(5).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rk4: fourth-order convergence against a fine reference") {
  const PendulumParams P = DefaultParams();
  Vec10 x0 = Vec10::Zero();
  x0.head<5>() << 0.15, 0.2, 0.2, 0, 0;
  x0.tail<5>() << 0.3, -0.2, 0.1, 0.4, -0.1;
  BodyWrench u;
  u.f = Vec3(0.4, -0.2, 0.1);
  u.m = Vec3(0.02, 0.03, -0.01);

  const double T = 0.1;
  auto integrate = [&](double dt) {
    Vec10 x = x0;
    const int n = static_cast<int>(std::round(T / dt));
    for (int i = 0; i < n; ++i) x = StepRk4(x, u, dt, P);
    return x;
  };

  const Vec10 ref = integrate(2.5e-5);
  const double err1 = (integrate(2e-3) - ref).norm();
  const double err2 = (integrate(1e-3) - ref).norm();
  CHECK(err2 < err1 / 10.0);
  CHECK(err1 / err2 < 40.0);
  CHECK(err2 < 1e-9);
}
