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

#include "susp/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace susp {

namespace {

MatXd Symmetrized(const MatXd& X) { return 0.5 * (X + X.transpose()); }

// Relative residual of the CARE at S.
double CareResidual(const MatXd& A, const MatXd& G, const MatXd& Q,
                    const MatXd& S) {
  const MatXd res = A.transpose() * S + S * A - S * G * S + Q;
  return res.norm() / std::max(1.0, Q.norm());
}

// Solves Acl' X + X Acl + W = 0 through the Kronecker-vectorized linear
// system; sizes here are small (n <= 10, so n^2 <= 100 unknowns).
MatXd SolveLyapunov(const MatXd& Acl, const MatXd& W) {
  const Eigen::Index n = Acl.rows();
  const MatXd At = Acl.transpose();
  MatXd L = MatXd::Zero(n * n, n * n);
  // vec(At X) = (I kron At) vec(X); vec(X Acl) = (Acl' kron I) vec(X).
  for (Eigen::Index j = 0; j < n; ++j) {
    L.block(j * n, j * n, n, n) += At;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) {
        L(j * n + i, k * n + i) += At(j, k);
      }
    }
  }
  VecXd w(n * n);
  for (Eigen::Index j = 0; j < n; ++j) w.segment(j * n, n) = -W.col(j);
  const VecXd xv = L.partialPivLu().solve(w);
  MatXd X(n, n);
  for (Eigen::Index j = 0; j < n; ++j) X.col(j) = xv.segment(j * n, n);
  return Symmetrized(X);
}

}  // namespace

LqrDesign SolveCare(const MatXd& A, const MatXd& B, const MatXd& Q,
                    const MatXd& R) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != m || R.cols() != m) {
    throw std::invalid_argument("inconsistent CARE dimensions");
  }
  const MatXd Qs = Symmetrized(Q);
  const MatXd Rs = Symmetrized(R);
  const Eigen::LLT<MatXd> rllt(Rs);
  if (rllt.info() != Eigen::Success) {
    throw std::invalid_argument("input penalty R must be positive definite");
  }
  const MatXd Rinv = rllt.solve(MatXd::Identity(m, m));
  const MatXd G = B * Rinv * B.transpose();

  // PBH test: every eigenvalue of A in the closed right half plane must be
  // controllable, otherwise no stabilizing solution exists.
  {
    const Eigen::EigenSolver<MatXd> eigA(A);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::complex<double> lam = eigA.eigenvalues()[i];
      if (lam.real() < -1e-9) continue;
      Eigen::MatrixXcd pencil(n, n + m);
      pencil.leftCols(n) =
          A.cast<std::complex<double>>() -
          lam * Eigen::MatrixXcd::Identity(n, n);
      pencil.rightCols(m) = B.cast<std::complex<double>>();
      const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
      const VecXd sv = svd.singularValues();
      if (sv[n - 1] < 1e-9 * std::max(1.0, sv[0])) {
        char buf[96];
        std::snprintf(buf, sizeof(buf),
                      "unstabilizable mode at eigenvalue %g%+gi", lam.real(),
                      lam.imag());
        throw NumericalError(buf);
      }
    }
  }

  // Stable invariant subspace of the Hamiltonian.
  MatXd H(2 * n, 2 * n);
  H.topLeftCorner(n, n) = A;
  H.topRightCorner(n, n) = -G;
  H.bottomLeftCorner(n, n) = -Qs;
  H.bottomRightCorner(n, n) = -A.transpose();
  const Eigen::EigenSolver<MatXd> es(H);
  if (es.info() != Eigen::Success) {
    throw NumericalError("Hamiltonian eigendecomposition failed");
  }
  Eigen::MatrixXcd U(2 * n, n);
  Eigen::Index picked = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (es.eigenvalues()[i].real() < 0) {
      if (picked == n) {
        ++picked;
        break;
      }
      U.col(picked++) = es.eigenvectors().col(i);
    }
  }
  if (picked != n) {
    throw NumericalError(
        "Hamiltonian spectrum does not split (imaginary-axis eigenvalue); "
        "check stabilizability/detectability");
  }
  const Eigen::FullPivLU<Eigen::MatrixXcd> lu(U.topRows(n));
  if (!lu.isInvertible()) {
    throw NumericalError("Hamiltonian basis is degenerate");
  }
  MatXd S = Symmetrized((U.bottomRows(n) * lu.inverse()).real());

  // Kleinman-Newton polish: quadratic convergence from a stabilizing start.
  LqrDesign out;
  double best = CareResidual(A, G, Qs, S);
  MatXd bestS = S;
  for (int iter = 0; iter < 25 && best > 1e-14; ++iter) {
    const MatXd K = Rinv * B.transpose() * S;
    const MatXd Acl = A - B * K;
    const MatXd W = Qs + K.transpose() * Rs * K;
    S = SolveLyapunov(Acl, W);
    const double r = CareResidual(A, G, Qs, S);
    out.newtonIterations = iter + 1;
    if (r < best) {
      best = r;
      bestS = S;
    } else {
      break;
    }
  }
  out.S = bestS;
  out.K = Rinv * B.transpose() * bestS;
  out.residual = best;
  const Eigen::EigenSolver<MatXd> escl(MatXd(A - B * out.K));
  out.abscissa = escl.eigenvalues().real().maxCoeff();
  return out;
}

int CtrbRank(const MatXd& A, const MatXd& B) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n) {
    throw std::invalid_argument("inconsistent controllability dimensions");
  }
  MatXd ctrb(n, n * B.cols());
  MatXd blk = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    // Rescale each power block to unit size: a positive scaling of a block
    // leaves the column space (and hence the rank) untouched, but keeps the
    // singular-value spread independent of ||A||^k so the relative rank
    // threshold is meaningful for stiff dynamics.
    const double scale = blk.norm();
    if (scale > 0) blk /= scale;
    ctrb.middleCols(k * B.cols(), B.cols()) = blk;
    blk = A * blk;
  }
  const Eigen::JacobiSVD<MatXd> svd(ctrb);
  const VecXd sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > 1e-9 * sv[0]) ++rank;
  }
  return rank;
}

// ---------------------------------------------------------------------------
// Task space

namespace {

constexpr int TaskDim(TaskKind kind) {
  return kind == TaskKind::kOmni5 ? 5 : 3;
}

// Task rows from an evaluated kinematics block. Throws near gimbal lock,
// where the Euler-rate rows blow up.
MatXd TaskRows(const Kinematics& kin, TaskKind kind) {
  if (GimbalDegenerate(kin.R2)) {
    throw NumericalError("task jacobian degenerate near gimbal lock");
  }
  const Vec3 euler = EulerZyx(kin.R2);
  const Mat3 W = EulerRateMatrix(euler);
  const Mat35 eulerRows = W.inverse() * kin.Jw;
  MatXd J(TaskDim(kind), 5);
  J.row(0) = kin.Jv2.row(0);
  J.row(1) = kin.Jv2.row(1);
  if (kind == TaskKind::kOmni5) {
    J.bottomRows(3) = eulerRows;
  } else {
    J.row(2) = eulerRows.row(2);
  }
  return J;
}

struct TaskCore {
  DynamicsTerms d;
  Mat5 Minv;
  TaskQuantities tq;
};

TaskCore BuildCore(const Vec5& q, const Vec5& qd, const PendulumParams& P,
                   TaskKind kind) {
  TaskCore core;
  core.d = EvalDynamicsTerms(q, qd, P);
  const Eigen::LLT<Mat5> llt(core.d.M);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
    throw NumericalError("mass matrix numerically singular");
  }
  core.Minv = llt.solve(Mat5::Identity());

  TaskQuantities& tq = core.tq;
  tq.kind = kind;
  tq.J = TaskRows(core.d.kin, kind);

  // Rank check with the lost task direction in the message.
  {
    const Eigen::JacobiSVD<MatXd> svd(tq.J, Eigen::ComputeFullU);
    const VecXd sv = svd.singularValues();
    if (sv[sv.size() - 1] < 1e-8 * std::max(1.0, sv[0])) {
      const VecXd lost = svd.matrixU().col(sv.size() - 1);
      char buf[128];
      std::snprintf(buf, sizeof(buf),
                    "task-singular configuration; lost direction (%.3f",
                    lost[0]);
      std::string msg(buf);
      for (Eigen::Index i = 1; i < lost.size(); ++i) {
        std::snprintf(buf, sizeof(buf), ", %.3f", lost[i]);
        msg += buf;
      }
      msg += ")";
      throw NumericalError(msg);
    }
  }

  // Directional derivative of J along qd.
  const double eps = 1e-6 / std::max(1.0, qd.norm());
  const Vec5 qp = q + eps * qd;
  const Vec5 qm = q - eps * qd;
  tq.Jdot = (TaskRows(EvalKinematics(qp, P), kind) -
             TaskRows(EvalKinematics(qm, P), kind)) /
            (2 * eps);

  const MatXd JMJ = Symmetrized(tq.J * core.Minv * tq.J.transpose());
  const Eigen::LLT<MatXd> lltT(JMJ);
  if (lltT.info() != Eigen::Success) {
    throw NumericalError("task inertia not positive definite");
  }
  tq.Lambda =
      Symmetrized(lltT.solve(MatXd::Identity(JMJ.rows(), JMJ.cols())));
  tq.Jbar = core.Minv * tq.J.transpose() * tq.Lambda;
  tq.mu = tq.Lambda * (tq.J * core.Minv * core.d.C - tq.Jdot) * tq.Jbar;
  tq.rho = tq.Lambda * (tq.J * (core.Minv * core.d.g));

  const Vec3 euler = EulerZyx(core.d.kin.R2);
  tq.x.resize(TaskDim(kind));
  tq.x[0] = core.d.kin.p2.x();
  tq.x[1] = core.d.kin.p2.y();
  if (kind == TaskKind::kOmni5) {
    tq.x.tail(3) = euler;
  } else {
    tq.x[2] = euler[2];
  }
  tq.xd = tq.J * qd;
  return core;
}

// Nullspace rows for a given jacobian/inverse-inertia pair.
MatXd NullspaceRows(const MatXd& J, const Mat5& Minv) {
  const MatXd JMinv = J * Minv;
  const Eigen::JacobiSVD<MatXd> svd(JMinv, Eigen::ComputeFullV);
  const VecXd sv = svd.singularValues();
  if (sv[sv.size() - 1] < 1e-8 * std::max(1.0, sv[0])) {
    throw NumericalError("task rank loss while building nullspace operator");
  }
  MatXd N(5 - J.rows(), 5);
  for (Eigen::Index r = 0; r < N.rows(); ++r) {
    const VecXd v = svd.matrixV().col(J.rows() + r);
    const double scale = std::sqrt(v.dot(Minv * v));
    N.row(r) = v.transpose() / scale;
  }
  return N;
}

}  // namespace

VecXd TaskCoordinates(const Vec5& q, const PendulumParams& P, TaskKind kind) {
  const Kinematics kin = EvalKinematics(q, P);
  const Vec3 euler = EulerZyx(kin.R2);
  VecXd x(TaskDim(kind));
  x[0] = kin.p2.x();
  x[1] = kin.p2.y();
  if (kind == TaskKind::kOmni5) {
    x.tail(3) = euler;
  } else {
    x[2] = euler[2];
  }
  return x;
}

MatXd TaskJacobian(const Vec5& q, const PendulumParams& P, TaskKind kind) {
  return TaskRows(EvalKinematics(q, P), kind);
}

TaskQuantities TaskSpaceQuantities(const Vec5& q, const Vec5& qd,
                                   const PendulumParams& P, TaskKind kind) {
  return BuildCore(q, qd, P, kind).tq;
}

MatXd NullspaceOperator(const Vec5& q, const PendulumParams& P) {
  const Mat5 M = MassMatrix(q, P);
  const Eigen::LLT<Mat5> llt(M);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
    throw NumericalError("mass matrix numerically singular");
  }
  const Mat5 Minv = llt.solve(Mat5::Identity());
  return NullspaceRows(TaskJacobian(q, P, TaskKind::kUnder3), Minv);
}

TaskDecomposition UnderactuatedDecomposition(const Vec5& q, const Vec5& qd,
                                             const PendulumParams& P) {
  TaskDecomposition dec;
  const TaskCore core = BuildCore(q, qd, P, TaskKind::kUnder3);
  dec.task = core.tq;
  dec.N = NullspaceRows(dec.task.J, core.Minv);

  // Nullspace rate along qd. The SVD basis is not continuous in q, so the
  // shifted operators are first aligned to dec.N by a least-squares change of
  // basis; the aligned curve is a differentiable representative of the same
  // row space and all nullspace quantities are gauge-consistent with it.
  const double eps = 1e-6 / std::max(1.0, qd.norm());
  auto alignedAt = [&](const Vec5& qs) {
    const Mat5 Ms = MassMatrix(qs, P);
    const Mat5 MinvS = Ms.llt().solve(Mat5::Identity());
    const MatXd Ns = NullspaceRows(TaskJacobian(qs, P, TaskKind::kUnder3),
                                   MinvS);
    const MatXd T = dec.N * Ns.transpose() *
                    (Ns * Ns.transpose()).inverse();
    return MatXd(T * Ns);
  };
  const MatXd Ndot =
      (alignedAt(Vec5(q + eps * qd)) - alignedAt(Vec5(q - eps * qd))) /
      (2 * eps);

  const MatXd NMN = Symmetrized(dec.N * core.Minv * dec.N.transpose());
  const Eigen::LLT<MatXd> llt(NMN);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("nullspace inertia not positive definite");
  }
  dec.lambdaN = Symmetrized(llt.solve(MatXd::Identity(2, 2)));
  dec.Nbar = core.Minv * dec.N.transpose() * dec.lambdaN;
  dec.vN = dec.N * qd;

  const MatXd taskFlow = dec.task.J * core.Minv * core.d.C - dec.task.Jdot;
  const MatXd nullFlow = dec.N * core.Minv * core.d.C - Ndot;
  dec.muXn = dec.task.Lambda * taskFlow * dec.Nbar;
  dec.muNx = dec.lambdaN * nullFlow * dec.task.Jbar;
  dec.muN = dec.lambdaN * nullFlow * dec.Nbar;
  dec.rhoN = dec.lambdaN * (dec.N * (core.Minv * core.d.g));
  return dec;
}

VecXd PdPlusOmni(const TaskQuantities& tq, const TaskGains& gains) {
  const Eigen::Index w = tq.J.rows();
  if (gains.kp.size() != w || gains.kd.size() != w ||
      gains.xDes.size() != w || gains.xdDes.size() != w ||
      gains.xddDes.size() != w) {
    throw std::invalid_argument("task gain dimensions do not match task");
  }
  VecXd F = tq.Lambda * gains.xddDes + tq.mu * gains.xdDes +
            gains.kd.asDiagonal() * (gains.xdDes - tq.xd) +
            gains.kp.asDiagonal() * (gains.xDes - tq.x);
  if (gains.gravityComp) F += tq.rho;
  return F;
}

VecXd PdPlusUnder(const TaskDecomposition& dec, const TaskGains& gains) {
  VecXd F = PdPlusOmni(dec.task, gains);
  F += dec.muXn * dec.vN;
  return F;
}

ActuationSplit ResolveActuation(const VecXd& Fx, const TaskDecomposition& dec,
                                const Vec5& q, const PendulumParams& P,
                                const PlatformConfig& cfg) {
  if (cfg.Bsel.cols() != 3 || Fx.size() != 3) {
    throw std::invalid_argument(
        "actuation split needs a 3-dof platform and task force");
  }
  const Mat65 Jbody = BodyJacobian(q, P);
  MatXd Sm(5, 5);
  Sm.leftCols(3) = Jbody.transpose() * cfg.Bsel;
  Sm.rightCols(2) = -dec.N.transpose();
  const VecXd rhs = dec.task.J.transpose() * Fx;
  const Eigen::FullPivLU<MatXd> lu(Sm);
  if (!lu.isInvertible()) {
    throw NumericalError("actuation-degenerate configuration");
  }
  ActuationSplit split;
  const VecXd sol = lu.solve(rhs);
  split.up = sol.head(3);
  split.fn = sol.tail(2);
  split.residual = (Sm * sol - rhs).norm();
  return split;
}

}  // namespace susp
