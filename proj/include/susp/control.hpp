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

#include "susp/allocation.hpp"
#include "susp/dynamics.hpp"
#include "susp/types.hpp"

// Controllers: an LQR joint-space damper designed from the hanging-pose
// linearization, and PD+ task-space laws — fully actuated on the platform
// pose, and underactuated on (p_x, p_y, yaw) with a dynamically consistent
// nullspace decomposition.

namespace susp {

// ---------------------------------------------------------------------------
// LQR / Riccati

struct LqrDesign {
  MatXd K;           // m x n state-feedback gain, u = -K x
  MatXd S;           // n x n stabilizing Riccati solution
  double residual = 0;   // relative CARE residual
  double abscissa = 0;   // max Re eig(A - B K)
  int newtonIterations = 0;
};

// Stabilizing solution of A'S + SA - S B R^-1 B' S + Q = 0 via the stable
// invariant subspace of the Hamiltonian matrix, polished with Kleinman-Newton
// iterations. Throws NumericalError when (A, B) has an unstabilizable mode or
// the Hamiltonian has eigenvalues on the imaginary axis.
LqrDesign SolveCare(const MatXd& A, const MatXd& B, const MatXd& Q,
                    const MatXd& R);

// Numerical rank of the Kalman controllability matrix [B, AB, ..., A^{n-1}B]
// (SVD, threshold 1e-9 * sigma_max). Pass (A^T, C^T) for observability.
int CtrbRank(const MatXd& A, const MatXd& B);

inline VecXd LqrCommand(const MatXd& K, const VecXd& xhat) {
  return -K * xhat;
}

// ---------------------------------------------------------------------------
// Task-space control

enum class TaskKind {
  kOmni5,   // (p_x, p_y, roll, pitch, yaw) - needs the full 6D wrench
  kUnder3,  // (p_x, p_y, yaw) - realizable with (Fx, Fy, Mz)
};

// Desired trajectory and gains, one entry per task coordinate.
struct TaskGains {
  VecXd kp;
  VecXd kd;
  VecXd xDes;
  VecXd xdDes;
  VecXd xddDes;
  bool gravityComp = true;  // include the rho feedforward term
};

// Task-side quantities at one configuration. For kUnder3 this is the x-block
// of the decomposed dynamics: Lambda xdd + mu xd + (coupling) + rho = Jbar' tau.
struct TaskQuantities {
  TaskKind kind = TaskKind::kOmni5;
  MatXd J;       // w x 5 task jacobian
  MatXd Jdot;    // w x 5, directional derivative along qd
  MatXd Lambda;  // w x w task inertia (J M^-1 J')^-1
  MatXd mu;      // w x w task Coriolis: Lambda (J M^-1 C - Jdot) Jbar
  VecXd rho;     // w gravity component: Lambda J M^-1 g
  VecXd x;       // task coordinates
  VecXd xd;      // task rates
  MatXd Jbar;    // 5 x w dynamically consistent pseudoinverse M^-1 J' Lambda
};

// Task coordinates and jacobian alone (used for finite differences and
// measurement-style queries).
VecXd TaskCoordinates(const Vec5& q, const PendulumParams& P, TaskKind kind);
MatXd TaskJacobian(const Vec5& q, const PendulumParams& P, TaskKind kind);

// Full task-side dynamics block. Throws NumericalError at task-singular
// configurations (rank loss reported with the lost direction) and near
// gimbal lock where the Euler rows degenerate.
TaskQuantities TaskSpaceQuantities(const Vec5& q, const Vec5& qd,
                                   const PendulumParams& P, TaskKind kind);

// Rows span the dynamically consistent nullspace of the kUnder3 task:
// J M^-1 N' = 0, rows normalized to unit M^-1-metric length.
MatXd NullspaceOperator(const Vec5& q, const PendulumParams& P);

// Both blocks of the decomposed dynamics for the underactuated task:
//   [Lambda_x   0      ] [xdd ]   [mu_x   mu_xn] [xd ]   [rho_x]   [Jbar']
//   [0          Lambda_n] [vdot] + [mu_nx  mu_n ] [v_n] + [rho_n] = [Nbar'] tau
struct TaskDecomposition {
  TaskQuantities task;  // w = 3 block (J, Lambda_x, mu_x, rho_x, ...)
  MatXd N;              // 2 x 5 nullspace operator
  MatXd Nbar;           // 5 x 2: M^-1 N' Lambda_n
  MatXd lambdaN;        // 2 x 2 nullspace inertia
  MatXd muXn;           // 3 x 2 coupling into the task block
  MatXd muNx;           // 2 x 3
  MatXd muN;            // 2 x 2
  VecXd rhoN;           // 2
  VecXd vN;             // 2 nullspace velocity N qd
};

TaskDecomposition UnderactuatedDecomposition(const Vec5& q, const Vec5& qd,
                                             const PendulumParams& P);

// PD+ with model feedforward: F = Lambda xdd_d + mu xd_d + Kd (xd_d - xd)
// + Kp (x_d - x) [+ rho]. Returns the 5-vector task force.
VecXd PdPlusOmni(const TaskQuantities& tq, const TaskGains& gains);

// Underactuated variant: adds the nullspace-coupling feedforward mu_xn v_n.
// Returns the 3-vector task force.
VecXd PdPlusUnder(const TaskDecomposition& dec, const TaskGains& gains);

// Splits a task force into the platform command u_p and the induced
// nullspace force F_n by solving [Jbody' Bsel, -N'] [u_p; F_n] = J' F_x.
struct ActuationSplit {
  VecXd up;            // reduced wrench command (Bsel columns)
  VecXd fn;            // induced nullspace force
  double residual = 0; // reconstruction residual of the 5x5 solve
};

ActuationSplit ResolveActuation(const VecXd& Fx, const TaskDecomposition& dec,
                                const Vec5& q, const PendulumParams& P,
                                const PlatformConfig& cfg);

}  // namespace susp
