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

#include "susp/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace susp {

std::string ToString(PlatformKind kind) {
  switch (kind) {
    case PlatformKind::kOmnidirectional:
      return "omnidirectional";
    case PlatformKind::kPlanarThrust:
      return "planar_thrust";
    case PlatformKind::kMinimalActuated:
      return "minimal_actuated";
  }
  return "unknown";
}

PlatformKind PlatformKindFromString(const std::string& name) {
  if (name == "omnidirectional" || name == "od") {
    return PlatformKind::kOmnidirectional;
  }
  if (name == "planar_thrust" || name == "pt") {
    return PlatformKind::kPlanarThrust;
  }
  if (name == "minimal_actuated" || name == "ma") {
    return PlatformKind::kMinimalActuated;
  }
  throw ScenarioError("unknown platform kind: " + name);
}

PlatformConfig BuiltinPlatform(PlatformKind kind) {
  PlatformConfig cfg;
  cfg.kind = kind;
  cfg.fMax = 9.0;
  cfg.armLength = 0.4;
  switch (kind) {
    case PlatformKind::kOmnidirectional: {
      cfg.nMotors = 8;
      cfg.A.resize(6, 8);
      cfg.A << 0.57, -0.81, -0.57, 0, -0.57, 0.81, 0.57, 0,  //
          -0.57, 0, -0.57, 0.81, 0.57, 0, 0.57, -0.81,       //
          0.6, 0.6, -0.6, -0.59, 0.6, 0.59, -0.6, -0.59,     //
          0.33, 0.46, -0.33, 0, -0.33, -0.46, 0.33, 0.46,    //
          -0.33, 0, -0.33, -0.46, 0.33, 0, 0.33, 0.46,       //
          -0.59, 0.6, 0.59, -0.5, -0.59, 0.6, 0.59, -0.6;
      cfg.Bsel = MatXd::Identity(6, 6);
      break;
    }
    case PlatformKind::kPlanarThrust: {
      cfg.nMotors = 6;
      cfg.A.resize(3, 6);
      cfg.A << 1, 1, -0.5, -0.5, -0.5, -0.5,      //
          0, 0, 0.86, 0.86, -0.86, -0.86,         //
          0.4, -0.4, 0.4, -0.4, -0.4, 0.4;
      cfg.Bsel = MatXd::Zero(6, 3);
      cfg.Bsel(0, 0) = 1;  // Fx
      cfg.Bsel(1, 1) = 1;  // Fy
      cfg.Bsel(5, 2) = 1;  // Mz
      break;
    }
    case PlatformKind::kMinimalActuated: {
      cfg.nMotors = 4;
      cfg.A.resize(3, 4);
      cfg.A << 0, 1, 0, -1,     //
          -1, 0, 1, 0,          //
          -0.4, 0.4, -0.4, 0.4;
      cfg.Bsel = MatXd::Zero(6, 3);
      cfg.Bsel(0, 0) = 1;
      cfg.Bsel(1, 1) = 1;
      cfg.Bsel(5, 2) = 1;
      break;
    }
  }
  return cfg;
}

VecXd WrenchOfThrusts(const PlatformConfig& cfg, const VecXd& thrusts) {
  if (thrusts.size() != cfg.nMotors) {
    throw std::invalid_argument("thrust vector size does not match platform");
  }
  return cfg.A * thrusts;
}

namespace {

enum class VarState { kLower, kUpper, kFree };

MatXd FreeColumns(const MatXd& G, const std::vector<VarState>& state,
                  const std::vector<int>& freeIdx) {
  MatXd Gf(G.rows(), static_cast<Eigen::Index>(freeIdx.size()));
  for (size_t k = 0; k < freeIdx.size(); ++k) {
    Gf.col(static_cast<Eigen::Index>(k)) = G.col(freeIdx[k]);
  }
  return Gf;
}

std::vector<int> CollectFree(const std::vector<VarState>& state) {
  std::vector<int> freeIdx;
  for (size_t j = 0; j < state.size(); ++j) {
    if (state[j] == VarState::kFree) {
      freeIdx.push_back(static_cast<int>(j));
    }
  }
  return freeIdx;
}

// Bounded-variable least squares: min ||G x - b||^2 over the box. Classic
// active-set iteration; each inner solve is a minimum-norm least-squares
// solution over the free variables.
int SolveBvls(const MatXd& G, const VecXd& b, double lo, double hi, VecXd& x,
              std::vector<VarState>& state) {
  const int n = static_cast<int>(G.cols());
  const double optTol = 1e-11 * std::max(1.0, b.cwiseAbs().maxCoeff());
  int iterations = 0;
  const int maxIter = 100 * (n + 1);

  for (;; ++iterations) {
    if (iterations > maxIter) {
      throw NumericalError("bounded least squares failed to converge");
    }
    const VecXd w = G.transpose() * (b - G * x);
    int pick = -1;
    double worst = optTol;
    for (int j = 0; j < n; ++j) {
      if (state[j] == VarState::kLower && w[j] > worst) {
        worst = w[j];
        pick = j;
      } else if (state[j] == VarState::kUpper && -w[j] > worst) {
        worst = -w[j];
        pick = j;
      }
    }
    if (pick < 0) {
      return iterations;
    }
    state[pick] = VarState::kFree;

    for (;;) {
      ++iterations;
      if (iterations > maxIter) {
        throw NumericalError("bounded least squares failed to converge");
      }
      const std::vector<int> freeIdx = CollectFree(state);
      if (freeIdx.empty()) {
        break;  // everything re-bound; let the outer loop re-examine
      }
      VecXd rhs = b;
      for (int j = 0; j < n; ++j) {
        if (state[j] != VarState::kFree) {
          rhs -= G.col(j) * x[j];
        }
      }
      const MatXd Gf = FreeColumns(G, state, freeIdx);
      Eigen::CompleteOrthogonalDecomposition<MatXd> cod(Gf);
      const VecXd cand = cod.solve(rhs);

      double alpha = 1.0;
      int blocking = -1;
      double blockingBound = 0.0;
      for (size_t k = 0; k < freeIdx.size(); ++k) {
        const int j = freeIdx[k];
        const double xc = cand[static_cast<Eigen::Index>(k)];
        if (xc < lo - 1e-14 || xc > hi + 1e-14) {
          const double target = xc < lo ? lo : hi;
          const double d = xc - x[j];
          const double a = d == 0.0 ? 0.0 : (target - x[j]) / d;
          if (a < alpha) {
            alpha = a;
            blocking = j;
            blockingBound = target;
          }
        }
      }
      if (blocking < 0) {
        for (size_t k = 0; k < freeIdx.size(); ++k) {
          x[freeIdx[k]] = std::clamp(cand[static_cast<Eigen::Index>(k)], lo, hi);
        }
        break;
      }
      for (size_t k = 0; k < freeIdx.size(); ++k) {
        const int j = freeIdx[k];
        x[j] += alpha * (cand[static_cast<Eigen::Index>(k)] - x[j]);
        x[j] = std::clamp(x[j], lo, hi);
      }
      x[blocking] = blockingBound;
      state[blocking] =
          blockingBound == lo ? VarState::kLower : VarState::kUpper;
    }
  }
}

// Minimum-norm refinement on the affine set G x = b starting from a feasible
// point. Moves along directions in the nullspace of the free columns, so
// feasibility is preserved exactly; releases a bound variable only when its
// KKT multiplier has the wrong sign.
int SolveMinNorm(const MatXd& G, const VecXd& b, double lo, double hi,
                 VecXd& x, std::vector<VarState>& state) {
  const int n = static_cast<int>(G.cols());
  int iterations = 0;
  const int maxIter = 100 * (n + 1);

  // Anti-cycling: at a degenerate vertex a release can be followed by a
  // zero-length step that re-binds a variable without changing x. Each
  // release that fails to strictly decrease ||x|| burns stall budget; any
  // real progress refills it. When the budget is gone the current point is
  // feasible and min-norm-optimal to working precision, so stop there.
  double bestNorm = std::numeric_limits<double>::infinity();
  int stallBudget = n + 1;

  for (;;) {
    ++iterations;
    if (iterations > maxIter) {
      throw NumericalError("min-norm allocation failed to converge");
    }
    const std::vector<int> freeIdx = CollectFree(state);
    VecXd rhs = b;
    for (int j = 0; j < n; ++j) {
      if (state[j] != VarState::kFree) {
        rhs -= G.col(j) * x[j];
      }
    }
    const MatXd Gf = FreeColumns(G, state, freeIdx);
    // Minimum-norm solution of G_F x_F = rhs.
    VecXd cand = VecXd::Zero(static_cast<Eigen::Index>(freeIdx.size()));
    if (!freeIdx.empty()) {
      Eigen::CompleteOrthogonalDecomposition<MatXd> cod(Gf);
      cand = cod.solve(rhs);
    }

    double alpha = 1.0;
    int blocking = -1;
    double blockingBound = 0.0;
    for (size_t k = 0; k < freeIdx.size(); ++k) {
      const int j = freeIdx[k];
      const double d = cand[static_cast<Eigen::Index>(k)] - x[j];
      double a = 1.0;
      if (d > 1e-15) {
        a = (hi - x[j]) / d;
      } else if (d < -1e-15) {
        a = (lo - x[j]) / d;
      }
      if (a < alpha) {
        alpha = a;
        blocking = j;
        blockingBound = d > 0 ? hi : lo;
      }
    }

    if (blocking >= 0) {
      for (size_t k = 0; k < freeIdx.size(); ++k) {
        const int j = freeIdx[k];
        x[j] += alpha * (cand[static_cast<Eigen::Index>(k)] - x[j]);
        x[j] = std::clamp(x[j], lo, hi);
      }
      x[blocking] = blockingBound;
      state[blocking] =
          blockingBound == lo ? VarState::kLower : VarState::kUpper;
      continue;
    }

    for (size_t k = 0; k < freeIdx.size(); ++k) {
      x[freeIdx[k]] = std::clamp(cand[static_cast<Eigen::Index>(k)], lo, hi);
    }

    // Multipliers: x_F = G_F^T lambda at the subproblem optimum.
    VecXd xf(static_cast<Eigen::Index>(freeIdx.size()));
    for (size_t k = 0; k < freeIdx.size(); ++k) {
      xf[static_cast<Eigen::Index>(k)] = x[freeIdx[k]];
    }
    VecXd lambda;
    if (freeIdx.empty()) {
      lambda = VecXd::Zero(G.rows());
    } else {
      Eigen::CompleteOrthogonalDecomposition<MatXd> codT(Gf.transpose());
      lambda = codT.solve(xf);
    }
    const VecXd eta = G.transpose() * lambda;

    int release = -1;
    double worst = 1e-11 * std::max(1.0, hi);
    for (int j = 0; j < n; ++j) {
      if (state[j] == VarState::kLower && eta[j] - lo > worst) {
        worst = eta[j] - lo;
        release = j;
      } else if (state[j] == VarState::kUpper && hi - eta[j] > worst) {
        worst = hi - eta[j];
        release = j;
      }
    }
    if (release < 0) {
      return iterations;
    }
    const double norm = x.squaredNorm();
    if (norm < bestNorm * (1.0 - 1e-12)) {
      bestNorm = norm;
      stallBudget = n + 1;
    } else if (--stallBudget <= 0) {
      return iterations;
    }
    state[release] = VarState::kFree;
  }
}

double KktResidual(const MatXd& G, const VecXd& b, double lo, double hi,
                   const VecXd& x, bool saturated) {
  const int n = static_cast<int>(G.cols());
  double resid = 0.0;
  const double bndTol = 0.0;
  for (int j = 0; j < n; ++j) {
    resid = std::max(resid, lo - x[j]);
    resid = std::max(resid, x[j] - hi);
  }
  const double edge = 1e-9 * std::max(1.0, hi);
  if (saturated) {
    // Stationarity of min ||Gx - b||^2 over the box.
    const VecXd grad = G.transpose() * (G * x - b);
    for (int j = 0; j < n; ++j) {
      if (x[j] <= lo + edge) {
        resid = std::max(resid, -grad[j]);
      } else if (x[j] >= hi - edge) {
        resid = std::max(resid, grad[j]);
      } else {
        resid = std::max(resid, std::abs(grad[j]));
      }
    }
    return std::max(resid, bndTol);
  }
  resid = std::max(resid, (G * x - b).cwiseAbs().maxCoeff());
  // Stationarity of min ||x||^2 on the active face: x_F = G_F^T lambda.
  std::vector<int> freeIdx;
  for (int j = 0; j < n; ++j) {
    if (x[j] > lo + edge && x[j] < hi - edge) {
      freeIdx.push_back(j);
    }
  }
  MatXd Gf(G.rows(), static_cast<Eigen::Index>(freeIdx.size()));
  VecXd xf(static_cast<Eigen::Index>(freeIdx.size()));
  for (size_t k = 0; k < freeIdx.size(); ++k) {
    Gf.col(static_cast<Eigen::Index>(k)) = G.col(freeIdx[k]);
    xf[static_cast<Eigen::Index>(k)] = x[freeIdx[k]];
  }
  VecXd lambda = VecXd::Zero(G.rows());
  if (!freeIdx.empty()) {
    Eigen::CompleteOrthogonalDecomposition<MatXd> codT(Gf.transpose());
    lambda = codT.solve(xf);
  }
  const VecXd eta = G.transpose() * lambda;
  for (size_t k = 0; k < freeIdx.size(); ++k) {
    resid = std::max(
        resid, std::abs(xf[static_cast<Eigen::Index>(k)] -
                        eta[freeIdx[k]]));
  }
  for (int j = 0; j < n; ++j) {
    if (x[j] <= lo + edge) {
      resid = std::max(resid, eta[j] - lo);
    } else if (x[j] >= hi - edge) {
      resid = std::max(resid, hi - eta[j]);
    }
  }
  return resid;
}

}  // namespace

AllocationResult BoundedMinNorm(const MatXd& G, const VecXd& target,
                                double lo, double hi) {
  if (G.rows() != target.size()) {
    throw std::invalid_argument("target size does not match wrench map");
  }
  if (!(lo < hi)) {
    throw std::invalid_argument("invalid thrust bounds");
  }
  if (!target.allFinite()) {
    throw NumericalError("non-finite wrench command");
  }
  const int n = static_cast<int>(G.cols());

  AllocationResult res;
  res.thrusts = VecXd::Constant(n, lo);
  std::vector<VarState> state(static_cast<size_t>(n), VarState::kLower);

  res.iterations = SolveBvls(G, target, lo, hi, res.thrusts, state);
  const double feasTol = 1e-9 * std::max(1.0, target.cwiseAbs().maxCoeff());
  const double lsResidual =
      (G * res.thrusts - target).cwiseAbs().maxCoeff();

  if (lsResidual <= feasTol) {
    res.saturated = false;
    // Below nano-scale the feasible point is already as small as the
    // refinement could make it; skipping avoids chasing noise-level
    // multipliers around a degenerate vertex.
    if (res.thrusts.cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, hi)) {
      res.iterations += SolveMinNorm(G, target, lo, hi, res.thrusts, state);
    }
  } else {
    res.saturated = true;
  }
  res.achieved = G * res.thrusts;
  res.kktResidual = KktResidual(G, target, lo, hi, res.thrusts, res.saturated);
  return res;
}

AllocationResult AllocateThrusts(const VecXd& wrench,
                                 const PlatformConfig& cfg) {
  if (wrench.size() != cfg.A.rows()) {
    throw std::invalid_argument("wrench size does not match platform");
  }
  return BoundedMinNorm(cfg.A, wrench, 0.0, cfg.fMax);
}

double PwmOfThrust(double f, double fMax) {
  if (!(fMax > 0)) {
    throw std::invalid_argument("fMax must be positive");
  }
  if (f < -1e-12 || f > fMax * (1 + 1e-12)) {
    throw std::invalid_argument("thrust outside [0, fMax]");
  }
  return std::sqrt(std::clamp(f, 0.0, fMax) / fMax);
}

VecXd PwmOfThrusts(const VecXd& f, double fMax) {
  VecXd pwm(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    pwm[i] = PwmOfThrust(f[i], fMax);
  }
  return pwm;
}

double EnergyEstimate(const std::vector<MotorCommand>& samples, double dt) {
  if (samples.empty()) {
    throw std::invalid_argument("energy estimate needs at least one sample");
  }
  if (!(dt > 0)) {
    throw std::invalid_argument("sample interval must be positive");
  }
  double total = 0.0;
  for (const MotorCommand& s : samples) {
    if (s.thrusts.size() != s.pwm.size()) {
      throw std::invalid_argument("thrust/pwm size mismatch");
    }
    total += s.thrusts.dot(s.pwm) * dt;
  }
  return total;
}

}  // namespace susp
