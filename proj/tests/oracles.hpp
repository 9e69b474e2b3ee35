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

// Reference computations the tests check the library against. Everything in
// this header is derived independently of the library implementation: planar
// closed forms come from a hand-worked Lagrangian, derivative oracles from
// high-order finite differences, and the allocation oracle from exhaustive
// active-set enumeration.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "susp/types.hpp"

namespace oracle {

using susp::MatXd;
using susp::VecXd;

// ---------------------------------------------------------------------------
// Planar double pendulum, hand-derived Lagrangian.
//
// Absolute link-1 angle a1 from the vertical, relative link-2 angle a2,
// point mass mA at distance L1, point mass mB at the end, and a rotational
// inertia Iaxis spinning with the second link (angle a1 + a2):
//
//   T = 1/2 (mA+mB) L1^2 a1d^2 + 1/2 mB L2^2 (a1d+a2d)^2
//       + mB L1 L2 cos(a2) a1d (a1d+a2d) + 1/2 Iaxis (a1d+a2d)^2
//   V = -(mA+mB) g L1 cos(a1) - mB g L2 cos(a1+a2)
//
// give, with h = mB L1 L2:
//
//   M = [ (mA+mB)L1^2 + mB L2^2 + 2h c2 + Iaxis,  mB L2^2 + h c2 + Iaxis ]
//       [ mB L2^2 + h c2 + Iaxis,                 mB L2^2 + Iaxis        ]
//   C = [ -h s2 a2d,  -h s2 (a1d+a2d) ]
//       [  h s2 a1d,   0              ]
//   g = [ (mA+mB) g L1 s1 + mB g L2 s12 ]
//       [  mB g L2 s12                  ]
//
// The C above is the Christoffel form of this M (worked symbol by symbol),
// so it is directly comparable to a Christoffel-based implementation.
// ---------------------------------------------------------------------------

struct PlanarPendulum {
  double L1, L2, mA, mB, Iaxis, g;
};

inline Eigen::Matrix2d PlanarMass(const PlanarPendulum& p, double a2) {
  const double h = p.mB * p.L1 * p.L2;
  const double c2 = std::cos(a2);
  Eigen::Matrix2d M;
  M(0, 0) = (p.mA + p.mB) * p.L1 * p.L1 + p.mB * p.L2 * p.L2 + 2 * h * c2 +
            p.Iaxis;
  M(0, 1) = p.mB * p.L2 * p.L2 + h * c2 + p.Iaxis;
  M(1, 0) = M(0, 1);
  M(1, 1) = p.mB * p.L2 * p.L2 + p.Iaxis;
  return M;
}

inline Eigen::Matrix2d PlanarCoriolis(const PlanarPendulum& p, double a2,
                                      double a1d, double a2d) {
  const double h = p.mB * p.L1 * p.L2;
  const double s2 = std::sin(a2);
  Eigen::Matrix2d C;
  C(0, 0) = -h * s2 * a2d;
  C(0, 1) = -h * s2 * (a1d + a2d);
  C(1, 0) = h * s2 * a1d;
  C(1, 1) = 0.0;
  return C;
}

inline Eigen::Vector2d PlanarGravity(const PlanarPendulum& p, double a1,
                                     double a2) {
  Eigen::Vector2d g;
  g[0] = (p.mA + p.mB) * p.g * p.L1 * std::sin(a1) +
         p.mB * p.g * p.L2 * std::sin(a1 + a2);
  g[1] = p.mB * p.g * p.L2 * std::sin(a1 + a2);
  return g;
}

// ---------------------------------------------------------------------------
// Finite-difference oracles.
// ---------------------------------------------------------------------------

// Fourth-order central difference of a scalar-to-anything map along one
// coordinate: (8(f(h) - f(-h)) - (f(2h) - f(-2h))) / (12h).
template <typename F>
auto CentralDiff4(const F& f, double h) -> decltype(f(0.0)) {
  return (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h);
}

// Plain second-order central difference.
template <typename F>
auto CentralDiff2(const F& f, double h) -> decltype(f(0.0)) {
  return (f(h) - f(-h)) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// Exhaustive bounded min-norm oracle.
//
// Enumerates every assignment of each variable to {lower, upper, free}
// (3^n cases, n <= 8), solves the free-variable subsystem and keeps KKT-
// feasible candidates. By convexity, the best candidate is the global
// optimum of:  min ||x||^2 s.t. G x = b, lo <= x <= hi.
// Returns false if no bounded point reaches b (problem infeasible).
// ---------------------------------------------------------------------------

inline bool EnumerateBoundedMinNorm(const MatXd& G, const VecXd& b, double lo,
                                    double hi, VecXd& best) {
  const int n = static_cast<int>(G.cols());
  double bestNorm = std::numeric_limits<double>::infinity();
  bool found = false;
  std::vector<int> assign(n, 0);

  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;

  for (int code = 0; code < total; ++code) {
    int c = code;
    for (int i = 0; i < n; ++i) {
      assign[i] = c % 3;  // 0 = lower, 1 = upper, 2 = free
      c /= 3;
    }
    std::vector<int> freeIdx;
    VecXd x = VecXd::Zero(n);
    VecXd rhs = b;
    for (int i = 0; i < n; ++i) {
      if (assign[i] == 0) {
        x[i] = lo;
      } else if (assign[i] == 1) {
        x[i] = hi;
      } else {
        freeIdx.push_back(i);
        continue;
      }
      rhs -= G.col(i) * x[i];
    }
    MatXd Gf(G.rows(), static_cast<Eigen::Index>(freeIdx.size()));
    for (size_t k = 0; k < freeIdx.size(); ++k) {
      Gf.col(static_cast<Eigen::Index>(k)) = G.col(freeIdx[k]);
    }
    VecXd xf;
    if (!freeIdx.empty()) {
      Eigen::CompleteOrthogonalDecomposition<MatXd> cod(Gf);
      xf = cod.solve(rhs);
    } else {
      xf = VecXd::Zero(0);
    }
    if ((Gf * xf - rhs).cwiseAbs().maxCoeff() >
        1e-8 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
      continue;  // this active set cannot satisfy the equality
    }
    bool inBox = true;
    for (Eigen::Index k = 0; k < xf.size(); ++k) {
      if (xf[k] < lo - 1e-10 || xf[k] > hi + 1e-10) {
        inBox = false;
        break;
      }
    }
    if (!inBox) continue;
    for (size_t k = 0; k < freeIdx.size(); ++k) {
      x[freeIdx[k]] = std::clamp(xf[static_cast<Eigen::Index>(k)], lo, hi);
    }
    const double nrm = x.squaredNorm();
    if (nrm < bestNorm - 1e-14) {
      bestNorm = nrm;
      best = x;
      found = true;
    }
  }
  return found;
}

// Exhaustive oracle for the infeasible fallback, min ||Gx - b||^2 over the
// box: every KKT point of this convex problem is a global optimum, so the
// first enumerated active set whose least-squares solution passes the bound
// and gradient-sign checks gives the optimal objective value.
inline double EnumerateBoundedLsqObjective(const MatXd& G, const VecXd& b,
                                           double lo, double hi) {
  const int n = static_cast<int>(G.cols());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> assign(n, 0);
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;

  for (int code = 0; code < total; ++code) {
    int c = code;
    for (int i = 0; i < n; ++i) {
      assign[i] = c % 3;
      c /= 3;
    }
    std::vector<int> freeIdx;
    VecXd x = VecXd::Zero(n);
    VecXd rhs = b;
    for (int i = 0; i < n; ++i) {
      if (assign[i] == 0) {
        x[i] = lo;
      } else if (assign[i] == 1) {
        x[i] = hi;
      } else {
        freeIdx.push_back(i);
        continue;
      }
      rhs -= G.col(i) * x[i];
    }
    MatXd Gf(G.rows(), static_cast<Eigen::Index>(freeIdx.size()));
    for (size_t k = 0; k < freeIdx.size(); ++k) {
      Gf.col(static_cast<Eigen::Index>(k)) = G.col(freeIdx[k]);
    }
    bool ok = true;
    if (!freeIdx.empty()) {
      Eigen::CompleteOrthogonalDecomposition<MatXd> cod(Gf);
      const VecXd xf = cod.solve(rhs);
      for (Eigen::Index k = 0; k < xf.size(); ++k) {
        if (xf[k] < lo - 1e-10 || xf[k] > hi + 1e-10) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      for (size_t k = 0; k < freeIdx.size(); ++k) {
        x[freeIdx[k]] = std::clamp(xf[static_cast<Eigen::Index>(k)], lo, hi);
      }
    }
    const VecXd grad = G.transpose() * (G * x - b);
    const double tol = 1e-8 * std::max(1.0, b.cwiseAbs().maxCoeff());
    for (int j = 0; j < n && ok; ++j) {
      if (assign[j] == 0) {
        ok = grad[j] >= -tol;
      } else if (assign[j] == 1) {
        ok = grad[j] <= tol;
      }
    }
    if (!ok) continue;
    best = std::min(best, (G * x - b).squaredNorm());
  }
  return best;
}

// ---------------------------------------------------------------------------
// Deterministic random sampling.
// ---------------------------------------------------------------------------

class Sampler {
 public:
  explicit Sampler(unsigned seed) : gen_(seed) {}

  double Uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(gen_);
  }

  template <int N>
  Eigen::Matrix<double, N, 1> UniformVec(double lo, double hi) {
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v[i] = Uniform(lo, hi);
    return v;
  }

  VecXd UniformVecX(int n, double lo, double hi) {
    VecXd v(n);
    for (int i = 0; i < n; ++i) v[i] = Uniform(lo, hi);
    return v;
  }

 private:
  std::mt19937 gen_;
};

}  // namespace oracle
