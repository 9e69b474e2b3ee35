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

#include <string>
#include <vector>

#include "susp/types.hpp"

// Thrust allocation for the three rotor layouts. Motors produce thrust in
// [0, fMax] only; the allocator picks the minimum-norm thrust vector that
// realizes a commanded wrench exactly when it is reachable and falls back to
// the closest achievable wrench otherwise.

namespace susp {

enum class PlatformKind { kOmnidirectional, kPlanarThrust, kMinimalActuated };

std::string ToString(PlatformKind kind);
PlatformKind PlatformKindFromString(const std::string& name);

// Rotor geometry of one platform build.
struct PlatformConfig {
  PlatformKind kind = PlatformKind::kOmnidirectional;
  int nMotors = 0;
  MatXd A;          // w x n map from motor thrusts to the exposed wrench
  MatXd Bsel;       // 6 x w embedding of the exposed wrench into a body wrench
  double fMax = 9.0;       // per-motor thrust limit [N]
  double armLength = 0.4;  // rotor arm radius [m]
};

// The three built-in layouts: an 8-rotor omnidirectional assembly exposing
// the full body wrench, a 6-rotor planar-thrust hexacopter and a 4-rotor
// minimally actuated build, both exposing (Fx, Fy, Mz).
PlatformConfig BuiltinPlatform(PlatformKind kind);

// u = A * thrusts.
VecXd WrenchOfThrusts(const PlatformConfig& cfg, const VecXd& thrusts);

struct AllocationResult {
  VecXd thrusts;          // motor thrusts, inside [lo, hi]
  VecXd achieved;         // G * thrusts
  bool saturated = false; // target not reachable inside the box
  double kktResidual = 0; // max KKT violation of the reported solution
  int iterations = 0;
};

// min ||F||^2 subject to G F = target and lo <= F <= hi, solved with a
// primal active-set method. When no F in the box reaches the target, returns
// the box point minimizing ||G F - target||^2 instead and sets `saturated`.
AllocationResult BoundedMinNorm(const MatXd& G, const VecXd& target,
                                double lo, double hi);

AllocationResult AllocateThrusts(const VecXd& wrench,
                                 const PlatformConfig& cfg);

// Normalized motor command for a thrust: pwm = sqrt(f / fMax).
double PwmOfThrust(double f, double fMax);
VecXd PwmOfThrusts(const VecXd& f, double fMax);

struct MotorCommand {
  VecXd thrusts;
  VecXd pwm;
};

// Accumulated actuation-effort proxy: sum over samples of
// (sum_i F_i * pwm_i) * dt.
double EnergyEstimate(const std::vector<MotorCommand>& samples, double dt);

}  // namespace susp
