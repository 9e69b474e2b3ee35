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

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace susp {

template <typename Scalar> using Vec2T = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar> using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Vec5T = Eigen::Matrix<Scalar, 5, 1>;
template <typename Scalar> using Vec6T = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar> using Vec10T = Eigen::Matrix<Scalar, 10, 1>;
template <typename Scalar> using Mat2T = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar> using Mat3T = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar> using Mat5T = Eigen::Matrix<Scalar, 5, 5>;
template <typename Scalar> using Mat10T = Eigen::Matrix<Scalar, 10, 10>;
template <typename Scalar> using Mat35T = Eigen::Matrix<Scalar, 3, 5>;
template <typename Scalar> using Mat65T = Eigen::Matrix<Scalar, 6, 5>;

using Vec2 = Vec2T<double>;
using Vec3 = Vec3T<double>;
using Vec5 = Vec5T<double>;
using Vec6 = Vec6T<double>;
using Vec10 = Vec10T<double>;
using Mat2 = Mat2T<double>;
using Mat3 = Mat3T<double>;
using Mat5 = Mat5T<double>;
using Mat10 = Mat10T<double>;
using Mat35 = Mat35T<double>;
using Mat65 = Mat65T<double>;
using VecXd = Eigen::VectorXd;
using MatXd = Eigen::MatrixXd;

// Thrown when a numerical routine cannot produce a trustworthy result
// (ill-conditioned mass matrix, divergent Riccati iteration, singular
// actuation resolve, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown for malformed or inconsistent scenario descriptions.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when files cannot be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Physical description of the cable-suspended platform: a spherical double
// pendulum with massless links, a lumped mass at the elbow joint and the
// platform rigid body at the end of the second link.
template <typename Scalar>
struct PendulumParamsT {
  Scalar L1 = Scalar(0.75);  // anchor-to-elbow link length [m]
  Scalar L2 = Scalar(0.75);  // elbow-to-platform link length [m]
  Scalar m1 = Scalar(0.2);   // lumped elbow mass [kg]
  Scalar m2 = Scalar(4.06);  // platform mass [kg]
  // Platform principal moments of inertia about its COM, axes aligned with
  // the platform frame [kg m^2].
  Vec3T<Scalar> inertia{Scalar(0.0646), Scalar(0.0646), Scalar(0.0682)};
  Scalar armLength = Scalar(0.4);  // rotor arm radius [m]
  Scalar gravity = Scalar(9.81);   // gravitational acceleration [m/s^2]

  bool valid() const {
    return L1 > Scalar(0) && L2 > Scalar(0) && m1 > Scalar(0) &&
           m2 > Scalar(0) && inertia.minCoeff() > Scalar(0) &&
           armLength > Scalar(0) && gravity > Scalar(0);
  }
};

using PendulumParams = PendulumParamsT<double>;

// Joint-space configuration and rates. Joints 0..2 rotate the first link
// about its x, y and z axes; joints 3..4 rotate the second link about its
// x and y axes relative to the first.
template <typename Scalar>
struct JointStateT {
  Vec5T<Scalar> q = Vec5T<Scalar>::Zero();
  Vec5T<Scalar> qd = Vec5T<Scalar>::Zero();

  static JointStateT FromVector(const Vec10T<Scalar>& x) {
    JointStateT s;
    s.q = x.template head<5>();
    s.qd = x.template tail<5>();
    return s;
  }

  Vec10T<Scalar> ToVector() const {
    Vec10T<Scalar> x;
    x << q, qd;
    return x;
  }
};

using JointState = JointStateT<double>;

// Force and moment expressed in the platform body frame.
template <typename Scalar>
struct BodyWrenchT {
  Vec3T<Scalar> f = Vec3T<Scalar>::Zero();
  Vec3T<Scalar> m = Vec3T<Scalar>::Zero();

  static BodyWrenchT Zero() { return BodyWrenchT{}; }

  static BodyWrenchT FromVector(const Vec6T<Scalar>& u) {
    BodyWrenchT w;
    w.f = u.template head<3>();
    w.m = u.template tail<3>();
    return w;
  }

  Vec6T<Scalar> ToVector() const {
    Vec6T<Scalar> u;
    u << f, m;
    return u;
  }
};

using BodyWrench = BodyWrenchT<double>;

// World pose and velocity of the platform body.
template <typename Scalar>
struct BasePoseT {
  Vec3T<Scalar> p = Vec3T<Scalar>::Zero();      // COM position, world frame
  Mat3T<Scalar> R = Mat3T<Scalar>::Identity();  // world_R_body
  Vec3T<Scalar> v = Vec3T<Scalar>::Zero();      // COM velocity, world frame
  Vec3T<Scalar> omega = Vec3T<Scalar>::Zero();  // angular velocity, body frame
  Vec3T<Scalar> euler = Vec3T<Scalar>::Zero();  // ZYX angles (roll,pitch,yaw)
};

using BasePose = BasePoseT<double>;

}  // namespace susp
