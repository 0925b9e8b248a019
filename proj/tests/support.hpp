#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "pseudosimple/quaternion.hpp"

// Seeded generators for property tests.
namespace gen {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(eng_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(eng_); }
  double normal() { return nd_(eng_); }

  ps::Vec4 vec4(double scale = 1.0) { return {scale * normal(), scale * normal(), scale * normal(), scale * normal()}; }
  ps::Vec4 unit4() { return vec4().normalized(); }

  ps::Quaternion quaternion() { return {normal(), normal(), normal(), normal()}; }
  ps::Quaternion unit_quaternion() { return quaternion().normalized(); }

  /// Unit 3-vector as a pure quaternion.
  ps::Quaternion pure_unit() {
    ps::Vec4 v(0.0, normal(), normal(), normal());
    v.normalize();
    return ps::Quaternion::from_vector(v);
  }

  ps::Rotation4 rotation() { return {unit_quaternion(), unit_quaternion()}; }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> nd_{0.0, 1.0};
};

}  // namespace gen
