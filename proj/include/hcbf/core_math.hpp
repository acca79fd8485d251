#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hcbf {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;

using Vec2d = Vec2<double>;
using Mat2d = Mat2<double>;

/// Thrown when a formula is evaluated at a configuration where it is not
/// defined (coincident points, inside the excluded ball, zero barycenter speed).
class DegenerateGeometry : public std::runtime_error {
 public:
  explicit DegenerateGeometry(const std::string& what) : std::runtime_error(what) {}
};

/// Wraps an angle into (-pi, pi]. -pi maps to +pi.
template <typename Scalar>
Scalar wrap_angle(Scalar theta) {
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar two_pi = 2 * pi;
  Scalar w = std::fmod(theta, two_pi);
  if (w > pi) {
    w -= two_pi;
  } else if (w <= -pi) {
    w += two_pi;
  }
  return w;
}

/// Heading angle held in normalized form.
template <typename Scalar>
class AngleT {
 public:
  AngleT() = default;
  explicit AngleT(Scalar radians) : value_(wrap_angle(radians)) {}

  Scalar value() const { return value_; }
  operator Scalar() const { return value_; }

  AngleT operator+(Scalar delta) const { return AngleT(value_ + delta); }
  AngleT operator-(Scalar delta) const { return AngleT(value_ - delta); }
  bool operator==(const AngleT&) const = default;

 private:
  Scalar value_ = 0;
};

using Angle = AngleT<double>;

/// Counterclockwise planar rotation.
template <typename Scalar>
Mat2<Scalar> rot(Scalar theta) {
  const Scalar c = std::cos(theta);
  const Scalar s = std::sin(theta);
  Mat2<Scalar> r;
  r << c, -s, s, c;
  return r;
}

/// Quarter turn, R(pi/2). Exact entries rather than cos(pi/2).
template <typename Scalar = double>
Mat2<Scalar> quarter_turn() {
  Mat2<Scalar> s;
  s << 0, -1, 1, 0;
  return s;
}

/// Unit heading vector (cos psi, sin psi).
template <typename Scalar>
Vec2<Scalar> heading(Scalar psi) {
  return Vec2<Scalar>(std::cos(psi), std::sin(psi));
}

/// Four-quadrant bearing of `to` seen from `from`.
template <typename Scalar>
AngleT<Scalar> bearing(const Vec2<Scalar>& from, const Vec2<Scalar>& to) {
  const Vec2<Scalar> d = to - from;
  if (d.x() == 0 && d.y() == 0) {
    throw DegenerateGeometry("bearing: coincident points");
  }
  return AngleT<Scalar>(std::atan2(d.y(), d.x()));
}

/// Spectral norm of a 2x2 matrix from its closed-form singular values.
///
/// With p = (a+d)/2, q = (a-d)/2, r = (c+b)/2, s = (c-b)/2 the singular values
/// are hypot(p, s) + hypot(q, r) and |hypot(p, s) - hypot(q, r)|.
template <typename Derived>
typename Derived::Scalar norm2(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Scalar p = (m(0, 0) + m(1, 1)) / 2;
  const Scalar q = (m(0, 0) - m(1, 1)) / 2;
  const Scalar r = (m(1, 0) + m(0, 1)) / 2;
  const Scalar s = (m(1, 0) - m(0, 1)) / 2;
  return std::hypot(p, s) + std::hypot(q, r);
}

}  // namespace hcbf
