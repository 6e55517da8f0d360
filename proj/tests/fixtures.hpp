#pragma once

#include <stickybm/model.hpp>

namespace stickybm::testing {

inline ModelSpec make_spec(const Matrix& sigma, const Vector& mu, const Matrix& refl,
                           const Vector& u) {
  ModelSpec s;
  s.d = static_cast<int>(mu.size());
  s.sigma = sigma;
  s.mu = mu;
  s.refl = refl;
  s.stickiness = u;
  return s;
}

inline Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

inline Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

inline Vector vec1(double a) { return Vector::Constant(1, a); }

// sigma^2 = 1, mu = -1, R = 1, u = 1
inline ModelSpec m1(double u = 1.0) {
  return make_spec(Matrix::Identity(1, 1), vec1(-1.0), Matrix::Identity(1, 1), vec1(u));
}

// identity covariance and reflection, mu = (-1, -1)
inline ModelSpec m2(double u = 1.0) {
  return make_spec(Matrix::Identity(2, 2), vec2(-1.0, -1.0), Matrix::Identity(2, 2),
                   vec2(u, u));
}

// correlated, non-symmetric M-matrix reflection
inline ModelSpec m3(double u = 1.0) {
  return make_spec(mat2(1.0, 0.5, 0.5, 1.0), vec2(-1.0, -2.0), mat2(1.0, 0.0, -0.3, 1.0),
                   vec2(u, u));
}

// skew symmetric with a non-symmetric R (rho = 0.25)
inline ModelSpec skew(double u = 1.0) {
  return make_spec(mat2(1.0, 0.25, 0.25, 1.0), vec2(-1.0, -1.0), mat2(1.0, 0.5, 0.0, 1.0),
                   vec2(u, u));
}

}  // namespace stickybm::testing
