#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "chainlab/potential.hpp"

namespace testsupport {

// Perturbed unit-spacing zigzag: admissible, generic, and bounded away from collisions.
inline chainlab::Positions random_configuration(int n, std::mt19937_64& rng, double jitter = 0.25) {
  std::uniform_real_distribution<double> u(-jitter, jitter);
  chainlab::Positions q(2 * n);
  for (int j = 0; j < n; ++j) {
    q[2 * j] = 1.1 * j + u(rng);
    q[2 * j + 1] = 0.3 * std::sin(1.7 * j) + u(rng);
  }
  return q;
}

inline chainlab::ForceFieldParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(0.0, 1.0), b(0.5, 100.0);
  return {a(rng), b(rng), 0.0};
}

inline Eigen::VectorXd fd_gradient(const chainlab::ChainModel& m, const chainlab::Positions& q,
                                   double h = 1e-6) {
  Eigen::VectorXd g(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    chainlab::Positions p = q, r = q;
    p[i] += h;
    r[i] -= h;
    g[i] = (chainlab::total_energy(m, p) - chainlab::total_energy(m, r)) / (2 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_hessian(const chainlab::ChainModel& m, const chainlab::Positions& q,
                                  double h = 1e-6) {
  Eigen::MatrixXd H(q.size(), q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    chainlab::Positions p = q, r = q;
    p[i] += h;
    r[i] -= h;
    H.col(i) = (chainlab::gradient(m, p) - chainlab::gradient(m, r)) / (2 * h);
  }
  return H;
}

// Relative error measured against the largest entry of the reference.
template <class A, class B>
double rel_error(const A& got, const B& ref) {
  const double scale = std::max(1e-300, ref.cwiseAbs().maxCoeff());
  return (got - ref).cwiseAbs().maxCoeff() / scale;
}

inline chainlab::Positions translation(int n, int axis) {
  chainlab::Positions t = chainlab::Positions::Zero(2 * n);
  for (int j = 0; j < n; ++j) t[2 * j + axis] = 1.0;
  return t;
}

}  // namespace testsupport
