#pragma once
/**
 * symmetry.hpp - spatial symmetries of an equilibrium and their fixed-point
 * subspaces.
 *
 * A symmetry is a signed permutation g = (pi, Q), Q in O(2), acting on
 * flattened positions by (g u)_j = Q u_{pi(j)}. It is a symmetry of the
 * equilibrium a when g a = a and pi preserves the bond graph, so that
 * V(g u) = V(u) and g commutes with the flow.
 */

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chainlab/errors.hpp"
#include "chainlab/potential.hpp"
#include "chainlab/spectra.hpp"

namespace chainlab {

struct SpatialSymmetry {
  std::vector<int> perm;  // 0-based
  Eigen::Matrix2d Q = Eigen::Matrix2d::Identity();

  int size() const { return static_cast<int>(perm.size()); }
  bool orientation_reversing() const { return Q.determinant() < 0.0; }
  bool is_identity() const {
    for (int j = 0; j < size(); ++j)
      if (perm[j] != j) return false;
    return (Q - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
    Eigen::VectorXd out(u.size());
    for (int j = 0; j < size(); ++j)
      out.segment<2>(2 * j) = Q * u.segment<2>(2 * perm[j]);
    return out;
  }

  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2 * size(), 2 * size());
    for (int j = 0; j < size(); ++j) g.block<2, 2>(2 * j, 2 * perm[j]) = Q;
    return g;
  }

  // (this o other) u = this(other(u))
  SpatialSymmetry compose(const SpatialSymmetry& other) const {
    SpatialSymmetry out;
    out.perm.resize(perm.size());
    for (int j = 0; j < size(); ++j) out.perm[j] = other.perm[perm[j]];
    out.Q = Q * other.Q;
    return out;
  }

  std::string describe() const {
    const double ang = std::atan2(Q(1, 0), Q(0, 0)) * 180.0 / M_PI;
    std::string s = orientation_reversing() ? "reflection" : "rotation";
    s += " Q-angle " + std::to_string(static_cast<long long>(std::lround(ang))) + " perm [";
    for (int j = 0; j < size(); ++j) s += (j ? " " : "") + std::to_string(perm[j] + 1);
    return s + "]";
  }
};

inline Eigen::Matrix2d rotation2(double theta) {
  Eigen::Matrix2d r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

inline const Eigen::Matrix2d& reflection_R() {
  static const Eigen::Matrix2d r = (Eigen::Matrix2d() << 1, 0, 0, -1).finished();
  return r;
}

/**
 * Symmetry group of a centred configuration. Candidates are Q = rot(m pi/n)
 * and rot(m pi/n) R for m = 0..2n-1, which covers the dihedral group of the
 * regular n-gon and the Klein group of a centred collinear chain. The
 * identity comes first.
 */
inline std::vector<SpatialSymmetry> equilibrium_symmetries(const ChainModel& m, PositionsView q,
                                                           double tol = 1e-8) {
  const int n = m.n();
  detail::require_size(m, q);
  double scale = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) scale = std::max(scale, std::abs(q[i]));
  const double eps = tol * std::max(1.0, scale);

  std::vector<SpatialSymmetry> group;
  for (int reflect = 0; reflect < 2; ++reflect)
    for (int k = 0; k < 2 * n; ++k) {
      SpatialSymmetry g;
      g.Q = rotation2(M_PI * k / n);
      if (k == 0) g.Q = Eigen::Matrix2d::Identity();
      if (k == n) g.Q = -Eigen::Matrix2d::Identity();
      if (reflect) g.Q = g.Q * reflection_R();
      g.perm.assign(n, -1);
      // Q a_{pi(j)} = a_j  <=>  a_{pi(j)} = Q^T a_j
      bool ok = true;
      std::vector<bool> used(n, false);
      for (int j = 0; j < n && ok; ++j) {
        const Eigen::Vector2d target = g.Q.transpose() * q.segment<2>(2 * j);
        int hit = -1;
        for (int i = 0; i < n; ++i)
          if (!used[i] && (q.segment<2>(2 * i) - target).cwiseAbs().maxCoeff() <= eps) {
            hit = i;
            break;
          }
        if (hit < 0) ok = false;
        else {
          g.perm[j] = hit;
          used[hit] = true;
        }
      }
      for (int i = 0; i < n && ok; ++i)
        for (int j = i + 1; j < n && ok; ++j)
          ok = m.bonded(i, j) == m.bonded(g.perm[i], g.perm[j]);
      if (!ok) continue;
      const bool dup = std::any_of(group.begin(), group.end(), [&](const SpatialSymmetry& h) {
        return h.perm == g.perm && (h.Q - g.Q).cwiseAbs().maxCoeff() < 1e-12;
      });
      if (!dup) group.push_back(g);
    }
  return group;
}

inline std::vector<SpatialSymmetry> equilibrium_symmetries(const ChainModel& m,
                                                           const Configuration& c,
                                                           double tol = 1e-8) {
  return equilibrium_symmetries(m, c.positions(), tol);
}

// Elements of the group with g e = sign * e.
inline std::vector<SpatialSymmetry> isotropy(const std::vector<SpatialSymmetry>& group,
                                             const Eigen::VectorXd& e, double sign = 1.0,
                                             double tol = 1e-7) {
  std::vector<SpatialSymmetry> out;
  for (const auto& g : group)
    if ((g.apply(e) - sign * e).norm() <= tol * std::max(1.0, e.norm())) out.push_back(g);
  return out;
}

// Orthogonal projector onto Fix(K) = average of the group elements (K must be a group).
inline Eigen::MatrixXd fixed_point_projector(const std::vector<SpatialSymmetry>& subgroup, int dof) {
  if (subgroup.empty()) return Eigen::MatrixXd::Identity(dof, dof);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dof, dof);
  for (const auto& g : subgroup) p += g.matrix();
  return p / static_cast<double>(subgroup.size());
}

/**
 * Orthonormal basis of Fix(K) with the kernel directions Z (columns,
 * orthonormal) removed. Z must be invariant under K, which holds for the
 * translation/rotation kernel at a K-symmetric configuration.
 */
inline Eigen::MatrixXd fixed_point_basis(const std::vector<SpatialSymmetry>& subgroup, int dof,
                                         const Eigen::MatrixXd& Z) {
  Eigen::MatrixXd P = fixed_point_projector(subgroup, dof);
  if (Z.cols() > 0) {
    const Eigen::MatrixXd c = Eigen::MatrixXd::Identity(dof, dof) - Z * Z.transpose();
    P = c * P * c;
  }
  const Eigen::MatrixXd sym = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  std::vector<int> cols;
  for (int i = dof - 1; i >= 0; --i)
    if (es.eigenvalues()[i] > 0.5) cols.push_back(i);
  Eigen::MatrixXd B(dof, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    Eigen::VectorXd v = es.eigenvectors().col(cols[c]);
    // deterministic orientation: largest component positive
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0) v = -v;
    B.col(static_cast<Eigen::Index>(c)) = v;
  }
  return B;
}

}  // namespace chainlab
