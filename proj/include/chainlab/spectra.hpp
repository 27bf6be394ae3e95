#pragma once
/**
 * spectra.hpp - Hessian spectra at symmetric equilibria.
 *
 * Collinear chain: the x- and y-blocks of the Hessian decouple into two
 * real symmetric n x n matrices M0 (longitudinal) and M1 (transverse).
 *
 * Ring: the Fourier-type transform block-diagonalises the Hessian into
 * 2x2 Hermitian blocks M_k = alpha_k I + beta_k R - gamma_k (iJ),
 * k = 1..n, with eigenvalues alpha_k +/- sqrt(beta_k^2 + gamma_k^2).
 * Blocks k and n-k share their eigenvalues.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chainlab/equilibria.hpp"
#include "chainlab/errors.hpp"
#include "chainlab/parallel.hpp"
#include "chainlab/potential.hpp"

namespace chainlab {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns, orthonormal
};

inline SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    throw ConvergenceError("symmetric eigensolver failed", Eigen::VectorXd(), NAN, 0);
  return {es.eigenvalues(), es.eigenvectors()};
}

/**
 * Orthonormal basis (columns) of the symmetry kernel at q: the x and y
 * translations and the infinitesimal rotation J (u_j - centre). The rotation
 * column is dropped when it degenerates (all particles at the centre).
 */
inline Eigen::MatrixXd symmetry_kernel(PositionsView q) {
  const Eigen::Index n = q.size() / 2;
  double cx = 0.0, cy = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cx += q[2 * j];
    cy += q[2 * j + 1];
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);

  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(q.size(), 3);
  for (Eigen::Index j = 0; j < n; ++j) {
    z(2 * j, 0) = 1.0;
    z(2 * j + 1, 1) = 1.0;
    z(2 * j, 2) = -(q[2 * j + 1] - cy);
    z(2 * j + 1, 2) = q[2 * j] - cx;
  }
  z.col(0).normalize();
  z.col(1).normalize();
  const double rn = z.col(2).norm();
  if (rn < 1e-12) return z.leftCols(2);
  z.col(2) /= rn;
  return z;
}

// ---------------------------------------------------------------------------
// Collinear blocks
// ---------------------------------------------------------------------------

struct CollinearBlocks {
  Eigen::MatrixXd M0;  // longitudinal (x) block
  Eigen::MatrixXd M1;  // transverse (y) block
};

/**
 * Entries for i != j, with d = a_j - a_i and f = [delta_ij U + W]:
 *   -a_ij = 2 f'(d^2) + 4 d^2 f''(d^2),   -b_ij = 2 f'(d^2);
 * diagonals from the row sums a_ii = -sum a_ij, b_ii = -sum b_ij.
 */
inline CollinearBlocks collinear_blocks(const ChainModel& m, const std::vector<double>& x) {
  const int n = m.n();
  if (static_cast<int>(x.size()) != n) throw UsageError("collinear_blocks: size mismatch");
  CollinearBlocks b{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = x[j] - x[i];
      const double d2 = detail::checked_sq_distance(d * d, i, j);
      const PairTerms f = pair_potential(d2, m.bonded(i, j), m.params());
      b.M0(i, j) = b.M0(j, i) = -(2.0 * f.d1 + 4.0 * d2 * f.d2);
      b.M1(i, j) = b.M1(j, i) = -(2.0 * f.d1);
    }
  for (int i = 0; i < n; ++i) {
    double s0 = 0.0, s1 = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) {
        s0 -= b.M0(i, j);
        s1 -= b.M1(i, j);
      }
    b.M0(i, i) = s0;
    b.M1(i, i) = s1;
  }
  return b;
}

inline CollinearBlocks collinear_blocks(const CollinearEquilibrium& eq, const ChainModel& m) {
  return collinear_blocks(m, eq.coordinates());
}

// ---------------------------------------------------------------------------
// Ring blocks
// ---------------------------------------------------------------------------

struct RingBlock {
  int k = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;
};

struct RingBlockCoefficients {
  int n = 0;
  double radius = 0.0;
  std::vector<RingBlock> blocks;  // k = 1..n in order

  const RingBlock& block(int k) const { return blocks.at(static_cast<std::size_t>(k - 1)); }
};

/**
 * Coefficients of M_k for the n-gon of radius a. With s_j the chord factor,
 * f = [delta_j U + W] evaluated at a^2 s_j^2 and delta_j = 1 for j in {1, n-1}:
 *   b_j = 2 f',  c_j = 2 a^2 s_j^2 f'',
 *   alpha_k = sum (b_j + c_j)(1 - cos(kj zeta) cos(j zeta)),
 *   beta_k  = sum c_j (cos(kj zeta) - cos(j zeta)),
 *   gamma_k = sum (b_j + c_j) sin(kj zeta) sin(j zeta).
 */
inline RingBlockCoefficients ring_coefficients(const ChainModel& m, double radius) {
  if (!m.periodic()) throw UsageError("ring_coefficients needs a periodic chain");
  if (!(radius > 0.0)) throw DomainError("ring radius must be positive");
  const int n = m.n();
  std::vector<double> bj(n), cj(n);
  for (int j = 1; j < n; ++j) {
    const double s2 = std::pow(chord_factor(n, j), 2);
    const bool bonded = j == 1 || j == n - 1;
    const PairTerms f = pair_potential(radius * radius * s2, bonded, m.params());
    bj[j] = 2.0 * f.d1;
    cj[j] = 2.0 * radius * radius * s2 * f.d2;
  }
  RingBlockCoefficients out;
  out.n = n;
  out.radius = radius;
  for (int k = 1; k <= n; ++k) {
    RingBlock blk;
    blk.k = k;
    for (int j = 1; j < n; ++j) {
      const double ckj = detail::cos_turn(static_cast<long long>(k) * j, n);
      const double skj = detail::sin_turn(static_cast<long long>(k) * j, n);
      const double cj1 = detail::cos_turn(j, n);
      const double sj1 = detail::sin_turn(j, n);
      blk.alpha += (bj[j] + cj[j]) * (1.0 - ckj * cj1);
      blk.beta += cj[j] * (ckj - cj1);
      blk.gamma += (bj[j] + cj[j]) * skj * sj1;
    }
    const double r = std::hypot(blk.beta, blk.gamma);
    blk.lambda_plus = blk.alpha + r;
    blk.lambda_minus = blk.alpha - r;
    out.blocks.push_back(blk);
  }
  return out;
}

inline RingBlockCoefficients ring_coefficients(const CircularEquilibrium& eq,
                                               const ChainModel& m) {
  return ring_coefficients(m, eq.radius);
}

// ---------------------------------------------------------------------------
// Resonance
// ---------------------------------------------------------------------------

/**
 * Smallest l in [2, l_max] with |l^2 nu_sq - lambda| <= tol for some lambda
 * in the spectrum. l_max <= 0 picks the first l with l^2 nu_sq above the
 * largest eigenvalue (plus tol).
 */
inline std::optional<int> resonance_order(double nu_sq, const std::vector<double>& spectrum,
                                          int l_max = 0, double tol = 1e-8) {
  if (!(nu_sq > 0.0)) throw DomainError("resonance test needs nu^2 > 0");
  if (spectrum.empty()) return std::nullopt;
  const double top = *std::max_element(spectrum.begin(), spectrum.end());
  if (l_max <= 0) {
    l_max = 2;
    while (static_cast<double>(l_max) * l_max * nu_sq <= top + tol) ++l_max;
  }
  for (int l = 2; l <= l_max; ++l) {
    const double target = static_cast<double>(l) * l * nu_sq;
    for (double lam : spectrum)
      if (std::abs(target - lam) <= tol) return l;
  }
  return std::nullopt;
}

inline bool is_nonresonant(double nu_sq, const std::vector<double>& spectrum, int l_max = 0,
                           double tol = 1e-8) {
  return !resonance_order(nu_sq, spectrum, l_max, tol).has_value();
}

// ---------------------------------------------------------------------------
// Full spectrum
// ---------------------------------------------------------------------------

enum class EigenSign { Negative, Zero, Positive };

inline const char* to_string(EigenSign s) {
  switch (s) {
    case EigenSign::Negative: return "negative";
    case EigenSign::Zero: return "zero";
    default: return "positive";
  }
}

enum class EquilibriumKind { Generic, Collinear, Ring };

inline const char* to_string(EquilibriumKind k) {
  switch (k) {
    case EquilibriumKind::Collinear: return "collinear";
    case EquilibriumKind::Ring: return "ring";
    default: return "generic";
  }
}

struct SpectralEntry {
  double value = 0.0;
  EigenSign sign = EigenSign::Positive;
  std::string block;     // "M0", "M1", "M3+", ... or "" when unlabelled
  int block_index = -1;  // 0/1 for collinear, k in 1..n for ring
  bool symmetry_zero = false;
  double kernel_residual = 1.0;  // |v - P_kernel v| for the unit eigenvector
};

struct BifurcationCandidate {
  double lambda = 0.0;
  double nu = 0.0;
  int block_index = -1;  // collinear 0/1; ring min(k, n-k) or n
  std::string block;
  int multiplicity = 1;
  bool nonresonant = true;
  int resonant_l = 0;
  std::vector<int> indices;  // positions in SpectralReport::entries
};

struct SpectralReport {
  EquilibriumKind kind = EquilibriumKind::Generic;
  std::vector<SpectralEntry> entries;  // ascending eigenvalues
  Eigen::MatrixXd eigenvectors;        // column i belongs to entries[i]
  int negative_count = 0;
  int zero_count = 0;
  int positive_count = 0;
  double hessian_norm = 0.0;
  double block_mismatch = 0.0;  // max |block eigenvalue - dense eigenvalue|
  std::vector<BifurcationCandidate> candidates;

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(entries.size());
    for (const auto& e : entries) v.push_back(e.value);
    return v;
  }
};

struct SpectrumOptions {
  double kernel_tol = 1e-6;      // eigenvector residual off the symmetry kernel
  double sign_tol = 1e-10;       // relative to ||H|| for non-kernel eigenvalues
  double match_tol = 1e-8;       // relative block/dense agreement
  double resonance_tol = 1e-8;   // relative to ||H||
  double cluster_tol = 1e-7;     // relative; eigenvalues merged into one candidate
};

namespace detail {

struct BlockValue {
  double value;
  std::string label;
  int index;
};

inline std::optional<std::vector<double>> collinear_axis(PositionsView q) {
  const Eigen::Index n = q.size() / 2;
  double scale = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j) scale = std::max(scale, std::abs(q[j]));
  std::vector<double> x(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::abs(q[2 * j + 1]) > 1e-12 * std::max(1.0, scale)) return std::nullopt;
    x[static_cast<std::size_t>(j)] = q[2 * j];
  }
  return x;
}

inline std::optional<double> ring_radius_of(PositionsView q) {
  const int n = static_cast<int>(q.size() / 2);
  const double a = std::hypot(q[2 * (n - 1)], q[2 * (n - 1) + 1]);
  if (!(a > 0.0)) return std::nullopt;
  const Positions ref = ring_positions(n, a);
  if ((ref - q).lpNorm<Eigen::Infinity>() > 1e-9 * std::max(1.0, a)) return std::nullopt;
  return a;
}

}  // namespace detail

/**
 * Dense eigen-decomposition of the Hessian at an equilibrium.
 *
 * An eigenvalue counts as zero when its eigenvector lies in the symmetry
 * kernel (translations, rotation) to within kernel_tol, or when its
 * magnitude is below sign_tol * ||H||; everything else is classified by sign.
 * Collinear (all y = 0) and regular-polygon configurations additionally get
 * block labels by pairing the sorted dense and block spectra.
 */
inline SpectralReport full_spectrum(const ChainModel& m, const Configuration& c,
                                    const SpectrumOptions& opt = {}) {
  const Positions& q = c.positions();
  const Eigen::MatrixXd H = hessian(m, q);
  const SymmetricEigen eig = symmetric_eigen(H);
  const Eigen::MatrixXd Z = symmetry_kernel(q);
  const int dof = m.dof();
  const int n = m.n();

  SpectralReport rep;
  rep.eigenvectors = eig.vectors;
  rep.hessian_norm = std::max(std::abs(eig.values[0]), std::abs(eig.values[dof - 1]));
  const double hn = std::max(rep.hessian_norm, 1e-300);

  for (int i = 0; i < dof; ++i) {
    SpectralEntry e;
    e.value = eig.values[i];
    const Eigen::VectorXd v = eig.vectors.col(i);
    e.kernel_residual = (v - Z * (Z.transpose() * v)).norm();
    e.symmetry_zero = e.kernel_residual <= opt.kernel_tol;
    if (e.symmetry_zero || std::abs(e.value) <= opt.sign_tol * hn)
      e.sign = EigenSign::Zero;
    else
      e.sign = e.value < 0.0 ? EigenSign::Negative : EigenSign::Positive;
    rep.entries.push_back(e);
  }

  // block provenance
  std::vector<detail::BlockValue> blocks;
  if (auto x = detail::collinear_axis(q)) {
    rep.kind = EquilibriumKind::Collinear;
    const CollinearBlocks cb = collinear_blocks(m, *x);
    const auto e0 = symmetric_eigen(cb.M0).values;
    const auto e1 = symmetric_eigen(cb.M1).values;
    for (int i = 0; i < n; ++i) blocks.push_back({e0[i], "M0", 0});
    for (int i = 0; i < n; ++i) blocks.push_back({e1[i], "M1", 1});
  } else if (m.periodic()) {
    if (auto a = detail::ring_radius_of(q)) {
      rep.kind = EquilibriumKind::Ring;
      const auto rc = ring_coefficients(m, *a);
      for (const auto& b : rc.blocks) {
        blocks.push_back({b.lambda_plus, "M" + std::to_string(b.k) + "+", b.k});
        blocks.push_back({b.lambda_minus, "M" + std::to_string(b.k) + "-", b.k});
      }
    }
  }
  if (!blocks.empty()) {
    std::stable_sort(blocks.begin(), blocks.end(),
                     [](const auto& a, const auto& b) { return a.value < b.value; });
    for (int i = 0; i < dof; ++i) {
      rep.entries[i].block = blocks[i].label;
      rep.entries[i].block_index = blocks[i].index;
      rep.block_mismatch =
          std::max(rep.block_mismatch, std::abs(blocks[i].value - rep.entries[i].value));
    }
    if (rep.block_mismatch > opt.match_tol * std::max(1.0, hn))
      for (auto& e : rep.entries) {
        e.block.clear();
        e.block_index = -1;
      }
  }

  for (const auto& e : rep.entries) {
    if (e.sign == EigenSign::Negative) ++rep.negative_count;
    else if (e.sign == EigenSign::Zero) ++rep.zero_count;
    else ++rep.positive_count;
  }

  // bifurcation candidates: positive eigenvalues grouped by multiplicity
  const std::vector<double> spectrum = rep.values();
  for (int i = 0; i < dof;) {
    if (rep.entries[i].sign != EigenSign::Positive) {
      ++i;
      continue;
    }
    BifurcationCandidate cand;
    cand.lambda = rep.entries[i].value;
    int j = i;
    while (j < dof && rep.entries[j].sign == EigenSign::Positive &&
           rep.entries[j].value - cand.lambda <= opt.cluster_tol * hn) {
      cand.indices.push_back(j);
      ++j;
    }
    cand.multiplicity = static_cast<int>(cand.indices.size());
    cand.nu = std::sqrt(cand.lambda);
    const auto& lead = rep.entries[i];
    cand.block = lead.block;
    if (rep.kind == EquilibriumKind::Ring && lead.block_index > 0) {
      const int k = lead.block_index;
      cand.block_index = (k == n) ? n : std::min(k, n - k);
      cand.block = "M" + std::to_string(cand.block_index) + lead.block.substr(lead.block.size() - 1);
    } else {
      cand.block_index = lead.block_index;
    }
    const auto l = resonance_order(cand.lambda, spectrum, 0, opt.resonance_tol * hn);
    cand.nonresonant = !l.has_value();
    cand.resonant_l = l.value_or(0);
    rep.candidates.push_back(cand);
    i = j;
  }
  // largest frequency first
  std::reverse(rep.candidates.begin(), rep.candidates.end());
  return rep;
}

// ---------------------------------------------------------------------------
// Negative-count table
// ---------------------------------------------------------------------------

struct NegativeCountRow {
  int n = 0;
  int collinear = 0;
  int ring = 0;
};

// Negative eigenvalue counts of both equilibria for every n in [n_lo, n_hi].
inline std::vector<NegativeCountRow> negative_count_table(const ForceFieldParams& p, int n_lo,
                                                          int n_hi) {
  if (n_lo < 3 || n_hi > 20 || n_lo > n_hi)
    throw UsageError("negative_count_table needs 3 <= n_lo <= n_hi <= 20");
  std::vector<NegativeCountRow> rows(static_cast<std::size_t>(n_hi - n_lo + 1));
  parallel_for(rows.size(), [&](std::size_t i) {
    const int n = n_lo + static_cast<int>(i);
    const ChainModel lin(n, Boundary::Neumann, p);
    const ChainModel ring(n, Boundary::Periodic, p);
    rows[i].n = n;
    rows[i].collinear = full_spectrum(lin, collinear_equilibrium(lin).configuration()).negative_count;
    rows[i].ring = full_spectrum(ring, lowest_energy_ring(ring).configuration()).negative_count;
  });
  return rows;
}

}  // namespace chainlab
