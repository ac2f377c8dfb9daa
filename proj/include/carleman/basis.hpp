#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>
#include <boost/math/quadrature/gauss.hpp>

#include "carleman/error.hpp"
#include "carleman/grid.hpp"

namespace carleman {

/// Composite 8-point Gauss-Legendre rule on [0, 2pi] used for all inner
/// products between basis functions.
struct FineQuadrature {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  static constexpr int points_per_panel = 8;

  explicit FineQuadrature(int points) {
    const int panels = (points + points_per_panel - 1) / points_per_panel;
    using Rule = boost::math::quadrature::gauss<double, points_per_panel>;
    const auto& abscissa = Rule::abscissa();
    const auto& w = Rule::weights();
    nodes.resize(panels * points_per_panel);
    weights.resize(panels * points_per_panel);
    const double width = 2.0 * std::numbers::pi / panels;
    int q = 0;
    for (int p = 0; p < panels; ++p) {
      const double mid = (p + 0.5) * width;
      for (std::size_t a = 0; a < abscissa.size(); ++a) {
        for (double sign : {-1.0, 1.0}) {
          nodes[q] = mid + sign * 0.5 * width * abscissa[a];
          weights[q] = 0.5 * width * w[a];
          ++q;
        }
      }
    }
  }

  int size() const { return static_cast<int>(nodes.size()); }
};

namespace detail {

/// Legendre polynomials P_0..P_{count-1} and their derivatives at t in [-1, 1].
inline void legendre_table(double t, int count, Eigen::Ref<Eigen::VectorXd> p, Eigen::Ref<Eigen::VectorXd> dp) {
  p[0] = 1.0;
  dp[0] = 0.0;
  if (count > 1) {
    p[1] = t;
    dp[1] = 1.0;
  }
  for (int j = 1; j + 1 < count; ++j) {
    p[j + 1] = ((2.0 * j + 1.0) * t * p[j] - j * p[j - 1]) / (j + 1.0);
    dp[j + 1] = dp[j - 1] + (2.0 * j + 1.0) * p[j];
  }
}

}  // namespace detail

/// Orthonormal basis Psi_1..Psi_N of L^2(0, 2pi) obtained by Gram-Schmidt on
/// theta^{n-1} e^theta, together with the angular coefficient arrays of the
/// reduced elliptic system.
///
/// Internally each Psi_n is stored as e^theta * sum_j d_{nj} P_j(theta/pi - 1)
/// (Legendre polynomials span the same nested spaces as the monomials, so the
/// Gram-Schmidt output is identical but evaluation does not suffer the
/// cancellation of huge monomial coefficients). `gs_coeffs` gives the same
/// functions in the monomial form for auditing.
struct BasisSet {
  int N = 0;
  double k = 0.0;

  Eigen::MatrixXd legendre_coeffs;  // N x N, lower triangular
  Eigen::MatrixXd gs_coeffs;        // N x N, Psi_n = sum_j c_{nj} theta^{j-1} e^theta
  Eigen::MatrixXd psi;              // N x n_theta, values at the data angles
  Eigen::MatrixXd psi_prime;        // N x n_theta
  double gram_residual = 0.0;       // max |G - I| on the fine quadrature

  // Coefficients of the reduced system (filled by compute_coefficients).
  Eigen::MatrixXd S;    // s_{mn} = int Psi_n' Psi_m
  Eigen::MatrixXcd Bx;  // x component of B_{mn}
  Eigen::MatrixXcd By;  // y component of B_{mn}
  std::vector<double> a;  // a_{mnl} at (m * N + n) * N + l
  double s_condition = 0.0;
  double s_min_singular = 0.0;

  double a_at(int m, int n, int l) const { return a[(static_cast<std::size_t>(m) * N + n) * N + l]; }

  Eigen::VectorXd values(double theta) const {
    Eigen::VectorXd v, d;
    evaluate(theta, v, d);
    return v;
  }

  Eigen::VectorXd derivatives(double theta) const {
    Eigen::VectorXd v, d;
    evaluate(theta, v, d);
    return d;
  }

  /// Psi_n(theta) and Psi_n'(theta) for all n, from the stored coefficients.
  void evaluate(double theta, Eigen::VectorXd& value, Eigen::VectorXd& derivative) const {
    Eigen::VectorXd p(N), dp(N);
    const double t = theta / std::numbers::pi - 1.0;
    detail::legendre_table(t, N, p, dp);
    const double e = std::exp(theta);
    value = e * (legendre_coeffs * p);
    derivative = e * (legendre_coeffs * (p + dp / std::numbers::pi));
  }
};

namespace detail {

/// Convert e^theta * sum_j d_j P_j(theta/pi - 1) to monomial coefficients in theta.
inline Eigen::MatrixXd legendre_to_monomial(const Eigen::MatrixXd& d) {
  const int N = static_cast<int>(d.rows());
  // Power coefficients of P_j(t).
  Eigen::MatrixXd pt = Eigen::MatrixXd::Zero(N, N);
  pt(0, 0) = 1.0;
  if (N > 1) pt(1, 1) = 1.0;
  for (int j = 1; j + 1 < N; ++j)
    for (int q = 0; q <= j + 1; ++q) {
      double v = -j * pt(j - 1, q);
      if (q > 0) v += (2.0 * j + 1.0) * pt(j, q - 1);
      pt(j + 1, q) = v / (j + 1.0);
    }
  // t^q = (theta/pi - 1)^q expanded in theta.
  Eigen::MatrixXd tq = Eigen::MatrixXd::Zero(N, N);
  for (int q = 0; q < N; ++q) {
    double binom = 1.0;
    for (int r = 0; r <= q; ++r) {
      if (r > 0) binom = binom * (q - r + 1) / r;
      tq(q, r) = binom * std::pow(1.0 / std::numbers::pi, r) * (((q - r) % 2) ? -1.0 : 1.0);
    }
  }
  return d * pt * tq;
}

}  // namespace detail

inline constexpr int default_fine_quadrature = 4096;

/// Gram-Schmidt (modified, with one full re-orthogonalization pass) on the
/// fine quadrature, then tabulation of Psi and Psi' on `angular`.
inline BasisSet build_basis(int N, int fine_quadrature, const AngularGrid& angular) {
  if (N < 1) throw ConfigError("basis size N must be >= 1");
  if (fine_quadrature < 50 * N) throw ConfigError("fine quadrature must have at least 50 N points");
  const FineQuadrature quad(fine_quadrature);
  const int Q = quad.size();

  // Raw family sampled on the fine nodes: row j = P_j(t) e^theta.
  Eigen::MatrixXd raw(N, Q);
  {
    Eigen::VectorXd p(N), dp(N);
    for (int q = 0; q < Q; ++q) {
      const double th = quad.nodes[q];
      detail::legendre_table(th / std::numbers::pi - 1.0, N, p, dp);
      raw.col(q) = std::exp(th) * p;
    }
  }

  Eigen::MatrixXd coeffs = Eigen::MatrixXd::Identity(N, N);
  Eigen::MatrixXd ortho = raw;
  const Eigen::ArrayXd& w = quad.weights.array();
  for (int i = 0; i < N; ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < i; ++j) {
        const double proj = (ortho.row(i).array() * ortho.row(j).array() * w.transpose()).sum();
        ortho.row(i) -= proj * ortho.row(j);
        coeffs.row(i) -= proj * coeffs.row(j);
      }
    }
    const double norm = std::sqrt((ortho.row(i).array().square() * w.transpose()).sum());
    if (!(norm > 0.0)) throw NumericalError("basis", "Gram-Schmidt produced a zero vector");
    ortho.row(i) /= norm;
    coeffs.row(i) /= norm;
  }

  BasisSet basis;
  basis.N = N;
  basis.legendre_coeffs = coeffs.triangularView<Eigen::Lower>();

  // Re-evaluate from the coefficients and measure orthonormality.
  const Eigen::MatrixXd psi_fine = basis.legendre_coeffs * raw;
  const Eigen::MatrixXd gram = psi_fine * quad.weights.asDiagonal() * psi_fine.transpose();
  basis.gram_residual = (gram - Eigen::MatrixXd::Identity(N, N)).cwiseAbs().maxCoeff();
  if (basis.gram_residual > 1e-6)
    throw NumericalError("basis", "Gram residual " + std::to_string(basis.gram_residual) +
                                      " exceeds 1e-6; lower N");

  basis.gs_coeffs = detail::legendre_to_monomial(basis.legendre_coeffs);

  basis.psi.resize(N, angular.size());
  basis.psi_prime.resize(N, angular.size());
  Eigen::VectorXd v, d;
  for (int i = 0; i < angular.size(); ++i) {
    basis.evaluate(angular.theta(i), v, d);
    basis.psi.col(i) = v;
    basis.psi_prime.col(i) = d;
  }
  return basis;
}

inline BasisSet build_basis(int N, const AngularGrid& angular) {
  return build_basis(N, std::max(default_fine_quadrature, 50 * N), angular);
}

/// Fill S, B and a for wave number k using the fine quadrature.
inline void compute_coefficients(BasisSet& basis, double k, int fine_quadrature = default_fine_quadrature) {
  if (k < 0.0) throw ConfigError("wave number must be non-negative");
  const int N = basis.N;
  const FineQuadrature quad(std::max(fine_quadrature, 50 * N));
  const int Q = quad.size();

  Eigen::MatrixXd psi(N, Q), dpsi(N, Q);
  Eigen::VectorXd v, d;
  for (int q = 0; q < Q; ++q) {
    basis.evaluate(quad.nodes[q], v, d);
    psi.col(q) = v;
    dpsi.col(q) = d;
  }
  const Eigen::VectorXd& w = quad.weights;
  const Eigen::ArrayXd cosw = quad.nodes.array().cos() * w.array();
  const Eigen::ArrayXd sinw = quad.nodes.array().sin() * w.array();

  basis.k = k;
  // S(m, n) = sum_q w Psi_m Psi_n'
  basis.S = psi * w.asDiagonal() * dpsi.transpose();

  const Complex two_ik(0.0, 2.0 * k);
  const Eigen::MatrixXd bx = psi * cosw.matrix().asDiagonal() * dpsi.transpose() -
                             psi * sinw.matrix().asDiagonal() * psi.transpose();
  const Eigen::MatrixXd by = psi * sinw.matrix().asDiagonal() * dpsi.transpose() +
                             psi * cosw.matrix().asDiagonal() * psi.transpose();
  basis.Bx = two_ik * bx.cast<Complex>();
  basis.By = two_ik * by.cast<Complex>();

  basis.a.assign(static_cast<std::size_t>(N) * N * N, 0.0);
  for (int m = 0; m < N; ++m) {
    const Eigen::RowVectorXd wm = (psi.row(m).array() * w.transpose().array()).matrix();
    for (int n = 0; n < N; ++n) {
      const Eigen::RowVectorXd wmn = (wm.array() * psi.row(n).array()).matrix();
      const Eigen::VectorXd row = dpsi * wmn.transpose();
      for (int l = 0; l < N; ++l) basis.a[(static_cast<std::size_t>(m) * N + n) * N + l] = 2.0 * k * k * row[l];
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis.S);
  const auto& sv = svd.singularValues();
  basis.s_min_singular = sv[N - 1];
  basis.s_condition = sv[N - 1] > 0.0 ? sv[0] / sv[N - 1] : std::numeric_limits<double>::infinity();
  if (!(basis.s_min_singular > 0.0)) throw NumericalError("basis", "matrix S is singular");
}

}  // namespace carleman
