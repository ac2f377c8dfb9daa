#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "carleman/basis.hpp"
#include "carleman/error.hpp"
#include "carleman/forward.hpp"
#include "carleman/grid.hpp"

namespace carleman {

struct LogBoundaryField {
  Eigen::MatrixXcd v;  // boundary nodes x angles, v = log(f / u_inc) / k^2
  bool unwrap_applied = false;
};

struct FourierTraces {
  Eigen::MatrixXcd F;  // N x boundary nodes
  Eigen::MatrixXcd G;  // N x boundary nodes, zero at corners
  int N() const { return static_cast<int>(F.rows()); }
};

/// Unwrap phases along a sequence so that consecutive jumps are below pi.
inline void unwrap_phase(std::vector<double>& phase) {
  for (std::size_t t = 1; t < phase.size(); ++t) {
    const double jump = phase[t] - phase[t - 1];
    phase[t] -= 2.0 * std::numbers::pi * std::round(jump / (2.0 * std::numbers::pi));
  }
}

/// Complex logarithm of ratios rho (nodes x angles). The phase at the first angle
/// is unwrapped along `node_order`, then each node is unwrapped along theta
/// starting from that anchor.
inline Eigen::MatrixXcd unwrapped_log(const Eigen::MatrixXcd& rho, const std::vector<int>& node_order) {
  const Eigen::Index nodes = rho.rows(), angles = rho.cols();
  for (Eigen::Index t = 0; t < angles; ++t)
    for (Eigen::Index b = 0; b < nodes; ++b)
      if (!(std::abs(rho(b, t)) >= 1e-14))
        throw NumericalError("preprocess", "|f / u_inc| below 1e-14; logarithm undefined");

  std::vector<double> anchor(node_order.size());
  for (std::size_t q = 0; q < node_order.size(); ++q) anchor[q] = std::arg(rho(node_order[q], 0));
  unwrap_phase(anchor);

  Eigen::MatrixXcd out(nodes, angles);
  std::vector<double> phase(static_cast<std::size_t>(angles));
  for (std::size_t q = 0; q < node_order.size(); ++q) {
    const int b = node_order[q];
    for (Eigen::Index t = 0; t < angles; ++t) phase[t] = std::arg(rho(b, t));
    phase[0] = anchor[q];
    unwrap_phase(phase);
    for (Eigen::Index t = 0; t < angles; ++t) out(b, t) = Complex(std::log(std::abs(rho(b, t))), phase[t]);
  }
  return out;
}

inline Eigen::MatrixXcd boundary_incident(const SpatialGrid& grid, const AngularGrid& angular, double k) {
  Eigen::MatrixXcd u(grid.boundary_size(), angular.size());
  for (int t = 0; t < angular.size(); ++t)
    for (int b = 0; b < grid.boundary_size(); ++b) {
      const auto& node = grid.boundary()[b];
      u(b, t) = incident_wave(k, angular.theta(t), grid.x(node.i), grid.y(node.j));
    }
  return u;
}

/// v(x, theta) = log(f / u_inc) / k^2 on the boundary.
inline LogBoundaryField compute_log_boundary(const BoundaryDataset& data, const AngularGrid& angular) {
  const SpatialGrid grid(data.n);
  if (data.f.cols() != angular.size()) throw ConfigError("dataset and angular grid disagree");
  const Eigen::MatrixXcd rho = data.f.cwiseQuotient(boundary_incident(grid, angular, data.k));
  std::vector<int> order(static_cast<std::size_t>(grid.boundary_size()));
  for (int b = 0; b < grid.boundary_size(); ++b) order[b] = b;
  LogBoundaryField out;
  out.v = unwrapped_log(rho, order) / (data.k * data.k);
  out.unwrap_applied = true;
  return out;
}

/// Coefficients of samples (rows) in the basis, by weighted least squares on the
/// angular grid: argmin_c sum_i w_i |s(theta_i) - sum_n c_n Psi_n(theta_i)|^2.
/// Returns N x rows.
inline Eigen::MatrixXcd project_onto_basis(const Eigen::MatrixXcd& samples, const BasisSet& basis,
                                           const AngularGrid& angular) {
  const Eigen::MatrixXd pw = basis.psi * angular.weights().asDiagonal();
  const Eigen::MatrixXd gram = pw * basis.psi.transpose();
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw NumericalError("preprocess", "basis is not resolved by the angular grid; lower N");
  const Eigen::MatrixXd re = ldlt.solve(pw * samples.real().transpose());
  const Eigen::MatrixXd im = ldlt.solve(pw * samples.imag().transpose());
  Eigen::MatrixXcd out(re.rows(), re.cols());
  out.real() = re;
  out.imag() = im;
  return out;
}

/// Quadrature moments int s Psi_n dtheta on the angular grid. Returns N x rows.
inline Eigen::MatrixXcd quadrature_moments(const Eigen::MatrixXcd& samples, const BasisSet& basis,
                                           const AngularGrid& angular) {
  const Eigen::MatrixXd pw = basis.psi * angular.weights().asDiagonal();
  return pw.cast<Complex>() * samples.transpose();
}

enum class Projection { least_squares, quadrature };

/// Boundary traces F_m = Fourier coefficients of v, G_m = those of
/// (g / f - i k theta_hat . nu) / k^2.
inline FourierTraces compute_traces(const LogBoundaryField& logfield, const BoundaryDataset& data,
                                    const BasisSet& basis, const AngularGrid& angular,
                                    Projection rule = Projection::least_squares) {
  const SpatialGrid grid(data.n);
  const int nb = grid.boundary_size();
  const double k = data.k;
  Eigen::MatrixXcd q(nb, angular.size());
  for (int t = 0; t < angular.size(); ++t) {
    const Eigen::Vector2d dir = AngularGrid::direction(angular.theta(t));
    for (int b = 0; b < nb; ++b) {
      const auto& node = grid.boundary()[b];
      if (node.corner) {
        q(b, t) = 0.0;
        continue;
      }
      if (!(std::abs(data.f(b, t)) >= 1e-14)) throw NumericalError("preprocess", "|f| below 1e-14 in g / f");
      q(b, t) = (data.g(b, t) / data.f(b, t) - Complex(0.0, k * dir.dot(node.normal))) / (k * k);
    }
  }
  FourierTraces traces;
  if (rule == Projection::least_squares) {
    traces.F = project_onto_basis(logfield.v, basis, angular);
    traces.G = project_onto_basis(q, basis, angular);
  } else {
    traces.F = quadrature_moments(logfield.v, basis, angular);
    traces.G = quadrature_moments(q, basis, angular);
  }
  for (int b = 0; b < nb; ++b)
    if (grid.boundary()[b].corner) traces.G.col(b).setZero();
  if (!traces.F.allFinite() || !traces.G.allFinite()) throw NumericalError("preprocess", "non-finite traces");
  return traces;
}

struct CutoffResult {
  int selected = 0;
  std::vector<double> curve;  // curve[N - 1] = e(N)
};

/// Relative truncation misfit e(N) of the raw data f on the bottom side
/// {y = -1}, using quadrature coefficients f_n = int f Psi_n, for
/// N = 1..N_max. The selected N is the smallest N within 1e-6 of the minimum
/// of e over the range preceding the first run of three consecutive increases.
inline CutoffResult choose_cutoff(const BoundaryDataset& data, const AngularGrid& angular, int n_max,
                                  int fine_quadrature = default_fine_quadrature) {
  if (n_max < 2) throw ConfigError("cut-off search needs N_max >= 2");
  const SpatialGrid grid(data.n);
  std::vector<int> side;
  for (int b = 0; b < grid.boundary_size(); ++b)
    if (grid.boundary()[b].j == 0) side.push_back(b);
  Eigen::MatrixXcd fs(static_cast<Eigen::Index>(side.size()), angular.size());
  for (std::size_t q = 0; q < side.size(); ++q) fs.row(static_cast<Eigen::Index>(q)) = data.f.row(side[q]);

  const BasisSet basis = build_basis(n_max, std::max(fine_quadrature, 50 * n_max), angular);
  const Eigen::MatrixXcd coeffs = quadrature_moments(fs, basis, angular);  // n_max x side
  const Eigen::VectorXd& w = angular.weights();
  auto norm = [&](const Eigen::MatrixXcd& m) {
    double s = 0.0;
    for (Eigen::Index t = 0; t < m.cols(); ++t) s += w[t] * m.col(t).squaredNorm();
    return std::sqrt(s);
  };
  const double fnorm = norm(fs);
  if (!(fnorm > 0.0)) throw NumericalError("choose-n", "data vanish on the bottom side");

  CutoffResult out;
  Eigen::MatrixXcd approx = Eigen::MatrixXcd::Zero(fs.rows(), fs.cols());
  for (int N = 1; N <= n_max; ++N) {
    approx += coeffs.row(N - 1).transpose() * basis.psi.row(N - 1).cast<Complex>();
    out.curve.push_back(norm(fs - approx) / fnorm);
  }
  bool decreased = false;
  for (int i = 1; i < n_max; ++i) decreased = decreased || out.curve[i] < out.curve[i - 1];
  if (!decreased) throw NumericalError("choose-n", "e(N) is non-decreasing from N = 1 (data/basis mismatch)");

  int stop = n_max;  // last admissible N
  for (int N = 1; N + 3 <= n_max; ++N) {
    const auto& e = out.curve;
    if (e[N] > e[N - 1] && e[N + 1] > e[N] && e[N + 2] > e[N + 1]) {
      stop = N;
      break;
    }
  }
  double best = out.curve[0];
  for (int N = 1; N <= stop; ++N) best = std::min(best, out.curve[N - 1]);
  for (int N = 1; N <= stop; ++N)
    if (out.curve[N - 1] <= best + 1e-6) {
      out.selected = N;
      break;
    }
  return out;
}

}  // namespace carleman
