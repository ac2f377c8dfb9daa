#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "carleman/error.hpp"
#include "carleman/grid.hpp"
#include "carleman/phantom.hpp"
#include "carleman/stencil.hpp"

namespace carleman {

/// Inhomogeneous Robin data r = d_n u - i k u for the outward axis direction
/// `axis` at boundary point (x, y). An empty function means r = 0.
using RobinData = std::function<Complex(double x, double y, const Eigen::Vector2d& axis)>;

inline Complex incident_wave(double k, double theta, double x, double y) {
  return std::exp(Complex(0.0, k * (std::cos(theta) * x + std::sin(theta) * y)));
}

inline ComplexField incident_field(const SpatialGrid& grid, double k, double theta) {
  ComplexField u(grid.size());
  for (int j = 0; j < grid.n(); ++j)
    for (int i = 0; i < grid.n(); ++i) u[grid.index(i, j)] = incident_wave(k, theta, grid.x(i), grid.y(j));
  return u;
}

/// Five-point discretization of  Lap u + k^2 c u = source  on the closed grid
/// with  d_n u - i k u = r  imposed through ghost nodes. The sparse LU
/// factorization is computed once and reused for every right-hand side.
class HelmholtzSolver {
 public:
  HelmholtzSolver(const SpatialGrid& grid, const RealField& c, double k) : grid_(grid), k_(k) {
    if (!(k > 0.0)) throw ConfigError("wave number must be positive");
    if (c.size() != grid.size()) throw ConfigError("coefficient field does not match grid");
    const int n = grid.n();
    const double h = grid.h();
    const double inv_h2 = 1.0 / (h * h);
    const Complex ghost_diag = Complex(0.0, 2.0 * h * k) * inv_h2;
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(static_cast<std::size_t>(grid.size()) * 5);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int row = grid.index(i, j);
        Complex diag = -4.0 * inv_h2 + k * k * c[row];
        auto axis = [&](int at, int size, int step_idx_minus, int step_idx_plus) {
          if (at == 0) {
            trip.emplace_back(row, step_idx_plus, 2.0 * inv_h2);
            diag += ghost_diag;
          } else if (at == size - 1) {
            trip.emplace_back(row, step_idx_minus, 2.0 * inv_h2);
            diag += ghost_diag;
          } else {
            trip.emplace_back(row, step_idx_minus, inv_h2);
            trip.emplace_back(row, step_idx_plus, inv_h2);
          }
        };
        axis(i, n, i > 0 ? grid.index(i - 1, j) : -1, i < n - 1 ? grid.index(i + 1, j) : -1);
        axis(j, n, j > 0 ? grid.index(i, j - 1) : -1, j < n - 1 ? grid.index(i, j + 1) : -1);
        trip.emplace_back(row, row, diag);
      }
    Eigen::SparseMatrix<Complex> A(grid.size(), grid.size());
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    lu_.analyzePattern(A);
    lu_.factorize(A);
    if (lu_.info() != Eigen::Success)
      throw NumericalError("forward", "Helmholtz system is singular at k = " + std::to_string(k) +
                                         " (interior resonance); perturb k");
  }

  ComplexField solve(const ComplexField& source, const RobinData& robin = {}) const {
    const int n = grid_.n();
    const double h = grid_.h();
    ComplexField rhs = source;
    if (robin) {
      // ghost value u_g = u_in + 2h (i k u + r): the known part 2h r / h^2 moves to the RHS
      const double scale = 2.0 / h;
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          if (!grid_.on_boundary(i, j)) continue;
          const double x = grid_.x(i), y = grid_.y(j);
          Complex r = 0.0;
          if (i == 0) r += robin(x, y, {-1.0, 0.0});
          if (i == n - 1) r += robin(x, y, {1.0, 0.0});
          if (j == 0) r += robin(x, y, {0.0, -1.0});
          if (j == n - 1) r += robin(x, y, {0.0, 1.0});
          rhs[grid_.index(i, j)] -= scale * r;
        }
    }
    ComplexField u = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success || !u.allFinite())
      throw NumericalError("forward", "Helmholtz solve failed");
    return u;
  }

  const SpatialGrid& grid() const { return grid_; }
  double k() const { return k_; }

 private:
  const SpatialGrid& grid_;
  double k_;
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>> lu_;
};

/// Total field u = u_sc + u_inc for incident angle theta, where u_sc solves the
/// Robin-truncated scattering problem with source -k^2 (c - 1) u_inc.
inline ComplexField solve_total_field(const HelmholtzSolver& solver, const RealField& c, double theta) {
  const SpatialGrid& grid = solver.grid();
  const double k = solver.k();
  const ComplexField u_inc = incident_field(grid, k, theta);
  const ComplexField source = (-k * k * (c.array() - 1.0)).matrix().cast<Complex>().cwiseProduct(u_inc);
  return solver.solve(source) + u_inc;
}

inline ComplexField solve_forward(const Phantom& phantom, const SpatialGrid& grid, double k, double theta) {
  const HelmholtzSolver solver(grid, phantom.c, k);
  return solve_total_field(solver, phantom.c, theta);
}

/// Cauchy data on the boundary of the inversion grid for every incident angle.
struct BoundaryDataset {
  int n = 0;       // inversion grid points per side
  int n_data = 0;  // grid on which the forward problem was solved
  int n_theta = 0;
  double k = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  bool noise_applied = false;
  std::string phantom;
  Eigen::MatrixXcd f;  // boundary nodes x angles
  Eigen::MatrixXcd g;  // boundary nodes x angles, zero at corners
};

/// Restrict total fields computed on `solve_grid` to the boundary of
/// `target_grid` (solve_grid must refine target_grid by an integer factor).
/// f = u at boundary nodes, g = d_nu u by one-sided differences on the solve
/// grid; corners carry no normal derivative (g = 0).
inline BoundaryDataset extract_cauchy(const std::vector<ComplexField>& fields, const SpatialGrid& solve_grid,
                                      const SpatialGrid& target_grid) {
  if ((solve_grid.n() - 1) % (target_grid.n() - 1) != 0)
    throw ConfigError("data grid must refine the inversion grid by an integer factor");
  const int stride = (solve_grid.n() - 1) / (target_grid.n() - 1);
  BoundaryDataset data;
  data.n = target_grid.n();
  data.n_data = solve_grid.n();
  data.n_theta = static_cast<int>(fields.size());
  const int nb = target_grid.boundary_size();
  data.f.resize(nb, data.n_theta);
  data.g = Eigen::MatrixXcd::Zero(nb, data.n_theta);

  // boundary node b of the target grid -> boundary index on the solve grid
  std::vector<int> fine_b(nb, -1);
  {
    std::vector<int> lookup(solve_grid.size(), -1);
    for (int b = 0; b < solve_grid.boundary_size(); ++b) lookup[solve_grid.boundary_grid_index(b)] = b;
    for (int b = 0; b < nb; ++b) {
      const auto& node = target_grid.boundary()[b];
      fine_b[b] = lookup[solve_grid.index(node.i * stride, node.j * stride)];
    }
  }
  for (int t = 0; t < data.n_theta; ++t) {
    const ComplexField& u = fields[t];
    for (int b = 0; b < nb; ++b) {
      const int fb = fine_b[b];
      data.f(b, t) = u[solve_grid.boundary_grid_index(fb)];
      if (!target_grid.boundary()[b].corner) data.g(b, t) = normal_derivative(solve_grid, u, fb);
    }
  }
  return data;
}

/// Multiplicative noise f = f* (1 + delta rand), g = g* (1 + delta rand), with
/// rand uniform on the complex square [-1, 1] x [-1, 1]. All f samples are drawn
/// first (angle-major), then all g samples.
inline BoundaryDataset add_noise(BoundaryDataset data, double delta, std::uint64_t seed) {
  if (delta < 0.0) throw ConfigError("noise level must be non-negative");
  data.delta = delta;
  data.seed = seed;
  data.noise_applied = delta > 0.0;
  if (delta == 0.0) return data;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto perturb = [&](Eigen::MatrixXcd& m) {
    for (Eigen::Index t = 0; t < m.cols(); ++t)
      for (Eigen::Index b = 0; b < m.rows(); ++b) {
        const double re = unit(rng);
        const double im = unit(rng);
        m(b, t) *= Complex(1.0 + delta * re, delta * im);
      }
  };
  perturb(data.f);
  perturb(data.g);
  for (Eigen::Index t = 0; t < data.f.cols(); ++t)
    for (Eigen::Index b = 0; b < data.f.rows(); ++b)
      if (data.f(b, t) == Complex(0.0))
        throw NumericalError("noise", "noisy sample of f is exactly zero; regenerate with seed + 1");
  return data;
}

/// Full data generation: forward solves on a grid of n_data points, restriction
/// to the n-point inversion grid, then noise.
inline BoundaryDataset generate_dataset(const std::string& phantom_id, int n, int n_data,
                                        const AngularGrid& angular, double k, double delta,
                                        std::uint64_t seed) {
  const SpatialGrid target(n);
  const SpatialGrid solve_grid(n_data);
  const Phantom phantom = make_phantom(phantom_id, solve_grid);
  const HelmholtzSolver solver(solve_grid, phantom.c, k);
  std::vector<ComplexField> fields;
  fields.reserve(angular.size());
  for (int t = 0; t < angular.size(); ++t) fields.push_back(solve_total_field(solver, phantom.c, angular.theta(t)));
  BoundaryDataset data = extract_cauchy(fields, solve_grid, target);
  data.k = k;
  data.phantom = phantom_id;
  return add_noise(std::move(data), delta, seed);
}

}  // namespace carleman
