#pragma once

#include "carleman/grid.hpp"

namespace carleman {

/// Second-order finite differences of a grid field: central in the interior,
/// one-sided (three points for first, four points for second derivatives) on
/// the boundary rows/columns.
template <typename Field>
struct Derivatives {
  Field dx, dy, dxx, dyy;

  Field laplacian() const { return dxx + dyy; }
};

namespace detail {

template <typename Vec>
auto first_diff(const Vec& f, int pos, int stride, int count, int at, double h) {
  // derivative along a line of `count` samples f[pos + t * stride], at index t = at
  auto s = [&](int t) { return f[pos + t * stride]; };
  if (at == 0) return (-3.0 * s(0) + 4.0 * s(1) - s(2)) / (2.0 * h);
  if (at == count - 1) return (3.0 * s(count - 1) - 4.0 * s(count - 2) + s(count - 3)) / (2.0 * h);
  return (s(at + 1) - s(at - 1)) / (2.0 * h);
}

template <typename Vec>
auto second_diff(const Vec& f, int pos, int stride, int count, int at, double h) {
  auto s = [&](int t) { return f[pos + t * stride]; };
  const double h2 = h * h;
  if (at == 0) return (2.0 * s(0) - 5.0 * s(1) + 4.0 * s(2) - s(3)) / h2;
  if (at == count - 1) return (2.0 * s(count - 1) - 5.0 * s(count - 2) + 4.0 * s(count - 3) - s(count - 4)) / h2;
  return (s(at + 1) - 2.0 * s(at) + s(at - 1)) / h2;
}

}  // namespace detail

template <typename Field>
Derivatives<Field> differentiate(const SpatialGrid& grid, const Field& f) {
  const int n = grid.n();
  const double h = grid.h();
  Derivatives<Field> d;
  d.dx.resize(grid.size());
  d.dy.resize(grid.size());
  d.dxx.resize(grid.size());
  d.dyy.resize(grid.size());
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int idx = grid.index(i, j);
      d.dx[idx] = detail::first_diff(f, grid.index(0, j), 1, n, i, h);
      d.dxx[idx] = detail::second_diff(f, grid.index(0, j), 1, n, i, h);
      d.dy[idx] = detail::first_diff(f, grid.index(i, 0), n, n, j, h);
      d.dyy[idx] = detail::second_diff(f, grid.index(i, 0), n, n, j, h);
    }
  return d;
}

/// Outward normal derivative at non-corner boundary node `b` from the
/// second-order one-sided difference along the inward normal.
template <typename Field>
auto normal_derivative(const SpatialGrid& grid, const Field& f, int b) {
  const BoundaryNode& node = grid.boundary()[b];
  int di = 0, dj = 0;  // inward step
  switch (node.side) {
    case Side::bottom: dj = 1; break;
    case Side::top: dj = -1; break;
    case Side::left: di = 1; break;
    case Side::right: di = -1; break;
  }
  const auto f0 = f[grid.index(node.i, node.j)];
  const auto f1 = f[grid.index(node.i + di, node.j + dj)];
  const auto f2 = f[grid.index(node.i + 2 * di, node.j + 2 * dj)];
  return (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * grid.h());
}

/// Discrete L2(Omega) norm with the product trapezoid rule.
template <typename Field>
double l2_norm(const SpatialGrid& grid, const Field& f) {
  const int n = grid.n();
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    const double wy = (j == 0 || j == n - 1) ? 0.5 : 1.0;
    for (int i = 0; i < n; ++i) {
      const double wx = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      s += wx * wy * std::norm(f[grid.index(i, j)]);
    }
  }
  return std::sqrt(s) * grid.h();
}

}  // namespace carleman
