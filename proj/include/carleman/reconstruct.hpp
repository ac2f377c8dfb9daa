#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "carleman/basis.hpp"
#include "carleman/contraction.hpp"
#include "carleman/grid.hpp"
#include "carleman/phantom.hpp"
#include "carleman/stencil.hpp"

namespace carleman {

/// v(x, theta) = sum_n v_n(x) Psi_n(theta).
inline ComplexField synthesize_v(const FourierField& v, const BasisSet& basis, double theta) {
  if (v.N() != basis.N) throw ConfigError("field and basis disagree on N");
  const Eigen::VectorXd psi = basis.values(theta);
  ComplexField out = ComplexField::Zero(v.modes.front().size());
  for (int n = 0; n < v.N(); ++n) out += psi[n] * v.modes[n];
  return out;
}

struct Reconstruction {
  RealField c;
  FourierField v_comp;
  double k = 0.0;
};

/// c(x) = 1 + (1/2pi) int |Lap v + 2ik grad v . theta_hat + k^2 grad v . grad v| dtheta,
/// with the complex (unconjugated) dot product in the last term.
inline Reconstruction reconstruct_c(const FourierField& v_comp, const BasisSet& basis, double k,
                                    const SpatialGrid& grid, const AngularGrid& angular) {
  const int N = v_comp.N();
  std::vector<Derivatives<ComplexField>> d;
  d.reserve(static_cast<std::size_t>(N));
  for (const auto& m : v_comp.modes) d.push_back(differentiate(grid, m));

  RealField integral = RealField::Zero(grid.size());
  const Complex two_ik(0.0, 2.0 * k);
  for (int t = 0; t < angular.size(); ++t) {
    const double theta = angular.theta(t);
    const Eigen::VectorXd psi = basis.values(theta);
    ComplexField vx = ComplexField::Zero(grid.size()), vy = vx, lap = vx;
    for (int n = 0; n < N; ++n) {
      vx += psi[n] * d[n].dx;
      vy += psi[n] * d[n].dy;
      lap += psi[n] * (d[n].dxx + d[n].dyy);
    }
    const double cth = std::cos(theta), sth = std::sin(theta);
    const ComplexField expr = lap + two_ik * (cth * vx + sth * vy) +
                              (k * k) * (vx.cwiseProduct(vx) + vy.cwiseProduct(vy));
    integral += angular.weights()[t] * expr.cwiseAbs();
  }
  Reconstruction r;
  r.c = 1.0 + integral.array() / (2.0 * std::numbers::pi);
  r.v_comp = v_comp;
  r.k = k;
  return r;
}

struct InclusionMetrics {
  std::string name;
  double true_value = 0.0;
  double max_in_truth = 0.0;
  double rel_error_max = 0.0;
  double peak_offset = 0.0;
};

struct Metrics {
  std::vector<InclusionMetrics> inclusions;
  double max_in_truth = 1.0;    // over the union of supports
  double true_value = 1.0;      // largest inclusion value
  double rel_error_max = 0.0;   // worst inclusion
  double l2_rel = 0.0;
  double peak_offset = 0.0;     // worst inclusion
};

/// Per inclusion: max of c over its support, relative error of that max, and
/// distance from the peak of c - 1 (searched over the points closer to this
/// inclusion's reference geometry than to any other; ties go to the point
/// nearest the geometry) to the reference geometry.
inline Metrics score(const RealField& c, const Phantom& phantom, const SpatialGrid& grid) {
  if (c.size() != phantom.c.size() || c.size() != grid.size()) throw ConfigError("reconstruction and phantom grids differ");
  Metrics out;
  out.l2_rel = l2_norm(grid, RealField(c - phantom.c)) / l2_norm(grid, phantom.c);
  const auto& incs = phantom.inclusions;
  double union_max = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < incs.size(); ++q) {
    InclusionMetrics m;
    m.name = incs[q].name;
    m.true_value = incs[q].value;
    m.max_in_truth = -std::numeric_limits<double>::infinity();
    double peak = -std::numeric_limits<double>::infinity();
    int peak_node = -1;
    for (int j = 0; j < grid.n(); ++j)
      for (int i = 0; i < grid.n(); ++i) {
        const double x = grid.x(i), y = grid.y(j);
        const int node = grid.index(i, j);
        if (incs[q].contains(x, y)) m.max_in_truth = std::max(m.max_in_truth, c[node]);
        const double own = incs[q].distance_to_center(x, y);
        bool closest = true;
        for (std::size_t o = 0; o < incs.size() && closest; ++o)
          if (o != q && incs[o].distance_to_center(x, y) < own) closest = false;
        if (!closest) continue;
        if (peak_node < 0) {
          peak = c[node];
          peak_node = node;
          continue;
        }
        const double tol = 1e-12 * std::max(1.0, std::abs(peak));
        if (c[node] > peak + tol ||
            (c[node] >= peak - tol &&
             own < incs[q].distance_to_center(grid.x(grid.col(peak_node)), grid.y(grid.row(peak_node))))) {
          peak = std::max(peak, c[node]);
          peak_node = node;
        }
      }
    if (!std::isfinite(m.max_in_truth)) m.max_in_truth = 1.0;  // support missed by the grid
    m.rel_error_max = std::abs(m.max_in_truth - m.true_value) / m.true_value;
    m.peak_offset = incs[q].distance_to_center(grid.x(grid.col(peak_node)), grid.y(grid.row(peak_node)));
    union_max = std::max(union_max, m.max_in_truth);
    out.true_value = q == 0 ? m.true_value : std::max(out.true_value, m.true_value);
    out.rel_error_max = std::max(out.rel_error_max, m.rel_error_max);
    out.peak_offset = std::max(out.peak_offset, m.peak_offset);
    out.inclusions.push_back(m);
  }
  if (!incs.empty()) out.max_in_truth = union_max;
  return out;
}

}  // namespace carleman
