#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "carleman/basis.hpp"
#include "carleman/error.hpp"
#include "carleman/grid.hpp"
#include "carleman/least_squares.hpp"
#include "carleman/preprocess.hpp"
#include "carleman/stencil.hpp"

namespace carleman {

struct CarlemanParams {
  Eigen::Vector2d x0{0.0, -10.0};
  double beta = 20.0;
  double lambda = 6.0;
  double epsilon = std::pow(10.0, -5.5);
  bool normalize_radius = false;
  /// Penalty weight of the Neumann rows; unset means 1e4 * mean(W).
  std::optional<double> neumann_weight;

  void validate() const {
    if (std::abs(x0.x()) <= 1.0 && std::abs(x0.y()) <= 1.0)
      throw ConfigError("Carleman point x0 must lie outside [-1, 1]^2");
    if (!(beta > 0.0) || !(lambda >= 0.0) || !(epsilon > 0.0))
      throw ConfigError("beta and epsilon must be positive, lambda non-negative");
    if (neumann_weight && !(*neumann_weight > 0.0)) throw ConfigError("neumann_weight must be positive");
  }
};

/// The unknown v = (v_1, ..., v_N): one complex grid per basis mode.
struct FourierField {
  std::vector<ComplexField> modes;

  static FourierField zeros(int N, int size) {
    FourierField f;
    f.modes.assign(static_cast<std::size_t>(N), ComplexField::Zero(size));
    return f;
  }
  int N() const { return static_cast<int>(modes.size()); }
};

/// Stacked discrete L2(Omega) norm over all modes.
inline double l2_norm(const SpatialGrid& grid, const FourierField& v) {
  double s = 0.0;
  for (const auto& m : v.modes) {
    const double e = l2_norm(grid, m);
    s += e * e;
  }
  return std::sqrt(s);
}

inline FourierField difference(const FourierField& a, const FourierField& b) {
  FourierField d = a;
  for (int m = 0; m < a.N(); ++m) d.modes[m] -= b.modes[m];
  return d;
}

/// W(x) = exp(2 lambda r~(x)^{-beta}), r = |x - x0|, with r~ = r or r / min r.
inline RealField carleman_weight(const SpatialGrid& grid, const CarlemanParams& params) {
  params.validate();
  RealField r(grid.size());
  for (int j = 0; j < grid.n(); ++j)
    for (int i = 0; i < grid.n(); ++i)
      r[grid.index(i, j)] = std::hypot(grid.x(i) - params.x0.x(), grid.y(j) - params.x0.y());
  if (params.normalize_radius) r /= r.minCoeff();
  const RealField exponent = (2.0 * params.lambda) * r.array().pow(-params.beta);
  if (exponent.maxCoeff() >= 700.0)
    throw NumericalError("carleman-weight", "weight exponent overflows; enable normalize_radius or reduce lambda");
  return exponent.array().exp();
}

inline double default_neumann_weight(const RealField& weight) { return 1e4 * weight.mean(); }

namespace detail {

/// Weighted least-squares system of a linear second-order operator acting on K
/// complex components over the interior unknowns, with
///   - PDE rows   sqrt(W) h [ sum_n S_mn Lap phi_n + Cx_mn(p) Dx phi_n + Cy_mn(p) Dy phi_n ],
///   - Neumann rows sqrt(w_nu h) (d_nu phi_m - G_m) at non-corner boundary nodes,
///   - H^2 rows  sqrt(eps) h (phi, Dx, Dy, Dxx, Dyy, Dxy) at interior nodes,
/// where phi_m = F_m on the boundary is eliminated into the right-hand side.
class QuasiReversibilitySystem {
 public:
  using Matrix = Eigen::SparseMatrix<Complex>;

  QuasiReversibilitySystem(const SpatialGrid& grid, int K) : grid_(grid), K_(K) {
    const int ni = grid.interior_size();
    pde_rows_ = ni * K;
    nb_free_ = 0;
    for (const auto& b : grid.boundary())
      if (!b.corner) ++nb_free_;
    neumann_rows_ = nb_free_ * K;
    reg_rows_ = 6 * ni * K;
    unknowns_ = ni * K;
  }

  int unknowns() const { return unknowns_; }
  int rows() const { return pde_rows_ + neumann_rows_ + reg_rows_; }

  /// Coefficients: S (K x K), per-interior-node Cx, Cy (K x K each, stored
  /// column-major in a (K*K) x interior matrix), weights, boundary data.
  struct Coefficients {
    Eigen::MatrixXd S;
    Eigen::MatrixXcd Cx;  // (K*K) x interior; empty means zero
    Eigen::MatrixXcd Cy;
    RealField weight;  // grid-sized
    double neumann_weight = 1.0;
    double epsilon = 0.0;
  };

  /// Assemble A (if `matrix` is non-null) and the right-hand side for the
  /// boundary data F (K x nb) and G (K x nb).
  Eigen::VectorXcd assemble(const Coefficients& c, const Eigen::MatrixXcd& F, const Eigen::MatrixXcd& G,
                            Matrix* matrix) const {
    const SpatialGrid& g = grid_;
    const double h = g.h();
    const int K = K_;
    std::vector<Eigen::Triplet<Complex>> trip;
    if (matrix) trip.reserve(static_cast<std::size_t>(pde_rows_) * K * 5 + neumann_rows_ * 2 + reg_rows_ * 3);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(rows());

    // boundary value lookup
    std::vector<int> bpos(static_cast<std::size_t>(g.size()), -1);
    for (int b = 0; b < g.boundary_size(); ++b) bpos[g.boundary_grid_index(b)] = b;

    auto add = [&](int row, int node, int comp, Complex coef) {
      const int p = g.interior_position(node);
      if (p >= 0) {
        if (matrix) trip.emplace_back(row, p * K + comp, coef);
      } else {
        rhs[row] -= coef * F(comp, bpos[node]);
      }
    };

    const double inv_h2 = 1.0 / (h * h);
    const double inv_2h = 0.5 / h;
    const bool has_grad = c.Cx.size() > 0;
    const auto& interior = g.interior();
    for (int p = 0; p < static_cast<int>(interior.size()); ++p) {
      const int node = interior[p];
      const int i = g.col(node), j = g.row(node);
      const double scale = std::sqrt(c.weight[node]) * h;
      const int e = g.index(i + 1, j), w = g.index(i - 1, j), nn = g.index(i, j + 1), s = g.index(i, j - 1);
      for (int m = 0; m < K; ++m) {
        const int row = p * K + m;
        for (int q = 0; q < K; ++q) {
          const double smq = c.S(m, q);
          const Complex cx = has_grad ? c.Cx(q * K + m, p) : Complex(0.0);
          const Complex cy = has_grad ? c.Cy(q * K + m, p) : Complex(0.0);
          if (smq == 0.0 && cx == 0.0 && cy == 0.0) continue;
          add(row, node, q, scale * (-4.0 * smq * inv_h2));
          add(row, e, q, scale * (smq * inv_h2 + cx * inv_2h));
          add(row, w, q, scale * (smq * inv_h2 - cx * inv_2h));
          add(row, nn, q, scale * (smq * inv_h2 + cy * inv_2h));
          add(row, s, q, scale * (smq * inv_h2 - cy * inv_2h));
        }
      }
    }

    // Neumann rows
    {
      const double scale = std::sqrt(c.neumann_weight * h);
      int r = pde_rows_;
      for (int b = 0; b < g.boundary_size(); ++b) {
        const auto& node = g.boundary()[b];
        if (node.corner) continue;
        int di = 0, dj = 0;
        switch (node.side) {
          case Side::bottom: dj = 1; break;
          case Side::top: dj = -1; break;
          case Side::left: di = 1; break;
          case Side::right: di = -1; break;
        }
        const int n0 = g.index(node.i, node.j);
        const int n1 = g.index(node.i + di, node.j + dj);
        const int n2 = g.index(node.i + 2 * di, node.j + 2 * dj);
        for (int m = 0; m < K; ++m, ++r) {
          rhs[r] += scale * G(m, b);
          add(r, n0, m, scale * 3.0 * inv_2h);
          add(r, n1, m, scale * -4.0 * inv_2h);
          add(r, n2, m, scale * inv_2h);
        }
      }
    }

    // H^2 regularization rows
    if (c.epsilon > 0.0) {
      const double scale = std::sqrt(c.epsilon) * h;
      int r = pde_rows_ + neumann_rows_;
      for (int p = 0; p < static_cast<int>(interior.size()); ++p) {
        const int node = interior[p];
        const int i = g.col(node), j = g.row(node);
        const int e = g.index(i + 1, j), w = g.index(i - 1, j), nn = g.index(i, j + 1), s = g.index(i, j - 1);
        for (int m = 0; m < K; ++m) {
          add(r, node, m, scale);
          ++r;
          add(r, e, m, scale * inv_2h);
          add(r, w, m, -scale * inv_2h);
          ++r;
          add(r, nn, m, scale * inv_2h);
          add(r, s, m, -scale * inv_2h);
          ++r;
          add(r, e, m, scale * inv_h2);
          add(r, node, m, -2.0 * scale * inv_h2);
          add(r, w, m, scale * inv_h2);
          ++r;
          add(r, nn, m, scale * inv_h2);
          add(r, node, m, -2.0 * scale * inv_h2);
          add(r, s, m, scale * inv_h2);
          ++r;
          const double q = 0.25 * scale * inv_h2;
          add(r, g.index(i + 1, j + 1), m, q);
          add(r, g.index(i + 1, j - 1), m, -q);
          add(r, g.index(i - 1, j + 1), m, -q);
          add(r, g.index(i - 1, j - 1), m, q);
          ++r;
        }
      }
    }
    if (matrix) {
      matrix->resize(rows(), unknowns_);
      matrix->setFromTriplets(trip.begin(), trip.end());
      matrix->makeCompressed();
    }
    return rhs;
  }

  /// Rebuild full grid fields from the interior solution and boundary data.
  FourierField unpack(const Eigen::VectorXcd& x, const Eigen::MatrixXcd& F) const {
    FourierField v = FourierField::zeros(K_, grid_.size());
    const auto& interior = grid_.interior();
    for (int p = 0; p < static_cast<int>(interior.size()); ++p)
      for (int m = 0; m < K_; ++m) v.modes[m][interior[p]] = x[p * K_ + m];
    for (int b = 0; b < grid_.boundary_size(); ++b)
      for (int m = 0; m < K_; ++m) v.modes[m][grid_.boundary_grid_index(b)] = F(m, b);
    return v;
  }

 private:
  const SpatialGrid& grid_;
  int K_;
  int pde_rows_ = 0, neumann_rows_ = 0, reg_rows_ = 0, unknowns_ = 0, nb_free_ = 0;
};

}  // namespace detail

enum class InitMode { qr, zero };

inline double resolve_neumann_weight(const CarlemanParams& params, const RealField& weight) {
  return params.neumann_weight ? *params.neumann_weight : default_neumann_weight(weight);
}

/// Quasi-reversibility initial guess: per mode, min ||Lap phi||^2 + eps ||phi||_{H^2}^2
/// subject to phi = F_m on the boundary and the penalized Neumann rows.
inline FourierField initial_guess(const FourierTraces& traces, const SpatialGrid& grid,
                                  const CarlemanParams& params, InitMode mode = InitMode::qr) {
  const int N = traces.N();
  if (mode == InitMode::zero) return FourierField::zeros(N, grid.size());
  params.validate();
  const detail::QuasiReversibilitySystem system(grid, 1);
  detail::QuasiReversibilitySystem::Coefficients c;
  c.S = Eigen::MatrixXd::Identity(1, 1);
  c.weight = RealField::Ones(grid.size());
  c.neumann_weight = resolve_neumann_weight(params, c.weight);
  c.epsilon = params.epsilon;

  Eigen::SparseMatrix<Complex> A;
  system.assemble(c, traces.F.row(0), traces.G.row(0), &A);
  const NormalEquationsSolver<Complex> solver(std::move(A), "initial-guess");
  FourierField v = FourierField::zeros(N, grid.size());
  for (int m = 0; m < N; ++m) {
    const Eigen::MatrixXcd Fm = traces.F.row(m), Gm = traces.G.row(m);
    const Eigen::VectorXcd b = system.assemble(c, Fm, Gm, nullptr);
    v.modes[m] = system.unpack(solver.solve(b), Fm).modes[0];
  }
  return v;
}

/// One Carleman-weighted quasi-reversibility step: the coefficient of the
/// quadratic gradient term is frozen at v_prev, the new iterate enters linearly.
inline FourierField picard_step(const FourierField& v_prev, const FourierTraces& traces, const BasisSet& basis,
                                const SpatialGrid& grid, const RealField& weight, const CarlemanParams& params) {
  const int N = basis.N;
  if (v_prev.N() != N || traces.N() != N) throw ConfigError("basis, traces and iterate disagree on N");
  const int ni = grid.interior_size();

  // sum_l a_{mnl} d v_l at each interior node, stored (n * N + m) x interior
  Eigen::MatrixXd a_mat(N * N, N);
  for (int m = 0; m < N; ++m)
    for (int n = 0; n < N; ++n)
      for (int l = 0; l < N; ++l) a_mat(n * N + m, l) = basis.a_at(m, n, l);
  Eigen::MatrixXcd gx(N, ni), gy(N, ni);
  for (int l = 0; l < N; ++l) {
    const auto d = differentiate(grid, v_prev.modes[l]);
    for (int p = 0; p < ni; ++p) {
      gx(l, p) = d.dx[grid.interior()[p]];
      gy(l, p) = d.dy[grid.interior()[p]];
    }
  }

  detail::QuasiReversibilitySystem::Coefficients c;
  c.S = basis.S;
  c.Cx = a_mat.cast<Complex>() * gx;
  c.Cy = a_mat.cast<Complex>() * gy;
  for (int n = 0; n < N; ++n)
    for (int m = 0; m < N; ++m) {
      c.Cx.row(n * N + m).array() += basis.Bx(m, n);
      c.Cy.row(n * N + m).array() += basis.By(m, n);
    }
  c.weight = weight;
  c.neumann_weight = resolve_neumann_weight(params, weight);
  c.epsilon = params.epsilon;

  const detail::QuasiReversibilitySystem system(grid, N);
  Eigen::SparseMatrix<Complex> A;
  const Eigen::VectorXcd b = system.assemble(c, traces.F, traces.G, &A);
  const NormalEquationsSolver<Complex> solver(std::move(A), "picard-step");
  return system.unpack(solver.solve(b), traces.F);
}

struct ContractionRun {
  CarlemanParams params;
  int P = 0;
  FourierField initial;
  FourierField result;
  std::vector<FourierField> iterates;  // v^(1)..v^(P) when requested
  std::vector<double> diffs;           // diffs[p-1] = ||v^(p) - v^(p-1)|| / ||v^(p)||
  std::optional<double> rate_estimate;
  std::vector<std::string> warnings;
};

/// Geometric mean of successive diff ratios over iterations 2..P.
inline std::optional<double> fit_rate(const std::vector<double>& diffs) {
  if (diffs.size() < 2 || !(diffs.front() > 0.0) || !(diffs.back() > 0.0)) return std::nullopt;
  return std::pow(diffs.back() / diffs.front(), 1.0 / static_cast<double>(diffs.size() - 1));
}

inline ContractionRun run_contraction(const FourierTraces& traces, const BasisSet& basis, const SpatialGrid& grid,
                                      const CarlemanParams& params, int P, InitMode init_mode,
                                      bool keep_iterates = false) {
  if (P < 1) throw ConfigError("iteration count P must be >= 1");
  params.validate();
  ContractionRun run;
  run.params = params;
  run.P = P;
  const RealField weight = carleman_weight(grid, params);
  run.initial = initial_guess(traces, grid, params, init_mode);
  FourierField prev = run.initial;
  double prev_norm = l2_norm(grid, prev);
  for (int p = 1; p <= P; ++p) {
    FourierField next = picard_step(prev, traces, basis, grid, weight, params);
    const double norm = l2_norm(grid, next);
    const double diff = l2_norm(grid, difference(next, prev)) / norm;
    if (!std::isfinite(diff))
      throw NumericalError("contraction", "non-finite consecutive difference at iterate " + std::to_string(p));
    if (prev_norm > 0.0 && norm > 10.0 * prev_norm)
      run.warnings.push_back("iterate " + std::to_string(p) + " norm grew more than 10x");
    run.diffs.push_back(diff);
    if (keep_iterates) run.iterates.push_back(next);
    prev = std::move(next);
    prev_norm = norm;
  }
  run.result = std::move(prev);
  run.rate_estimate = fit_rate(run.diffs);
  return run;
}

struct DiagnosticRow {
  double lambda = 0.0;
  std::optional<double> ratio;  // empty when the test field is degenerate
};

/// R(lambda) = int W |Lap v|^2 / (lambda int W |grad v|^2 + lambda^3 int W |v|^2)
/// for a test field vanishing with its normal derivative on the boundary.
inline std::vector<DiagnosticRow> carleman_diagnostic(const SpatialGrid& grid, const RealField& v,
                                                      CarlemanParams params, const std::vector<double>& lambdas) {
  double worst = 0.0;
  for (int b = 0; b < grid.boundary_size(); ++b) {
    worst = std::max(worst, std::abs(v[grid.boundary_grid_index(b)]));
    if (!grid.boundary()[b].corner) worst = std::max(worst, std::abs(normal_derivative(grid, v, b)));
  }
  if (worst > 1e-10)
    throw ConfigError("test field or its normal derivative does not vanish on the boundary");

  const auto d = differentiate(grid, v);
  const RealField lap = d.laplacian();
  std::vector<DiagnosticRow> table;
  for (double lambda : lambdas) {
    params.lambda = lambda;
    const RealField W = carleman_weight(grid, params);
    double num = 0.0, grad = 0.0, val = 0.0;
    for (int node : grid.interior()) {
      num += W[node] * lap[node] * lap[node];
      grad += W[node] * (d.dx[node] * d.dx[node] + d.dy[node] * d.dy[node]);
      val += W[node] * v[node] * v[node];
    }
    const double denom = lambda * grad + lambda * lambda * lambda * val;
    DiagnosticRow row;
    row.lambda = lambda;
    if (denom > 0.0) row.ratio = num / denom;
    table.push_back(row);
  }
  return table;
}

}  // namespace carleman
