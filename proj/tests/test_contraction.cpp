#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "carleman/contraction.hpp"
#include "carleman/least_squares.hpp"

using namespace carleman;

namespace {

template <typename Scalar>
Eigen::SparseMatrix<Scalar> random_sparse(int rows, int cols, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), pick(0.0, 1.0);
  std::vector<Eigen::Triplet<Scalar>> trip;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (pick(rng) < density || (r == c)) {
        if constexpr (std::is_same_v<Scalar, double>) trip.emplace_back(r, c, u(rng));
        else trip.emplace_back(r, c, Scalar(u(rng), u(rng)));
      }
  Eigen::SparseMatrix<Scalar> A(rows, cols);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

/// Discrete harmonic field with prescribed boundary values (5-point Laplacian, dense LU).
ComplexField discrete_harmonic(const SpatialGrid& grid, const std::function<Complex(double, double)>& bc) {
  const int ni = grid.interior_size();
  Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(ni, ni);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(ni);
  ComplexField w = ComplexField::Zero(grid.size());
  for (int b = 0; b < grid.boundary_size(); ++b) {
    const auto& node = grid.boundary()[b];
    w[grid.boundary_grid_index(b)] = bc(grid.x(node.i), grid.y(node.j));
  }
  for (int p = 0; p < ni; ++p) {
    const int node = grid.interior()[p];
    const int i = grid.col(node), j = grid.row(node);
    L(p, p) = -4.0;
    for (int nb : {grid.index(i + 1, j), grid.index(i - 1, j), grid.index(i, j + 1), grid.index(i, j - 1)}) {
      const int q = grid.interior_position(nb);
      if (q >= 0) L(p, q) = 1.0;
      else rhs[p] -= w[nb];
    }
  }
  const Eigen::VectorXcd x = L.partialPivLu().solve(rhs);
  for (int p = 0; p < ni; ++p) w[grid.interior()[p]] = x[p];
  return w;
}

FourierTraces traces_of(const SpatialGrid& grid, const FourierField& v) {
  FourierTraces t;
  const int N = v.N();
  t.F.resize(N, grid.boundary_size());
  t.G = Eigen::MatrixXcd::Zero(N, grid.boundary_size());
  for (int m = 0; m < N; ++m)
    for (int b = 0; b < grid.boundary_size(); ++b) {
      t.F(m, b) = v.modes[m][grid.boundary_grid_index(b)];
      if (!grid.boundary()[b].corner) t.G(m, b) = normal_derivative(grid, v.modes[m], b);
    }
  return t;
}

RealField bump(const SpatialGrid& grid, double cx, double cy, double rho) {
  RealField v = RealField::Zero(grid.size());
  for (int j = 0; j < grid.n(); ++j)
    for (int i = 0; i < grid.n(); ++i) {
      const double s = 1.0 - (std::pow(grid.x(i) - cx, 2) + std::pow(grid.y(j) - cy, 2)) / (rho * rho);
      if (s > 0.0) v[grid.index(i, j)] = s * s * s;
    }
  return v;
}

}  // namespace

TEST(Weight, DefaultParametersAreInert) {
  const SpatialGrid grid(48);
  const CarlemanParams params;
  const RealField W = carleman_weight(grid, params);
  EXPECT_LE((W.array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_GE(W.minCoeff(), 1.0);
  // x = (0, -1): r = 9, W = exp(12 * 9^-20)
  EXPECT_NEAR(std::log(W[grid.index(grid.n() / 2, 0)]), 0.0, 1e-17);
  EXPECT_DOUBLE_EQ(std::exp(12.0 * std::pow(9.0, -20.0)), 1.0 + 12.0 * std::pow(9.0, -20.0));
}

TEST(Weight, NormalizedRadiusAnchor) {
  const SpatialGrid grid(49);
  CarlemanParams params;
  params.normalize_radius = true;
  const RealField W = carleman_weight(grid, params);
  EXPECT_NEAR(W.maxCoeff() / std::exp(12.0), 1.0, 1e-12);
  EXPECT_NEAR(W[grid.index(24, 0)] / std::exp(12.0), 1.0, 1e-12);
  EXPECT_GE(W.minCoeff(), 1.0);
  params.lambda = 400.0;
  EXPECT_THROW(carleman_weight(grid, params), NumericalError);
}

TEST(Weight, ZeroLambdaIsUnity) {
  const SpatialGrid grid(16);
  CarlemanParams params;
  params.lambda = 0.0;
  params.normalize_radius = true;
  EXPECT_EQ((carleman_weight(grid, params).array() - 1.0).abs().maxCoeff(), 0.0);
}

TEST(Weight, RejectsPointInsideDomain) {
  CarlemanParams params;
  params.x0 = {0.2, 0.3};
  EXPECT_THROW(params.validate(), ConfigError);
  params.x0 = {0.0, -10.0};
  params.epsilon = 0.0;
  EXPECT_THROW(params.validate(), ConfigError);
}

TEST(LeastSquares, IdentityAndConsistentSystems) {
  Eigen::SparseMatrix<double> I(5, 5);
  I.setIdentity();
  Eigen::VectorXd b(5);
  b << 1, -2, 3, 0.5, 7;
  EXPECT_LE((solve_weighted_least_squares(I, b).x - b).norm(), 1e-14);

  std::mt19937_64 rng(3);
  const auto A = random_sparse<double>(80, 30, 0.1, rng);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(30, -1.0, 2.0);
  const auto sol = solve_weighted_least_squares<double>(A, A * x);
  EXPECT_LE(sol.residual_norm, 1e-10);
  EXPECT_GT(sol.condition_estimate, 0.0);
}

TEST(LeastSquares, MatchesDenseQrOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto A = random_sparse<double>(200, 100, 0.05, rng);
    Eigen::VectorXd b(200);
    for (auto& v : b) v = u(rng);
    const Eigen::VectorXd dense = Eigen::MatrixXd(A).householderQr().solve(b);
    const auto sol = solve_weighted_least_squares<double>(A, b);
    EXPECT_LE((sol.x - dense).norm() / dense.norm(), 1e-8) << "trial " << trial;
  }
  for (int trial = 0; trial < 5; ++trial) {
    const auto A = random_sparse<Complex>(120, 60, 0.05, rng);
    const auto R = random_sparse<Complex>(30, 60, 0.05, rng);
    Eigen::VectorXcd b(120);
    for (auto& v : b) v = Complex(u(rng), u(rng));
    Eigen::MatrixXcd stacked(150, 60);
    stacked << Eigen::MatrixXcd(A), Eigen::MatrixXcd(R);
    Eigen::VectorXcd bb = Eigen::VectorXcd::Zero(150);
    bb.head(120) = b;
    const Eigen::VectorXcd dense = stacked.householderQr().solve(bb);
    const auto sol = solve_weighted_least_squares<Complex>(A, b, R);
    EXPECT_LE((sol.x - dense).norm() / dense.norm(), 1e-8) << "complex trial " << trial;
  }
}

TEST(LeastSquares, SingularSystemFails) {
  Eigen::SparseMatrix<double> A(4, 3);
  A.insert(0, 0) = 1.0;
  A.insert(1, 1) = 1.0;
  const Eigen::VectorXd b = Eigen::VectorXd::Ones(4);
  EXPECT_THROW(solve_weighted_least_squares<double>(A, b), NumericalError);
}

TEST(InitialGuess, ZeroDataAndZeroMode) {
  const SpatialGrid grid(17);
  FourierTraces t;
  t.F = Eigen::MatrixXcd::Zero(3, grid.boundary_size());
  t.G = t.F;
  const CarlemanParams params;
  for (InitMode mode : {InitMode::qr, InitMode::zero}) {
    const FourierField v = initial_guess(t, grid, params, mode);
    ASSERT_EQ(v.N(), 3);
    for (const auto& m : v.modes) EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(InitialGuess, RecoversDiscreteHarmonicField) {
  const SpatialGrid grid(33);
  FourierField w;
  w.modes.push_back(discrete_harmonic(grid, [](double x, double y) { return Complex(std::exp(x) * std::cos(y), x * y); }));
  w.modes.push_back(discrete_harmonic(grid, [](double x, double y) { return Complex(x * x - y * y, std::sin(x + y)); }));
  const FourierField v = initial_guess(traces_of(grid, w), grid, CarlemanParams{});
  for (int m = 0; m < 2; ++m)
    EXPECT_LE(l2_norm(grid, ComplexField(v.modes[m] - w.modes[m])) / l2_norm(grid, w.modes[m]), 0.01);
}

TEST(Picard, ZeroDataLinearProblem) {
  const SpatialGrid grid(17);
  BasisSet basis = build_basis(1, AngularGrid(32));
  compute_coefficients(basis, 0.0);
  FourierTraces t;
  t.F = Eigen::MatrixXcd::Zero(1, grid.boundary_size());
  t.G = t.F;
  const CarlemanParams params;
  const FourierField v = picard_step(FourierField::zeros(1, grid.size()), t, basis, grid,
                                     carleman_weight(grid, params), params);
  EXPECT_EQ(v.modes[0].cwiseAbs().maxCoeff(), 0.0);
}

TEST(Picard, BoundaryExactnessAndNeumannPenalty) {
  const SpatialGrid grid(21);
  const AngularGrid angular(32);
  BasisSet basis = build_basis(3, angular);
  compute_coefficients(basis, 2.0);
  FourierField w = FourierField::zeros(3, grid.size());
  for (int j = 0; j < grid.n(); ++j)
    for (int i = 0; i < grid.n(); ++i)
      for (int m = 0; m < 3; ++m)
        w.modes[m][grid.index(i, j)] = 0.01 * Complex(std::sin((m + 1) * grid.x(i)) * grid.y(j), std::cos(grid.y(j) + m));
  const FourierTraces t = traces_of(grid, w);
  std::vector<double> mismatch;
  for (double nw : {1.0, 1e2, 1e4}) {
    CarlemanParams params;
    params.neumann_weight = nw;
    const FourierField v = picard_step(w, t, basis, grid, carleman_weight(grid, params), params);
    double err = 0.0;
    for (int m = 0; m < 3; ++m)
      for (int b = 0; b < grid.boundary_size(); ++b) {
        EXPECT_EQ(v.modes[m][grid.boundary_grid_index(b)], t.F(m, b));
        if (!grid.boundary()[b].corner) err += std::norm(normal_derivative(grid, v.modes[m], b) - t.G(m, b));
      }
    mismatch.push_back(std::sqrt(err));
  }
  EXPECT_LT(mismatch[1], mismatch[0]);
  EXPECT_LT(mismatch[2], mismatch[1]);
}

TEST(Contraction, LoopContractAndDeterminism) {
  const SpatialGrid grid(17);
  const AngularGrid angular(32);
  const BoundaryDataset d = generate_dataset("test3", 17, 33, angular, 2.0 * std::numbers::pi, 0.0, 0);
  BasisSet basis = build_basis(4, angular);
  compute_coefficients(basis, d.k);
  const FourierTraces t = compute_traces(compute_log_boundary(d, angular), d, basis, angular);
  const CarlemanParams params;
  const ContractionRun one = run_contraction(t, basis, grid, params, 1, InitMode::qr);
  EXPECT_EQ(one.diffs.size(), 1u);
  EXPECT_FALSE(one.rate_estimate.has_value());
  const ContractionRun a = run_contraction(t, basis, grid, params, 3, InitMode::zero, true);
  const ContractionRun b = run_contraction(t, basis, grid, params, 3, InitMode::zero, true);
  EXPECT_EQ(a.diffs, b.diffs);
  ASSERT_EQ(a.iterates.size(), 3u);
  for (int m = 0; m < 4; ++m) EXPECT_TRUE(a.result.modes[m] == b.result.modes[m]);
  EXPECT_DOUBLE_EQ(a.diffs[0], 1.0);  // from the zero field the first step is a full step
}

TEST(Contraction, RateFit) {
  EXPECT_NEAR(*fit_rate({1.0, 0.5, 0.25, 0.125}), 0.5, 1e-15);
  EXPECT_FALSE(fit_rate({0.3}).has_value());
}

TEST(Diagnostic, BumpRatiosArePositive) {
  const SpatialGrid grid(64);
  const RealField v = bump(grid, 0.1, -0.2, 0.5);
  for (bool normalize : {false, true}) {
    CarlemanParams params;
    params.normalize_radius = normalize;
    const auto table = carleman_diagnostic(grid, v, params, {6.0, 12.0, 24.0});
    ASSERT_EQ(table.size(), 3u);
    for (const auto& row : table) {
      ASSERT_TRUE(row.ratio.has_value());
      EXPECT_GT(*row.ratio, 0.0);
    }
    const auto scaled = carleman_diagnostic(grid, RealField(2.0 * v), params, {6.0, 12.0, 24.0});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(*scaled[i].ratio / *table[i].ratio, 1.0, 1e-12);
  }
}

TEST(Diagnostic, DegenerateAndInvalidFields) {
  const SpatialGrid grid(32);
  const auto table = carleman_diagnostic(grid, RealField::Zero(grid.size()), CarlemanParams{}, {6.0});
  EXPECT_FALSE(table[0].ratio.has_value());
  EXPECT_THROW(carleman_diagnostic(grid, RealField::Ones(grid.size()), CarlemanParams{}, {6.0}), ConfigError);
}
