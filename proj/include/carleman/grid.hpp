#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "carleman/error.hpp"

namespace carleman {

using Complex = std::complex<double>;
using RealField = Eigen::VectorXd;      // one value per grid node
using ComplexField = Eigen::VectorXcd;  // one value per grid node

enum class Side { bottom, right, top, left };

struct BoundaryNode {
  int i = 0;  // x index
  int j = 0;  // y index
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();
  bool corner = false;
  Side side = Side::bottom;  // side that owns the node in the traversal
};

/// Uniform grid of n x n nodes on [-1, 1]^2. Node (i, j) sits at
/// (-1 + i h, -1 + j h) and is stored at linear index j * n + i.
///
/// Boundary nodes are enumerated counter-clockwise starting at (-1, -1):
/// bottom (i = 0..n-2), right (j = 0..n-2), top (i = n-1..1), left (j = n-1..1),
/// giving 4(n - 1) nodes. Corner normals are the normalized average of the two
/// adjacent edge normals.
class SpatialGrid {
 public:
  explicit SpatialGrid(int n) : n_(n) {
    if (n < 5) throw ConfigError("spatial grid needs at least 5 points per side");
    h_ = 2.0 / (n - 1);
    build_boundary();
    interior_index_.assign(static_cast<std::size_t>(size()), -1);
    for (int j = 1; j < n_ - 1; ++j)
      for (int i = 1; i < n_ - 1; ++i) {
        interior_index_[index(i, j)] = static_cast<int>(interior_.size());
        interior_.push_back(index(i, j));
      }
  }

  int n() const { return n_; }
  double h() const { return h_; }
  int size() const { return n_ * n_; }
  double x(int i) const { return -1.0 + i * h_; }
  double y(int j) const { return -1.0 + j * h_; }
  int index(int i, int j) const { return j * n_ + i; }
  int col(int idx) const { return idx % n_; }
  int row(int idx) const { return idx / n_; }
  bool on_boundary(int i, int j) const { return i == 0 || j == 0 || i == n_ - 1 || j == n_ - 1; }

  const std::vector<BoundaryNode>& boundary() const { return boundary_; }
  int boundary_size() const { return static_cast<int>(boundary_.size()); }
  int boundary_grid_index(int b) const { return index(boundary_[b].i, boundary_[b].j); }

  /// Linear indices of interior nodes, row-major.
  const std::vector<int>& interior() const { return interior_; }
  int interior_size() const { return static_cast<int>(interior_.size()); }
  /// Position of grid node `idx` in `interior()`, or -1 for boundary nodes.
  int interior_position(int idx) const { return interior_index_[idx]; }

 private:
  void build_boundary() {
    const Eigen::Vector2d down(0, -1), right(1, 0), up(0, 1), left(-1, 0);
    auto push = [&](int i, int j, Side s, Eigen::Vector2d nrm) {
      BoundaryNode b;
      b.i = i;
      b.j = j;
      b.side = s;
      b.corner = (i == 0 || i == n_ - 1) && (j == 0 || j == n_ - 1);
      if (b.corner) {
        Eigen::Vector2d a((i == 0) ? -1.0 : 1.0, (j == 0) ? -1.0 : 1.0);
        nrm = a.normalized();
      }
      b.normal = nrm;
      boundary_.push_back(b);
    };
    for (int i = 0; i < n_ - 1; ++i) push(i, 0, Side::bottom, down);
    for (int j = 0; j < n_ - 1; ++j) push(n_ - 1, j, Side::right, right);
    for (int i = n_ - 1; i > 0; --i) push(i, n_ - 1, Side::top, up);
    for (int j = n_ - 1; j > 0; --j) push(0, j, Side::left, left);
  }

  int n_;
  double h_;
  std::vector<BoundaryNode> boundary_;
  std::vector<int> interior_;
  std::vector<int> interior_index_;
};

/// Uniformly spaced incident angles theta_i = (i-1) 2pi/(n_theta-1), i = 1..n_theta,
/// so the first angle is 0 and the last is 2pi.
///
/// Quadrature weights are the trapezoid rule with Gregory end corrections
/// (differences up to `order`), which keeps the rule exact for polynomials of
/// degree <= order while the interior weights stay equal to the spacing.
class AngularGrid {
 public:
  static constexpr int default_gregory_order = 6;

  explicit AngularGrid(int n_theta, int gregory_order = default_gregory_order) : n_(n_theta) {
    if (n_theta < 3) throw ConfigError("angular grid needs at least 3 angles");
    step_ = 2.0 * std::numbers::pi / (n_ - 1);
    thetas_.resize(n_);
    for (int i = 0; i < n_; ++i) thetas_[i] = i * step_;
    thetas_[n_ - 1] = 2.0 * std::numbers::pi;
    order_ = std::min(gregory_order, (n_ - 1) / 2 - 1);
    if (order_ < 0) order_ = 0;
    build_weights();
  }

  int size() const { return n_; }
  double step() const { return step_; }
  double theta(int i) const { return thetas_[i]; }
  const Eigen::VectorXd& thetas() const { return thetas_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  int gregory_order() const { return order_; }

  static Eigen::Vector2d direction(double theta) { return {std::cos(theta), std::sin(theta)}; }
  static Eigen::Vector2d direction_derivative(double theta) { return {-std::sin(theta), std::cos(theta)}; }

 private:
  void build_weights() {
    // Gregory coefficients for the end corrections of the trapezoid rule.
    static constexpr std::array<double, 6> gregory{1.0 / 12.0, 1.0 / 24.0, 19.0 / 720.0,
                                                    3.0 / 160.0, 863.0 / 60480.0, 275.0 / 24192.0};
    weights_ = Eigen::VectorXd::Constant(n_, step_);
    weights_[0] = weights_[n_ - 1] = 0.5 * step_;
    for (int j = 1; j <= order_; ++j) {
      // -c_j (nabla^j f_last - (-1)^j ... ) written through binomial stencils
      for (int i = 0; i <= j; ++i) {
        const double binom = binomial(j, i);
        const double forward = binom * (((j - i) % 2) ? -1.0 : 1.0);  // Delta^j f_0
        const double backward = binom * ((i % 2) ? -1.0 : 1.0);       // nabla^j f_{n-1}
        const double sign_forward = (j % 2) ? 1.0 : -1.0;
        weights_[i] += sign_forward * step_ * gregory[j - 1] * forward;
        weights_[n_ - 1 - i] -= step_ * gregory[j - 1] * backward;
      }
    }
  }

  static double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  int n_;
  double step_;
  int order_ = 0;
  Eigen::VectorXd thetas_;
  Eigen::VectorXd weights_;
};

}  // namespace carleman
