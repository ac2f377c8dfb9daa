#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "carleman/error.hpp"
#include "carleman/grid.hpp"

namespace carleman {

/// One scatterer of a phantom: its support, its contrast value, and the
/// reference geometry used for peak localization (a centre point, or the
/// mid-circle for ring-shaped inclusions).
struct Inclusion {
  std::string name;
  double value = 1.0;
  std::function<bool(double, double)> contains;
  std::function<double(double, double)> distance_to_center;
};

struct Phantom {
  std::string id;
  RealField c;
  std::vector<Inclusion> inclusions;
};

namespace detail {

inline Inclusion disk(std::string name, double value, double cx, double cy, double r2) {
  return {std::move(name), value,
          [=](double x, double y) { return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r2; },
          [=](double x, double y) { return std::hypot(x - cx, y - cy); }};
}

}  // namespace detail

inline std::vector<Inclusion> phantom_inclusions(const std::string& id) {
  using detail::disk;
  if (id == "test1")
    return {disk("lower disk", 2.0, -0.5, -0.5, 0.04), disk("upper disk", 1.5, 0.5, 0.5, 0.04)};
  if (id == "test2")
    return {{"rectangle", 2.0,
             [](double x, double y) { return std::max(std::abs(x - 0.5) / 0.5, std::abs(y) / 1.5) <= 0.3; },
             [](double x, double y) { return std::hypot(x - 0.5, y); }}};
  if (id == "test3")
    return {{"square", 2.5, [](double x, double y) { return std::max(std::abs(x), std::abs(y)) <= 0.09; },
             [](double x, double y) { return std::hypot(x, y); }}};
  if (id == "test4")
    return {{"ring", 1.5,
             [](double x, double y) {
               const double r2 = x * x + y * y;
               return r2 > 0.25 && r2 < 0.49;
             },
             [](double x, double y) { return std::abs(std::hypot(x, y) - 0.6); }},
            {"inner disk", 1.5, [](double x, double y) { return x * x + y * y < 0.04; },
             [](double x, double y) { return std::hypot(x, y); }}};
  if (id == "homogeneous") return {};
  throw ConfigError("unknown phantom id '" + id + "' (expected test1..test4 or homogeneous)");
}

/// True dielectric constant sampled on the grid: 1 in the background, the
/// inclusion value on its support (later inclusions win on overlap).
inline Phantom make_phantom(const std::string& id, const SpatialGrid& grid) {
  Phantom ph;
  ph.id = id;
  ph.inclusions = phantom_inclusions(id);
  ph.c = RealField::Ones(grid.size());
  for (int j = 0; j < grid.n(); ++j)
    for (int i = 0; i < grid.n(); ++i)
      for (const auto& inc : ph.inclusions)
        if (inc.contains(grid.x(i), grid.y(j))) ph.c[grid.index(i, j)] = inc.value;
  return ph;
}

}  // namespace carleman
