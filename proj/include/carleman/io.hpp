#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "carleman/error.hpp"
#include "carleman/forward.hpp"
#include "carleman/grid.hpp"

namespace carleman::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// 17 significant digits: lossless round trip of doubles.
inline std::string format_number(double value) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", value);
  return buf.data();
}

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { open_output(path) << j.dump(2) << '\n'; }

/// Lowercase hex SHA-256 of a file's bytes.
inline std::string sha256_file(const fs::path& path) {
  const std::string bytes = read_text(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("summary", "SHA-256 computation failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

// ---------------------------------------------------------------- CSV output

inline void write_columns(const fs::path& path, const std::vector<std::string>& header,
                          const std::vector<std::vector<double>>& rows) {
  auto out = open_output(path);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_number(row[c]);
    out << '\n';
  }
}

/// e(N) curve: columns N, e.
inline void write_cutoff_curve(const fs::path& path, const std::vector<double>& curve) {
  auto out = open_output(path);
  out << "N,e\n";
  for (std::size_t i = 0; i < curve.size(); ++i) out << i + 1 << ',' << format_number(curve[i]) << '\n';
}

/// Consecutive differences: columns p, diff.
inline void write_convergence(const fs::path& path, const std::vector<double>& diffs) {
  auto out = open_output(path);
  out << "p,diff\n";
  for (std::size_t i = 0; i < diffs.size(); ++i) out << i + 1 << ',' << format_number(diffs[i]) << '\n';
}

/// Real grid function: columns x, y, value.
inline void write_scalar_field(const fs::path& path, const SpatialGrid& grid, const RealField& f) {
  auto out = open_output(path);
  out << "x,y,value\n";
  for (int j = 0; j < grid.n(); ++j)
    for (int i = 0; i < grid.n(); ++i)
      out << format_number(grid.x(i)) << ',' << format_number(grid.y(j)) << ','
          << format_number(f[grid.index(i, j)]) << '\n';
}

/// Complex grid function: columns x, y, re, im.
inline void write_complex_field(const fs::path& path, const SpatialGrid& grid, const ComplexField& f) {
  auto out = open_output(path);
  out << "x,y,re,im\n";
  for (int j = 0; j < grid.n(); ++j)
    for (int i = 0; i < grid.n(); ++i) {
      const Complex z = f[grid.index(i, j)];
      out << format_number(grid.x(i)) << ',' << format_number(grid.y(j)) << ',' << format_number(z.real())
          << ',' << format_number(z.imag()) << '\n';
    }
}

/// Reads the value column of an (x, y, value) file written by write_scalar_field.
inline RealField read_scalar_field(const fs::path& path, const SpatialGrid& grid) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  RealField f(grid.size());
  int count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double x = 0.0, y = 0.0, value = 0.0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &value) != 3 || count >= grid.size())
      throw ConfigError(path.string() + ": malformed row " + std::to_string(count + 2));
    f[count++] = value;
  }
  if (count != grid.size()) throw ConfigError(path.string() + ": expected " + std::to_string(grid.size()) + " rows");
  return f;
}

// ---------------------------------------------------------------- datasets

inline const char* dataset_header_name = "dataset.json";

inline void write_boundary_csv(const fs::path& path, const Eigen::MatrixXcd& m) {
  auto out = open_output(path);
  out << "boundary_node_index,theta_index,re,im\n";
  for (Eigen::Index b = 0; b < m.rows(); ++b)
    for (Eigen::Index t = 0; t < m.cols(); ++t)
      out << b << ',' << t << ',' << format_number(m(b, t).real()) << ',' << format_number(m(b, t).imag())
          << '\n';
}

inline Eigen::MatrixXcd read_boundary_csv(const fs::path& path, int nodes, int angles) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  if (line != "boundary_node_index,theta_index,re,im") throw ConfigError(path.string() + ": unexpected header");
  Eigen::MatrixXcd m(nodes, angles);
  std::vector<char> seen(static_cast<std::size_t>(nodes) * angles, 0);
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    long b = -1, t = -1;
    double re = 0.0, im = 0.0;
    if (std::sscanf(line.c_str(), "%ld,%ld,%lf,%lf", &b, &t, &re, &im) != 4 || b < 0 || b >= nodes || t < 0 ||
        t >= angles)
      throw ConfigError(path.string() + ": malformed row " + std::to_string(row));
    m(b, t) = Complex(re, im);
    seen[static_cast<std::size_t>(b) * angles + t] = 1;
  }
  for (char s : seen)
    if (!s) throw ConfigError(path.string() + ": missing samples");
  return m;
}

/// Header `dataset.json` (grid, k, angles, noise metadata) plus `f.csv`, `g.csv`.
inline void write_dataset(const fs::path& dir, const BoundaryDataset& data, const AngularGrid& angular) {
  fs::create_directories(dir);
  const SpatialGrid grid(data.n);
  json header;
  header["grid"] = {{"n", data.n}, {"n_data", data.n_data}, {"h", grid.h()}, {"boundary_nodes", grid.boundary_size()}};
  header["k"] = data.k;
  header["n_theta"] = data.n_theta;
  std::vector<double> thetas(angular.thetas().data(), angular.thetas().data() + angular.size());
  header["thetas"] = thetas;
  header["delta"] = data.delta;
  header["seed"] = data.seed;
  header["noise_applied"] = data.noise_applied;
  header["phantom"] = data.phantom;
  write_json(dir / dataset_header_name, header);
  write_boundary_csv(dir / "f.csv", data.f);
  write_boundary_csv(dir / "g.csv", data.g);
}

inline BoundaryDataset read_dataset(const fs::path& dir) {
  const json header = read_json(dir / dataset_header_name);
  BoundaryDataset data;
  try {
    data.n = header.at("grid").at("n").get<int>();
    data.n_data = header.at("grid").at("n_data").get<int>();
    data.n_theta = header.at("n_theta").get<int>();
    data.k = header.at("k").get<double>();
    data.delta = header.at("delta").get<double>();
    data.seed = header.at("seed").get<std::uint64_t>();
    data.noise_applied = header.at("noise_applied").get<bool>();
    data.phantom = header.at("phantom").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError((dir / dataset_header_name).string() + ": " + e.what());
  }
  const SpatialGrid grid(data.n);
  data.f = read_boundary_csv(dir / "f.csv", grid.boundary_size(), data.n_theta);
  data.g = read_boundary_csv(dir / "g.csv", grid.boundary_size(), data.n_theta);
  return data;
}

}  // namespace carleman::io
