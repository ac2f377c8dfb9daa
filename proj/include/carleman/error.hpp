#pragma once

#include <stdexcept>
#include <string>

namespace carleman {

/// Failure of a numerical stage (singular system, overflow, broken logarithm, ...).
/// `stage()` names the pipeline stage so the CLI can tag stderr output.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Invalid or inconsistent configuration / input files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace carleman
