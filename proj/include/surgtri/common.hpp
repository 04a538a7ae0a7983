#pragma once

#include <numbers>
#include <stdexcept>
#include <string>

namespace surgtri {

inline constexpr double kPi = std::numbers::pi;

/// Violated operation precondition (bad input geometry, non-transverse endpoints, ...).
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A construction whose parameters cannot satisfy the requested invariants.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical certificate could not be produced (decomposition mismatch,
/// unconverged refinement, fit on unsuitable data).
class CertificateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration; carries the offending field name.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace surgtri
