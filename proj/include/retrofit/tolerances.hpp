#pragma once

#include <stdexcept>
#include <string>

namespace retrofit {

/// Numerical thresholds shared by every module.
///
/// eps_cancel  root-pair distance (relative to 1 + |root|) below which a
///             numerator/denominator root pair is cancelled.
/// eps_stab    a pole is stable only if Re(p) < -eps_stab.
/// eps_rank    singular values below eps_rank * sigma_max count as zero.
/// residual_tol  relative tolerance for sampled identities such as R*Gyv = 0.
struct ToleranceConfig {
  double eps_cancel = 1e-8;
  double eps_stab = 1e-9;
  double eps_rank = 1e-9;
  double residual_tol = 1e-7;
  double eps_trim = 1e-12;

  void validate() const {
    if (!(eps_cancel > 0 && eps_stab > 0 && eps_rank > 0 && residual_tol > 0 &&
          eps_trim > 0)) {
      throw std::invalid_argument("tolerances must be strictly positive");
    }
    if (residual_tol < eps_cancel) {
      throw std::invalid_argument("residual_tol must be >= eps_cancel");
    }
  }
};

/// Base class for all library failures. `kind` lets callers (the CLI in
/// particular) map failures to exit codes without string matching.
class RetrofitError : public std::runtime_error {
 public:
  enum class Kind {
    kInvalidInput,
    kNumerical,
    kAssumption1,
    kAssumption2,
    kPartition,
    kRelativeDegree,
    kRiccati,
    kStabilizability,
    kIllPosed,
    kVerification,
  };

  RetrofitError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace retrofit
