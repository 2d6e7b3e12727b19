#pragma once

#include <stdexcept>
#include <string>

namespace s3 {

/** Base class for solver failures; CLI maps these to exit code 1. */
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// Newton (or closed-form) preimage search did not converge.
struct InversionFailure : SolverError {
    explicit InversionFailure(const std::string& what) : SolverError(what) {}
};

/// Power iteration shows no sustained contraction toward an unstable direction.
struct DegenerateStart : SolverError {
    explicit DegenerateStart(const std::string& what) : SolverError(what) {}
};

/// <T_* Xu, Xu> fell to 1 or below at a converged sample: no expansion there.
struct NonHyperbolicSample : SolverError {
    explicit NonHyperbolicSample(const std::string& what) : SolverError(what) {}
};

/// A backward window is shorter than the configured truncation order.
struct WindowTooShort : SolverError {
    explicit WindowTooShort(const std::string& what) : SolverError(what) {}
};

/// A transfer-operator lift failed to contract over the probe window.
struct ContractionViolation : SolverError {
    explicit ContractionViolation(const std::string& what) : SolverError(what) {}
};

/// An analytic derivative callback is required but absent, and finite
/// differencing was disabled.
struct DerivativeUnavailable : SolverError {
    explicit DerivativeUnavailable(const std::string& what) : SolverError(what) {}
};

/// Pushforward depth and node count are inconsistent per the error model.
struct NodeBudgetExceeded : SolverError {
    explicit NodeBudgetExceeded(const std::string& what) : SolverError(what) {}
};

/** Configuration file problems; CLI maps these to exit code 2. */
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace s3
