#pragma once

#include <stdexcept>
#include <string>

namespace stableou {

/// Input outside the mathematical domain of an operation (bad beta, r, n, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Adaptive quadrature or series evaluation could not reach the requested accuracy.
class AccuracyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed files, configs, or command-line values.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Closed set of reasons an estimation pipeline can fail.
enum class FailureReason {
    lad_degenerate_design,
    pv_ratio_out_of_range,
    r_outside_beta_window,
    singular_hessian,
    singular_information,
    refine_not_converged,
    non_finite,
    accuracy_not_reached,
};

inline const char* to_string(FailureReason r) {
    switch (r) {
    case FailureReason::lad_degenerate_design: return "lad_degenerate_design";
    case FailureReason::pv_ratio_out_of_range: return "pv_ratio_out_of_range";
    case FailureReason::r_outside_beta_window: return "r >= beta window";
    case FailureReason::singular_hessian: return "singular_hessian";
    case FailureReason::singular_information: return "singular_information";
    case FailureReason::refine_not_converged: return "refine_not_converged";
    case FailureReason::non_finite: return "non_finite";
    case FailureReason::accuracy_not_reached: return "accuracy_not_reached";
    }
    return "unknown";
}

inline constexpr FailureReason all_failure_reasons[] = {
    FailureReason::lad_degenerate_design, FailureReason::pv_ratio_out_of_range,
    FailureReason::r_outside_beta_window, FailureReason::singular_hessian,
    FailureReason::singular_information,  FailureReason::refine_not_converged,
    FailureReason::non_finite,            FailureReason::accuracy_not_reached,
};

/// Raised by the estimators; carries the stage that failed and a closed reason code.
class EstimationError : public std::runtime_error {
public:
    EstimationError(FailureReason reason, std::string stage, const std::string& detail)
        : std::runtime_error(stage + ": " + to_string(reason) + (detail.empty() ? "" : " (" + detail + ")")),
          reason_(reason), stage_(std::move(stage)) {}

    FailureReason reason() const noexcept { return reason_; }
    const std::string& stage() const noexcept { return stage_; }

private:
    FailureReason reason_;
    std::string stage_;
};

}  // namespace stableou
