#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace impact {

struct EngineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Scenario rejected; `field` names the offending config entry.
struct ValidationError : EngineError {
    ValidationError(std::string field_, const std::string& what_)
        : EngineError("validation: " + field_ + ": " + what_), field(std::move(field_)) {}
    std::string field;
};

/// The price equation has more than one root inside the scanned bracket.
/// All roots found are reported; the engine refuses to pick one.
struct NonUniquePriceError : EngineError {
    explicit NonUniquePriceError(std::vector<double> roots_)
        : EngineError("price equation has multiple roots"), roots(std::move(roots_)) {}
    std::vector<double> roots;
};

/// The volatility matrix is numerically singular at some state, so the
/// replication system cannot be solved there.
struct IncompleteMarketError : EngineError {
    IncompleteMarketError(const std::string& what_, double t_, double min_sv_)
        : EngineError(what_), t(t_), min_sv(min_sv_) {}
    double t;
    double min_sv;
};

/// Non-finite value produced where a finite one is required (usually an
/// integrand blowing up, which signals a validation breach upstream).
struct NumericsError : EngineError {
    using EngineError::EngineError;
};

}  // namespace impact
