#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "impact/errors.hpp"

namespace impact {

/// One exponential component of the market maker's utility.
struct ExpTerm {
    double weight;  // c_i > 0
    double rate;    // gamma_i > 0
};

/// Finite mixture of exponential utilities,
///
///   U(z) = sum_i -c_i exp(-gamma_i z) / gamma_i.
///
/// Strictly increasing and strictly concave, with absolute risk aversion
/// pinned between min_i gamma_i and max_i gamma_i.  Mixtures keep every
/// derivative in closed form, which the tilted-measure integrals rely on.
struct UtilitySpec {
    std::vector<ExpTerm> terms;

    double value(double z) const {
        double u = 0.0;
        for (const auto& tm : terms) u -= tm.weight * std::exp(-tm.rate * z) / tm.rate;
        return u;
    }

    /// U'(z) = sum_i c_i exp(-gamma_i z) > 0.
    double marginal(double z) const {
        double du = 0.0;
        for (const auto& tm : terms) du += tm.weight * std::exp(-tm.rate * z);
        return du;
    }

    /// U''(z) = -sum_i c_i gamma_i exp(-gamma_i z) < 0.
    double second(double z) const {
        double d2u = 0.0;
        for (const auto& tm : terms) d2u -= tm.weight * tm.rate * std::exp(-tm.rate * z);
        return d2u;
    }

    /// Absolute risk aversion A(z) = -U''(z)/U'(z).
    double risk_aversion(double z) const { return -second(z) / marginal(z); }

    double min_rate() const {
        double m = terms.front().rate;
        for (const auto& tm : terms) m = std::min(m, tm.rate);
        return m;
    }

    double max_rate() const {
        double m = terms.front().rate;
        for (const auto& tm : terms) m = std::max(m, tm.rate);
        return m;
    }

    bool single_exponential() const { return terms.size() == 1; }

    /// Rate of the single exponential term; only meaningful when
    /// single_exponential() holds.
    double rate() const { return terms.front().rate; }
};

struct UtilityEval {
    double u;
    double du;
    double d2u;
    double a;  // absolute risk aversion
};

inline UtilityEval utility_eval(const UtilitySpec& spec, double z) {
    UtilityEval e;
    e.u = spec.value(z);
    e.du = spec.marginal(z);
    e.d2u = spec.second(z);
    e.a = -e.d2u / e.du;
    return e;
}

inline void check_utility(const UtilitySpec& spec) {
    if (spec.terms.empty())
        throw ValidationError("utility.terms", "at least one exponential term is required");
    for (const auto& tm : spec.terms) {
        if (!(tm.weight > 0.0))
            throw ValidationError("utility.term.weight", "non-positive weight");
        if (!(tm.rate > 0.0))
            throw ValidationError("utility.term.rate", "non-positive rate");
    }
    // Monotonicity, concavity and the risk-aversion band are automatic for
    // this family; assert them at sampled points anyway.
    const double gmin = spec.min_rate();
    const double gmax = spec.max_rate();
    for (double z = -8.0; z <= 8.0; z += 0.5) {
        const auto e = utility_eval(spec, z);
        if (!(e.du > 0.0)) throw ValidationError("utility", "U' not positive at sample point");
        if (!(e.d2u < 0.0)) throw ValidationError("utility", "U'' not negative at sample point");
        if (e.a < gmin * (1.0 - 1e-9) || e.a > gmax * (1.0 + 1e-9))
            throw ValidationError("utility", "risk aversion outside [min rate, max rate]");
    }
}

}  // namespace impact
