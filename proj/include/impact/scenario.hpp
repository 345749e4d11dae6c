#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "impact/claim.hpp"
#include "impact/utility.hpp"

namespace impact {

inline constexpr const char* engine_version = "1.0.0";

/// Payoffs of the traded assets.
enum class Traded {
    bachelier,  // f^j = B_T^j
    example1,   // the incomplete-market demonstration asset
};

struct NumericsConfig {
    int quad_order = 64;
    int mc_paths = 10000;
    int time_steps = 64;
    std::uint64_t seed = 42;
    double sv_tolerance = 1e-8;    // singularity threshold on min singular value
    double root_tolerance = 1e-10; // residual tolerance of the price equation
};

/// Full market description: dimension, horizon, market-maker wealth,
/// utility, claim, traded payoffs and numerical settings.
struct Scenario {
    int num_assets = 1;           // J
    double horizon = 1.0;         // T
    double initial_wealth = 0.0;  // x, market maker's cash endowment
    UtilitySpec utility;
    ClaimSpec claim;
    Traded traded = Traded::bachelier;
    double example1_time = 0.0;   // tau, only used when traded == example1
    NumericsConfig numerics;
    double hedge_threshold = 0.05;  // rms gate used by the hedge command
};

/// A point (t, b): all conditional quantities are functions of the time and
/// the current Brownian level.
struct State {
    double t = 0.0;
    std::vector<double> b;
};

inline State make_state(double t, std::initializer_list<double> b) {
    return State{t, std::vector<double>(b)};
}

/// Scenario plus the derived constants the assumptions guarantee.
struct ValidatedScenario {
    Scenario scenario;
    double c1 = 0.0;           // 1 / max_i gamma_i
    double c2 = 0.0;           // 1 / min_i gamma_i
    double growth_bound = 0.0; // linear-growth constant of the claim
};

/// Non-throwing variant of validate(): returns the full diagnostic list.
inline std::vector<std::string> scenario_issues(const Scenario& s) {
    std::vector<std::string> issues;
    auto take = [&issues](auto&& fn) {
        try {
            fn();
        } catch (const ValidationError& e) {
            issues.push_back(e.what());
        }
    };
    if (s.num_assets < 1) issues.push_back("validation: J: must be a positive integer");
    if (!(s.horizon > 0.0)) issues.push_back("validation: T: must be positive");
    if (!std::isfinite(s.initial_wealth)) issues.push_back("validation: x: must be finite");
    take([&] { check_utility(s.utility); });
    take([&] { check_claim(s.claim, static_cast<std::size_t>(s.num_assets)); });
    if (s.numerics.quad_order < 2)
        issues.push_back("validation: numerics.quad_order: must be >= 2");
    if (s.numerics.mc_paths < 1) issues.push_back("validation: numerics.mc_paths: must be >= 1");
    if (s.numerics.time_steps < 1)
        issues.push_back("validation: numerics.time_steps: must be >= 1");
    if (!(s.numerics.sv_tolerance > 0.0))
        issues.push_back("validation: numerics.sv_tolerance: must be positive");
    if (!(s.numerics.root_tolerance > 0.0))
        issues.push_back("validation: numerics.root_tolerance: must be positive");

    if (s.traded == Traded::example1) {
        // The demonstration works only in its fixed setting: one asset,
        // g = B_T and U(x) = -exp(-x).
        if (s.num_assets != 1) issues.push_back("validation: J: example1 requires J = 1");
        if (!(s.example1_time > 0.0 && s.example1_time < s.horizon))
            issues.push_back("validation: tau: example1 requires 0 < tau < T");
        const auto* sep = std::get_if<SeparableClaim>(&s.claim);
        const bool linear_claim = sep && sep->payoffs.size() == 1 &&
                                  sep->payoffs[0].breakpoints.empty() &&
                                  sep->payoffs[0].slopes == std::vector<double>{1.0} &&
                                  sep->payoffs[0].anchor_y == 0.0 && sep->weights[0] == 1.0;
        if (!linear_claim)
            issues.push_back("validation: claim: example1 requires the fixed claim g = B_T");
        const bool unit_exp = s.utility.terms.size() == 1 && s.utility.terms[0].weight == 1.0 &&
                              s.utility.terms[0].rate == 1.0;
        if (!unit_exp)
            issues.push_back("validation: utility: example1 requires U(x) = -exp(-x)");
    }
    return issues;
}

/// Validate and annotate a scenario.  Throws ValidationError naming the
/// first offending field.
inline ValidatedScenario validate(const Scenario& s) {
    if (s.num_assets < 1) throw ValidationError("J", "must be a positive integer");
    if (!(s.horizon > 0.0)) throw ValidationError("T", "must be positive");
    if (!std::isfinite(s.initial_wealth)) throw ValidationError("x", "must be finite");
    check_utility(s.utility);
    check_claim(s.claim, static_cast<std::size_t>(s.num_assets));
    if (s.numerics.quad_order < 2) throw ValidationError("numerics.quad_order", "must be >= 2");
    if (s.numerics.mc_paths < 1) throw ValidationError("numerics.mc_paths", "must be >= 1");
    if (s.numerics.time_steps < 1) throw ValidationError("numerics.time_steps", "must be >= 1");
    if (!(s.numerics.sv_tolerance > 0.0))
        throw ValidationError("numerics.sv_tolerance", "must be positive");
    if (!(s.numerics.root_tolerance > 0.0))
        throw ValidationError("numerics.root_tolerance", "must be positive");

    if (s.traded == Traded::example1) {
        if (s.num_assets != 1) throw ValidationError("J", "example1 requires J = 1");
        if (!(s.example1_time > 0.0 && s.example1_time < s.horizon))
            throw ValidationError("tau", "example1 requires 0 < tau < T");
        const auto* sep = std::get_if<SeparableClaim>(&s.claim);
        const bool linear_claim = sep && sep->payoffs.size() == 1 &&
                                  sep->payoffs[0].breakpoints.empty() &&
                                  sep->payoffs[0].slopes == std::vector<double>{1.0} &&
                                  sep->payoffs[0].anchor_y == 0.0 && sep->weights[0] == 1.0;
        if (!linear_claim)
            throw ValidationError("claim", "example1 requires the fixed claim g = B_T");
        const bool unit_exp = s.utility.terms.size() == 1 && s.utility.terms[0].weight == 1.0 &&
                              s.utility.terms[0].rate == 1.0;
        if (!unit_exp) throw ValidationError("utility", "example1 requires U(x) = -exp(-x)");
    }

    ValidatedScenario v;
    v.scenario = s;
    v.c1 = 1.0 / s.utility.max_rate();
    v.c2 = 1.0 / s.utility.min_rate();
    v.growth_bound = claim_growth_bound(s.claim);
    return v;
}

}  // namespace impact
