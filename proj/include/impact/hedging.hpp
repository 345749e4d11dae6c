#pragma once

// Hedging strategy from the martingale representation: eta is the integrand
// of the claim surface against the pricing-measure Brownian motion, the
// price surface has integrand sigma, so the holdings solve sigma^T H = eta.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "impact/dynamics.hpp"
#include "impact/linalg.hpp"

namespace impact {

struct HedgeRatio {
    std::vector<double> eta;  // integrand of the claim surface
    std::vector<double> H;    // holdings in each risky asset
    double cond = 0.0;        // smallest singular value of the sigma used
    bool warn = false;        // near-degenerate but formally complete state
};

/// Integrand of Etilde[g | F_t] against Btilde.  For a claim g = G(B_T)
/// this is Etilde[dG_j | b] plus the measure-change covariance term; both
/// come out of the same state evaluation as sigma.
inline std::vector<double> clark_ocone_integrand(const TiltedMeasure& m, const State& state) {
    return evaluate_state(m, state).eta;
}

namespace detail {

inline HedgeRatio hedge_from_parts(const Matrix& sigma, const std::vector<double>& eta,
                                   double t, const Scenario& s) {
    HedgeRatio h;
    h.eta = eta;
    h.cond = min_singular_value(sigma);
    if (h.cond < s.numerics.sv_tolerance) {
        std::ostringstream msg;
        msg << "market numerically incomplete at state t = " << t
            << " (min singular value " << h.cond << ")";
        throw IncompleteMarketError(msg.str(), t, h.cond);
    }
    h.warn = h.cond < 1e-4;

    const bool diagonal_fast_path = std::holds_alternative<SeparableClaim>(s.claim) &&
                                    s.utility.single_exponential();
    if (diagonal_fast_path) {
        h.H.resize(eta.size());
        for (std::size_t j = 0; j < eta.size(); ++j) h.H[j] = eta[j] / sigma(j, j);
    } else {
        h.H = solve_linear(sigma.transposed(), eta);
    }
    return h;
}

}  // namespace detail

/// Holdings from an already-computed state evaluation.
inline HedgeRatio hedge_ratio_from_eval(const StateEval& ev, const Scenario& s) {
    return detail::hedge_from_parts(ev.sigma, ev.eta, ev.state.t, s);
}

/// Ratio-of-deltas cross-check for diagonal volatility: bump each
/// coordinate and form (dghat/db_j) / (dstilde_j/db_j).  Slow; meant for
/// diagnostics, not for the replication loop.
inline std::vector<double> hedge_fd_cross_check(const TiltedMeasure& m, const State& state,
                                                double bump = 1e-5) {
    const std::size_t dim = state.b.size();
    std::vector<double> out(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        State up = state, dn = state;
        up.b[j] += bump;
        dn.b[j] -= bump;
        const StateEval eu = evaluate_state(m, up);
        const StateEval ed = evaluate_state(m, dn);
        out[j] = (eu.ghat - ed.ghat) / (eu.stilde[j] - ed.stilde[j]);
    }
    return out;
}

/// H(t, b) = (sigma^T)^{-1} eta.  Throws IncompleteMarketError when sigma is
/// numerically singular at the state (the Example-1 situation).
inline HedgeRatio hedge_ratio(const TiltedMeasure& m, const State& state) {
    const Scenario& s = m.scenario->scenario;
    if (s.traded == Traded::example1) {
        const auto dyn = example1_dynamics(state.t, state.b[0], s.example1_time);
        if (dyn.sigma == 0.0) {
            std::ostringstream msg;
            msg << "market incomplete on [0, tau): the traded price has zero volatility at t = "
                << state.t << " < tau = " << s.example1_time
                << ", so the claim cannot be represented as an integral against it";
            throw IncompleteMarketError(msg.str(), state.t, 0.0);
        }
        HedgeRatio h;
        h.eta = {1.0};  // g = B_T has unit integrand against Btilde
        h.H = {1.0 / dyn.sigma};
        h.cond = dyn.sigma;
        return h;
    }
    return hedge_ratio_from_eval(evaluate_state(m, state), s);
}

}  // namespace impact
