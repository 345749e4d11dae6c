#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "impact/errors.hpp"

namespace impact {

/// Continuous piecewise-linear function of one variable.
///
/// Defined by strictly increasing breakpoints, one slope per segment
/// (slopes.size() == breakpoints.size() + 1) and an anchor value.  The
/// derivative at a breakpoint follows the right-derivative convention.
/// Linear growth keeps every exponential moment against Gaussian laws
/// finite, which the pricing integrals require.
struct PiecewiseLinear {
    std::vector<double> breakpoints;
    std::vector<double> slopes;
    double anchor_x = 0.0;
    double anchor_y = 0.0;

    double operator()(double x) const {
        // walk segments from the anchor to x, accumulating slope * length
        double y = anchor_y;
        double pos = anchor_x;
        if (x >= pos) {
            std::size_t i = segment(pos);
            while (i < breakpoints.size() && breakpoints[i] <= x) {
                y += slopes[i] * (breakpoints[i] - pos);
                pos = breakpoints[i];
                ++i;
            }
            return y + slopes[i] * (x - pos);
        }
        std::size_t i = segment(pos);
        while (i > 0 && breakpoints[i - 1] >= x) {
            y -= slopes[i] * (pos - breakpoints[i - 1]);
            pos = breakpoints[i - 1];
            --i;
        }
        return y - slopes[i] * (pos - x);
    }

    /// a.e. derivative, right-continuous at breakpoints.
    double derivative(double x) const { return slopes[segment(x)]; }

    bool convex() const {
        for (std::size_t i = 1; i < slopes.size(); ++i)
            if (slopes[i] < slopes[i - 1]) return false;
        return true;
    }

    double max_abs_slope() const {
        double m = 0.0;
        for (double s : slopes) m = std::max(m, std::abs(s));
        return m;
    }

    /// index of the segment containing x (number of breakpoints <= x)
    std::size_t segment(double x) const {
        return static_cast<std::size_t>(
            std::upper_bound(breakpoints.begin(), breakpoints.end(), x) - breakpoints.begin());
    }
};

inline PiecewiseLinear call_payoff(double strike) {
    return {{strike}, {0.0, 1.0}, strike, 0.0};
}

inline PiecewiseLinear put_payoff(double strike) {
    return {{strike}, {-1.0, 0.0}, strike, 0.0};
}

inline PiecewiseLinear straddle_payoff(double strike) {
    return {{strike}, {-1.0, 1.0}, strike, 0.0};
}

inline PiecewiseLinear linear_payoff(double slope = 1.0) {
    return {{}, {slope}, 0.0, 0.0};
}

inline PiecewiseLinear constant_payoff(double level) {
    return {{}, {0.0}, 0.0, level};
}

/// Claim of the form G(x) = sum_j c_j phi_j(x^j) with c_j >= 0 and
/// piecewise-linear phi_j.  Its gradient exists a.e. and is evaluated with
/// the right-derivative convention at the kinks.
struct SeparableClaim {
    std::vector<PiecewiseLinear> payoffs;
    std::vector<double> weights;

    std::size_t dimension() const { return payoffs.size(); }

    double value(const std::vector<double>& z) const {
        double g = 0.0;
        for (std::size_t j = 0; j < payoffs.size(); ++j) g += weights[j] * payoffs[j](z[j]);
        return g;
    }

    void gradient(const std::vector<double>& z, std::vector<double>& out) const {
        out.resize(payoffs.size());
        for (std::size_t j = 0; j < payoffs.size(); ++j)
            out[j] = weights[j] * payoffs[j].derivative(z[j]);
    }

    bool convex() const {
        for (const auto& p : payoffs)
            if (!p.convex()) return false;
        return true;
    }
};

/// Caller-supplied smooth claim with an explicit gradient and a declared
/// linear-growth bound |G(z)| <= growth_bound * (1 + |z|_1) + offset.
struct SmoothClaim {
    std::function<double(const std::vector<double>&)> payoff;
    std::function<std::vector<double>(const std::vector<double>&)> gradient;
    double growth_bound = 1.0;
    std::size_t dim = 1;
};

using ClaimSpec = std::variant<SeparableClaim, SmoothClaim>;

inline std::size_t claim_dimension(const ClaimSpec& c) {
    if (const auto* s = std::get_if<SeparableClaim>(&c)) return s->dimension();
    return std::get<SmoothClaim>(c).dim;
}

inline double claim_value(const ClaimSpec& c, const std::vector<double>& z) {
    if (const auto* s = std::get_if<SeparableClaim>(&c)) return s->value(z);
    return std::get<SmoothClaim>(c).payoff(z);
}

inline void claim_gradient(const ClaimSpec& c, const std::vector<double>& z,
                           std::vector<double>& out) {
    if (const auto* s = std::get_if<SeparableClaim>(&c)) {
        s->gradient(z, out);
        return;
    }
    out = std::get<SmoothClaim>(c).gradient(z);
}

/// Payoff and a.e. gradient in one call.
inline std::pair<double, std::vector<double>> claim_eval(const ClaimSpec& c,
                                                         const std::vector<double>& z) {
    std::pair<double, std::vector<double>> r;
    r.first = claim_value(c, z);
    claim_gradient(c, z, r.second);
    return r;
}

/// Kink locations of coordinate j (empty for smooth claims).
inline std::vector<double> claim_breakpoints(const ClaimSpec& c, std::size_t j) {
    if (const auto* s = std::get_if<SeparableClaim>(&c)) return s->payoffs[j].breakpoints;
    return {};
}

inline double claim_growth_bound(const ClaimSpec& c) {
    if (const auto* s = std::get_if<SeparableClaim>(&c)) {
        double b = 0.0;
        for (std::size_t j = 0; j < s->payoffs.size(); ++j)
            b += s->weights[j] * s->payoffs[j].max_abs_slope();
        return b;
    }
    return std::get<SmoothClaim>(c).growth_bound;
}

inline void check_claim(const ClaimSpec& c, std::size_t expected_dim) {
    if (claim_dimension(c) != expected_dim)
        throw ValidationError("claim", "claim dimension does not match J");
    if (const auto* s = std::get_if<SeparableClaim>(&c)) {
        if (s->payoffs.size() != s->weights.size())
            throw ValidationError("claim.weights", "one weight per coordinate payoff required");
        for (std::size_t j = 0; j < s->payoffs.size(); ++j) {
            const auto& p = s->payoffs[j];
            if (s->weights[j] < 0.0)
                throw ValidationError("claim.weight", "negative claim weight");
            if (p.slopes.size() != p.breakpoints.size() + 1)
                throw ValidationError("claim.slopes", "need breakpoints + 1 slopes");
            for (std::size_t k = 1; k < p.breakpoints.size(); ++k)
                if (!(p.breakpoints[k] > p.breakpoints[k - 1]))
                    throw ValidationError("claim.breakpoints",
                                          "breakpoints must be strictly increasing");
        }
    } else {
        const auto& sm = std::get<SmoothClaim>(c);
        if (!sm.payoff || !sm.gradient)
            throw ValidationError("claim", "smooth claim requires payoff and gradient");
        if (!(sm.growth_bound >= 0.0) || !std::isfinite(sm.growth_bound))
            throw ValidationError("claim.growth_bound", "finite growth bound required");
    }
}

}  // namespace impact
