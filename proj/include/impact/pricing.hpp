#pragma once

// Price solver and tilted pricing measure.  The price p solves
//
//   psi(p) = E[(p - G(Z)) U'(x + p - G(Z))] = 0,  Z ~ N(0, T I),
//
// and the un-normalized measure weight is w(z) = U'(x + p - G(z)).  Root
// finding runs on psi(p)/U'(x + p), which has the same zeros but stays
// bounded for large |p|.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "impact/gauss.hpp"
#include "impact/scenario.hpp"

namespace impact {

/// The solved price together with the pricing-measure weight.  weight(z) is
/// strictly positive, so the measure is equivalent to the base one.
struct TiltedMeasure {
    double p = 0.0;
    double norm0 = 0.0;  // E[weight(Z)] at the initial state
    std::shared_ptr<const ValidatedScenario> scenario;
    std::optional<double> closed_form_p;  // single-exponential utilities only
    std::vector<double> roots;            // all roots found by the scan
    double base_price = 0.0;              // untilted E[G(Z)], the solver's start

    double weight(const std::vector<double>& z) const {
        const Scenario& s = scenario->scenario;
        return s.utility.marginal(s.initial_wealth + p - claim_value(s.claim, z));
    }
};

/// Un-normalized pricing density at terminal value z.
inline double tilt_weight(const TiltedMeasure& m, const std::vector<double>& z) {
    return m.weight(z);
}

namespace detail {

// Per mixture term u the solver needs only the two unconditional moments
//   W_u  = E[exp(gamma_u G(Z))],  WG_u = E[G(Z) exp(gamma_u G(Z))],
// both independent of p.
struct TiltMoments {
    std::vector<double> w;
    std::vector<double> wg;
};

inline TiltMoments unconditional_tilt_moments(const ValidatedScenario& vs) {
    const Scenario& s = vs.scenario;
    const auto& terms = s.utility.terms;
    const double var = s.horizon;
    const QuadRule& rule = quad_rule(s.numerics.quad_order);
    TiltMoments tm;
    tm.w.assign(terms.size(), 1.0);
    tm.wg.assign(terms.size(), 0.0);

    if (const auto* sep = std::get_if<SeparableClaim>(&s.claim)) {
        const std::size_t dim = sep->dimension();
        for (std::size_t u = 0; u < terms.size(); ++u) {
            const double rate = terms[u].rate;
            double prod = 1.0;
            double mean_sum = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const auto& phi = sep->payoffs[j];
                const double cj = sep->weights[j];
                const GaussGrid grid = gauss_grid_1d(0.0, var, phi.breakpoints, rule);
                double f0 = 0.0, fphi = 0.0;
                for (std::size_t k = 0; k < grid.points.size(); ++k) {
                    const double y = cj * phi(grid.points[k]);
                    const double e = std::exp(rate * y) * grid.weights[k];
                    f0 += e;
                    fphi += y * e;
                }
                if (!std::isfinite(f0) || !std::isfinite(fphi))
                    throw NumericsError("non-finite tilted moment (validation breach)");
                prod *= f0;
                mean_sum += fphi / f0;
            }
            tm.w[u] = prod;
            tm.wg[u] = prod * mean_sum;
        }
        return tm;
    }

    // smooth claim: one tensor pass, all mixture terms accumulated together
    State origin{0.0, std::vector<double>(claim_dimension(s.claim), 0.0)};
    for (std::size_t u = 0; u < terms.size(); ++u) {
        const double rate = terms[u].rate;
        tm.w[u] = cond_expect_nd(
                      origin, s.horizon,
                      [&](const std::vector<double>& z) {
                          return std::exp(rate * claim_value(s.claim, z));
                      },
                      NdMethod::tensor, s.numerics)
                      .value;
        tm.wg[u] = cond_expect_nd(
                       origin, s.horizon,
                       [&](const std::vector<double>& z) {
                           const double g = claim_value(s.claim, z);
                           return g * std::exp(rate * g);
                       },
                       NdMethod::tensor, s.numerics)
                       .value;
    }
    return tm;
}

// psi(p) / U'(x + p), computed with the mixture weights rescaled so the
// largest exponential is O(1); stays finite for any p.
inline double psi_normalized(const ValidatedScenario& vs, const TiltMoments& tm, double p) {
    const auto& terms = vs.scenario.utility.terms;
    const double xp = vs.scenario.initial_wealth + p;
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& t : terms) mx = std::max(mx, std::log(t.weight) - t.rate * xp);
    double num = 0.0, den = 0.0;
    for (std::size_t u = 0; u < terms.size(); ++u) {
        const double c = std::exp(std::log(terms[u].weight) - terms[u].rate * xp - mx);
        num += c * (p * tm.w[u] - tm.wg[u]);
        den += c;
    }
    return num / den;
}

// E[weight] and E[G weight] at a candidate p (true scale).
inline std::pair<double, double> weight_moments(const ValidatedScenario& vs,
                                                const TiltMoments& tm, double p) {
    const auto& terms = vs.scenario.utility.terms;
    const double xp = vs.scenario.initial_wealth + p;
    double ew = 0.0, egw = 0.0;
    for (std::size_t u = 0; u < terms.size(); ++u) {
        const double a = terms[u].weight * std::exp(-terms[u].rate * xp);
        ew += a * tm.w[u];
        egw += a * tm.wg[u];
    }
    return {ew, egw};
}

// Safeguarded secant/bisection on a bracketing interval [a, b], psi(a) < 0 < psi(b).
inline double refine_root(const std::function<double(double)>& f, double a, double b, double fa,
                          double fb) {
    double x = a, fx = fa;
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a) + std::abs(b));
         ++it) {
        double cand;
        if (fb != fa) {
            cand = (a * fb - b * fa) / (fb - fa);
            if (!(cand > a && cand < b)) cand = 0.5 * (a + b);
        } else {
            cand = 0.5 * (a + b);
        }
        // force progress when the secant point sticks to an endpoint
        const double w = b - a;
        if (cand - a < 1e-3 * w) cand = a + 1e-3 * w;
        if (b - cand < 1e-3 * w) cand = b - 1e-3 * w;
        x = cand;
        fx = f(x);
        if (fx == 0.0) return x;
        if (fx < 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    return std::abs(fa) < std::abs(fb) ? a : b;
}

}  // namespace detail

/// Untilted expectation of the claim, E[G(Z)] with Z ~ N(0, T I).
inline double base_claim_expectation(const ValidatedScenario& vs) {
    const Scenario& s = vs.scenario;
    const QuadRule& rule = quad_rule(s.numerics.quad_order);
    if (const auto* sep = std::get_if<SeparableClaim>(&s.claim)) {
        double total = 0.0;
        for (std::size_t j = 0; j < sep->dimension(); ++j) {
            const auto& phi = sep->payoffs[j];
            total += sep->weights[j] *
                     cond_expect_1d(0.0, s.horizon, [&phi](double y) { return phi(y); },
                                    phi.breakpoints, rule);
        }
        return total;
    }
    State origin{0.0, std::vector<double>(claim_dimension(s.claim), 0.0)};
    return cond_expect_nd(
               origin, s.horizon,
               [&](const std::vector<double>& z) { return claim_value(s.claim, z); },
               NdMethod::tensor, s.numerics)
        .value;
}

/// Solve the price equation.  The bracket is grown geometrically from
/// E[G(Z)] until a sign change appears; a scan then looks for additional
/// roots and refuses to choose silently if it finds any.
inline TiltedMeasure solve_price(const std::shared_ptr<const ValidatedScenario>& vs) {
    const detail::TiltMoments tm = detail::unconditional_tilt_moments(*vs);
    const auto psi_n = [&](double p) { return detail::psi_normalized(*vs, tm, p); };

    const double p0 = base_claim_expectation(*vs);

    double step = std::max(1.0, 0.5 * (1.0 + std::abs(p0)));
    double lo = p0 - step, hi = p0 + step;
    double flo = psi_n(lo), fhi = psi_n(hi);
    int doublings = 0;
    while (flo > 0.0) {
        step *= 2.0;
        lo -= step;
        flo = psi_n(lo);
        if (++doublings > 80)
            throw EngineError("price bracket not found: lower expansion exhausted "
                              "(integrability or validation failure)");
    }
    doublings = 0;
    step = std::max(1.0, 0.5 * (1.0 + std::abs(p0)));
    while (fhi < 0.0) {
        step *= 2.0;
        hi += step;
        fhi = psi_n(hi);
        if (++doublings > 80)
            throw EngineError("price bracket not found: upper expansion exhausted "
                              "(integrability or validation failure)");
    }

    // scan for sign changes; mixtures are not covered by the uniqueness proof
    const int cells = 128;
    std::vector<double> roots;
    double prev_x = lo, prev_f = flo;
    for (int i = 1; i <= cells; ++i) {
        const double x = lo + (hi - lo) * i / cells;
        const double fx = i == cells ? fhi : psi_n(x);
        if (prev_f == 0.0) {
            roots.push_back(prev_x);
        } else if (fx != 0.0 && ((prev_f < 0.0) != (fx < 0.0))) {
            const bool up = prev_f < 0.0;
            roots.push_back(up ? detail::refine_root(psi_n, prev_x, x, prev_f, fx)
                               : detail::refine_root([&](double q) { return -psi_n(q); }, prev_x,
                                                     x, -prev_f, -fx));
        }
        prev_x = x;
        prev_f = fx;
    }
    if (roots.empty()) roots.push_back(detail::refine_root(psi_n, lo, hi, flo, fhi));
    if (roots.size() > 1) throw NonUniquePriceError(roots);

    TiltedMeasure m;
    m.p = roots.front();
    m.roots = roots;
    m.scenario = vs;
    m.base_price = p0;
    if (vs->scenario.utility.single_exponential()) {
        m.closed_form_p = tm.wg[0] / tm.w[0];
        if (std::abs(m.p - *m.closed_form_p) >
            std::max(vs->scenario.numerics.root_tolerance, 1e-10) * std::max(1.0, std::abs(m.p)))
            throw NumericsError("root and exponential closed form disagree");
    }
    m.norm0 = detail::weight_moments(*vs, tm, m.p).first;
    return m;
}

/// Self-consistency residuals of a solved measure.
struct PricingReport {
    double p = 0.0;
    double psi_residual = 0.0;        // E[(p - g) weight]
    double tilt_expectation_gap = 0.0;  // Etilde[g] - p
    double closed_form_gap = 0.0;       // 0 when not applicable
    double stilde0_gap = 0.0;           // filled by the dynamics-level report
    bool unique = true;
};

inline PricingReport consistency_report(const TiltedMeasure& m) {
    const detail::TiltMoments tm = detail::unconditional_tilt_moments(*m.scenario);
    const auto [ew, egw] = detail::weight_moments(*m.scenario, tm, m.p);
    PricingReport r;
    r.p = m.p;
    r.psi_residual = m.p * ew - egw;
    r.tilt_expectation_gap = egw / ew - m.p;
    r.closed_form_gap = m.closed_form_p ? m.p - *m.closed_form_p : 0.0;
    r.unique = m.roots.size() == 1;
    return r;
}

}  // namespace impact
