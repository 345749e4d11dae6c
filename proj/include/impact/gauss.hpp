#pragma once

// Conditional-expectation kernel.  Everything downstream reduces to
// integrals of the terminal Brownian value against N(b, (T-t) I); this
// header provides the Gauss-Hermite / Gauss-Legendre machinery, kink-aware
// segment splitting and a seeded Monte Carlo fallback.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "impact/errors.hpp"
#include "impact/rng.hpp"
#include "impact/scenario.hpp"

namespace impact {

/// Probabilists' Gauss-Hermite rule: sum_i w_i f(x_i) ~ E[f(Z)], Z ~ N(0,1).
/// Weights sum to one; a rule of order n integrates monomials z^k exactly
/// for k <= 2n - 1.
struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::size_t order() const { return nodes.size(); }
};

namespace detail {

// Eigenvalues of a symmetric tridiagonal matrix by the implicit-shift QL
// algorithm, tracking only the first row of the eigenvector matrix (all the
// Golub-Welsch weights need).
inline void tridiag_ql(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z0) {
    const std::size_t n = d.size();
    e.push_back(0.0);
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 + 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (++iter > 60) throw NumericsError("quadrature eigensolver failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                bool underflow = false;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    f = z0[i + 1];
                    z0[i + 1] = s * z0[i] + c * f;
                    z0[i] = c * z0[i] - s * f;
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

}  // namespace detail

/// Build (and cache) the probabilists' Gauss-Hermite rule of a given order.
inline const QuadRule& quad_rule(int order) {
    if (order < 2) throw ValidationError("quad_order", "must be >= 2");
    static std::map<int, QuadRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;

    const std::size_t n = static_cast<std::size_t>(order);
    std::vector<double> d(n, 0.0), e(n - 1), z0(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) e[k - 1] = std::sqrt(static_cast<double>(k));
    z0[0] = 1.0;
    detail::tridiag_ql(d, e, z0);

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&d](std::size_t a, std::size_t b) { return d[a] < d[b]; });

    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        rule.nodes[i] = d[idx[i]];
        rule.weights[i] = z0[idx[i]] * z0[idx[i]];
    }
    // enforce the exact symmetry of the rule
    for (std::size_t i = 0; i < n / 2; ++i) {
        const std::size_t j = n - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.weights[i] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    double sum = 0.0;
    for (double w : rule.weights) sum += w;
    for (double& w : rule.weights) w /= sum;

    return cache.emplace(order, std::move(rule)).first->second;
}

/// Gauss-Legendre rule on [-1, 1], cached per order.
inline const QuadRule& legendre_rule(int order) {
    if (order < 1) throw ValidationError("quad_order", "must be >= 1");
    static std::map<int, QuadRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;

    const std::size_t n = static_cast<std::size_t>(order);
    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double pp = 0.0;
        for (int it2 = 0; it2 < 100; ++it2) {
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * static_cast<double>(k) + 1.0) * x * p1 -
                      static_cast<double>(k) * p2) /
                     (static_cast<double>(k) + 1.0);
            }
            pp = static_cast<double>(n) * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return cache.emplace(order, std::move(rule)).first->second;
}

/// Point estimate with a statistical error bar (zero for quadrature).
struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

/// One-dimensional integration grid against N(mean, var): nodes in payoff
/// space with weights that already include the Gaussian density.
struct GaussGrid {
    std::vector<double> points;
    std::vector<double> weights;
};

namespace detail {

inline double std_normal_pdf(double u) {
    return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}

// Half-width of the standardized integration window.  Mass beyond it is
// negligible for integrands of at most moderate exponential growth.
inline constexpr double kWindow = 16.0;
inline constexpr double kPanelWidth = 1.5;

}  // namespace detail

/// Build the integration grid for E[f(Y)], Y ~ N(mean, var).  Without
/// kinks this is the Gauss-Hermite rule mapped to payoff space.  With
/// kinks the line is split at each breakpoint and covered by composite
/// Gauss-Legendre panels, so integrands that are smooth between kinks are
/// integrated at spectral accuracy.
inline GaussGrid gauss_grid_1d(double mean, double var, const std::vector<double>& breakpoints,
                               const QuadRule& rule) {
    GaussGrid grid;
    const double sd = std::sqrt(var);

    // kinks beyond the window carry no mass and are dropped
    std::vector<double> kinks;
    for (double k : breakpoints) {
        const double u = (k - mean) / sd;
        if (u > -detail::kWindow + 1e-9 && u < detail::kWindow - 1e-9) kinks.push_back(u);
    }
    std::sort(kinks.begin(), kinks.end());
    kinks.erase(std::unique(kinks.begin(), kinks.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                kinks.end());

    if (kinks.empty()) {
        grid.points.resize(rule.order());
        grid.weights = rule.weights;
        for (std::size_t i = 0; i < rule.order(); ++i)
            grid.points[i] = mean + sd * rule.nodes[i];
        return grid;
    }

    std::vector<double> bounds;
    bounds.push_back(-detail::kWindow);
    for (double k : kinks) bounds.push_back(k);
    bounds.push_back(detail::kWindow);

    const int sub_order = std::clamp(static_cast<int>(rule.order()) / 4, 10, 24);
    const QuadRule& gl = legendre_rule(sub_order);

    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
        const double a = bounds[s], b = bounds[s + 1];
        const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / detail::kPanelWidth)));
        const double h = (b - a) / panels;
        for (int p = 0; p < panels; ++p) {
            const double lo = a + p * h;
            for (std::size_t i = 0; i < gl.order(); ++i) {
                const double u = lo + 0.5 * h * (gl.nodes[i] + 1.0);
                grid.points.push_back(mean + sd * u);
                grid.weights.push_back(0.5 * h * gl.weights[i] * detail::std_normal_pdf(u));
            }
        }
    }
    return grid;
}

/// E[fn(Y)] for Y ~ N(mean, var), splitting the domain at the supplied
/// breakpoints.  var == 0 degenerates to fn(mean).
inline double cond_expect_1d(double mean, double var, const std::function<double(double)>& fn,
                             const std::vector<double>& breakpoints, const QuadRule& rule) {
    if (var < 0.0) throw NumericsError("negative variance");
    if (var == 0.0) {
        const double v = fn(mean);
        if (!std::isfinite(v)) throw NumericsError("non-finite integrand at degenerate state");
        return v;
    }
    const GaussGrid grid = gauss_grid_1d(mean, var, breakpoints, rule);
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
        const double v = fn(grid.points[i]);
        if (!std::isfinite(v)) throw NumericsError("non-finite integrand at quadrature node");
        acc += grid.weights[i] * v;
    }
    return acc;
}

enum class NdMethod { tensor, mc };

/// E[fn(Z)] for Z ~ N(b, (T - t) I) in J dimensions.
///
/// tensor: product Gauss grid per coordinate (J <= 3), optionally split at
/// per-coordinate breakpoints; deterministic.  mc: seeded Monte Carlo with
/// a standard-error estimate; the stream is keyed by (seed, label).
inline Estimate cond_expect_nd(const State& state, double horizon,
                               const std::function<double(const std::vector<double>&)>& fn,
                               NdMethod method, const NumericsConfig& cfg,
                               const std::vector<std::vector<double>>& breakpoints = {},
                               const std::string& mc_label = "cond_expect_mc") {
    const std::size_t dim = state.b.size();
    const double var = horizon - state.t;
    if (var < 0.0) throw NumericsError("state beyond the horizon");

    if (var == 0.0) {
        const double v = fn(state.b);
        if (!std::isfinite(v)) throw NumericsError("non-finite integrand at degenerate state");
        return {v, 0.0};
    }

    if (method == NdMethod::tensor) {
        if (dim > 3) throw NumericsError("tensor method requires J <= 3");
        const QuadRule& rule = quad_rule(cfg.quad_order);
        std::vector<GaussGrid> grids(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const std::vector<double> bp =
                j < breakpoints.size() ? breakpoints[j] : std::vector<double>{};
            grids[j] = gauss_grid_1d(state.b[j], var, bp, rule);
        }
        std::vector<std::size_t> index(dim, 0);
        std::vector<double> z(dim);
        double acc = 0.0;
        while (true) {
            double w = 1.0;
            for (std::size_t j = 0; j < dim; ++j) {
                z[j] = grids[j].points[index[j]];
                w *= grids[j].weights[index[j]];
            }
            const double v = fn(z);
            if (!std::isfinite(v)) throw NumericsError("non-finite integrand at quadrature node");
            acc += w * v;
            std::size_t j = 0;
            while (j < dim && ++index[j] == grids[j].points.size()) {
                index[j] = 0;
                ++j;
            }
            if (j == dim) break;
        }
        return {acc, 0.0};
    }

    GaussianStream stream(cfg.seed, mc_label);
    const double sd = std::sqrt(var);
    std::vector<double> z(dim);
    double sum = 0.0, sumsq = 0.0;
    const int n = cfg.mc_paths;
    for (int i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) z[j] = state.b[j] + sd * stream.normal();
        const double v = fn(z);
        if (!std::isfinite(v)) throw NumericsError("non-finite integrand in Monte Carlo");
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double var_est = std::max(0.0, sumsq / n - mean * mean);
    return {mean, std::sqrt(var_est / n)};
}

/// Integrand declared as a sum of terms, each a product of per-coordinate
/// factors.  Such integrands against product Gaussians reduce exactly to
/// products of one-dimensional integrals.
struct SeparableIntegrand {
    struct Term {
        double coefficient = 1.0;
        std::vector<std::function<double(double)>> factors;  // one per coordinate
    };
    std::vector<Term> terms;
    std::vector<std::vector<double>> breakpoints;  // per coordinate
};

inline Estimate cond_expect_separable(const State& state, double horizon,
                                      const SeparableIntegrand& integrand,
                                      const NumericsConfig& cfg) {
    const std::size_t dim = state.b.size();
    const double var = horizon - state.t;
    if (var < 0.0) throw NumericsError("state beyond the horizon");
    const QuadRule& rule = quad_rule(cfg.quad_order);
    double total = 0.0;
    for (const auto& term : integrand.terms) {
        double prod = term.coefficient;
        for (std::size_t j = 0; j < dim; ++j) {
            const std::vector<double> bp =
                j < integrand.breakpoints.size() ? integrand.breakpoints[j] : std::vector<double>{};
            prod *= cond_expect_1d(state.b[j], var, term.factors[j], bp, rule);
        }
        total += prod;
    }
    return {total, 0.0};
}

}  // namespace impact
