#pragma once

// Price surface, Girsanov drift and volatility matrix as functions of the
// state (t, b).
//
// Everything rests on one reduction: with f = B_T and g = G(B_T), every
// conditional expectation under the pricing measure is an integral of the
// global weight w(z) = U'(x + p - G(z)) against N(b, (T-t) I).  The solved
// price p enters only through w, so each state costs one quadrature pass
// per coordinate (separable claims) or one tensor pass (smooth claims).

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "impact/gauss.hpp"
#include "impact/linalg.hpp"
#include "impact/pricing.hpp"
#include "impact/scenario.hpp"

namespace impact {

/// Volatility matrix at a state together with its smallest singular value.
struct VolMatrix {
    Matrix entries;
    double min_sv = 0.0;
};

/// All conditional quantities at one state, from a single integration pass:
///   stilde_i = Etilde[B_T^i | b]               (price of asset i)
///   ghat     = Etilde[G(B_T) | b]              (claim surface)
///   alpha_j  = Etilde[A(x+p-g) dG_j | b]       (density exponent process)
///   sigma_ij = delta_ij
///            + Etilde[A(x+p-g) (B_T^i - stilde_i) dG_j | b]
///   eta_j    = Etilde[dG_j | b]
///            + Etilde[A(x+p-g) (g - ghat) dG_j | b]
/// eta is the integrand of the claim surface against the pricing-measure
/// Brownian motion; the covariance term mirrors the one in sigma and is what
/// makes the ratio H = (sigma^T)^{-1} eta replicate the claim.
struct StateEval {
    State state;
    double norm = 0.0;  // E[w | b]
    std::vector<double> stilde;
    double ghat = 0.0;
    std::vector<double> alpha;
    Matrix sigma;
    std::vector<double> eta;
};

namespace detail {

// Per-coordinate, per-mixture-term one-dimensional moments of the tilt
// factor t_u(z) = exp(gamma_u c_j phi_j(z)) against N(b_j, var).
struct SepMoments {
    std::size_t n_terms = 0, dim = 0;
    // indexed [u * dim + j]
    std::vector<double> f0, fz, fphi, fd, fzd, fphid;
    std::vector<double> chat;      // rescaled mixture prefactors
    double log_scale = 0.0;        // true prefactor = chat * exp(log_scale)
    // node caches for the second (sigma) pass: per coordinate, per node
    std::vector<GaussGrid> grids;
    std::vector<std::vector<double>> tilted;  // [j][u * n_nodes + k] = t_u * weight
    std::vector<std::vector<double>> deriv;   // [j][k] = c_j phi_j'(z_k)
};

inline SepMoments separable_moments(const ValidatedScenario& vs, double p, const State& state,
                                    double var) {
    const Scenario& s = vs.scenario;
    const auto& sep = std::get<SeparableClaim>(s.claim);
    const auto& terms = s.utility.terms;
    const QuadRule& rule = quad_rule(s.numerics.quad_order);

    SepMoments mm;
    mm.n_terms = terms.size();
    mm.dim = sep.dimension();
    const std::size_t nu = mm.n_terms, nj = mm.dim;
    mm.f0.assign(nu * nj, 0.0);
    mm.fz.assign(nu * nj, 0.0);
    mm.fphi.assign(nu * nj, 0.0);
    mm.fd.assign(nu * nj, 0.0);
    mm.fzd.assign(nu * nj, 0.0);
    mm.fphid.assign(nu * nj, 0.0);
    mm.grids.resize(nj);
    mm.tilted.resize(nj);
    mm.deriv.resize(nj);

    const double xp = s.initial_wealth + p;
    mm.log_scale = -std::numeric_limits<double>::infinity();
    for (const auto& t : terms) mm.log_scale = std::max(mm.log_scale, std::log(t.weight) - t.rate * xp);
    mm.chat.resize(nu);
    for (std::size_t u = 0; u < nu; ++u)
        mm.chat[u] = std::exp(std::log(terms[u].weight) - terms[u].rate * xp - mm.log_scale);

    for (std::size_t j = 0; j < nj; ++j) {
        const auto& phi = sep.payoffs[j];
        const double cj = sep.weights[j];
        mm.grids[j] = gauss_grid_1d(state.b[j], var, phi.breakpoints, rule);
        const auto& grid = mm.grids[j];
        const std::size_t nk = grid.points.size();
        mm.tilted[j].assign(nu * nk, 0.0);
        mm.deriv[j].resize(nk);
        for (std::size_t k = 0; k < nk; ++k) {
            const double z = grid.points[k];
            const double y = cj * phi(z);
            const double dg = cj * phi.derivative(z);
            mm.deriv[j][k] = dg;
            for (std::size_t u = 0; u < nu; ++u) {
                const double e = std::exp(terms[u].rate * y) * grid.weights[k];
                if (!std::isfinite(e))
                    throw NumericsError("non-finite tilt factor (validation breach)");
                mm.tilted[j][u * nk + k] = e;
                const std::size_t uj = u * nj + j;
                mm.f0[uj] += e;
                mm.fz[uj] += e * z;
                mm.fphi[uj] += e * y;
                mm.fd[uj] += e * dg;
                mm.fzd[uj] += e * z * dg;
                mm.fphid[uj] += e * y * dg;
            }
        }
    }
    return mm;
}

}  // namespace detail

/// Evaluate every conditional quantity at a state.  Bachelier traded assets
/// only; Example-1 dynamics have their own closed form.
inline StateEval evaluate_state(const TiltedMeasure& m, const State& state) {
    const ValidatedScenario& vs = *m.scenario;
    const Scenario& s = vs.scenario;
    if (s.traded != Traded::bachelier)
        throw EngineError("state evaluation requires Bachelier traded assets");
    const std::size_t dim = static_cast<std::size_t>(s.num_assets);
    if (state.b.size() != dim) throw EngineError("state dimension mismatch");
    if (state.t < 0.0 || state.t > s.horizon + 1e-12)
        throw EngineError("state time outside [0, T]");
    const double var = std::max(0.0, s.horizon - state.t);

    StateEval ev;
    ev.state = state;
    ev.stilde.resize(dim);
    ev.alpha.resize(dim);
    ev.eta.resize(dim);
    ev.sigma = Matrix::identity(dim);

    if (var == 0.0) {
        // maturity: sigma by its left limit, gradient right-continuous
        const auto [g, grad] = claim_eval(s.claim, state.b);
        const double a = s.utility.risk_aversion(s.initial_wealth + m.p - g);
        ev.norm = s.utility.marginal(s.initial_wealth + m.p - g);
        ev.stilde = state.b;
        ev.ghat = g;
        for (std::size_t j = 0; j < dim; ++j) {
            ev.alpha[j] = a * grad[j];
            ev.eta[j] = grad[j];
        }
        return ev;
    }

    const auto& terms = s.utility.terms;
    const std::size_t nu = terms.size();

    if (std::holds_alternative<SeparableClaim>(s.claim)) {
        const detail::SepMoments mm = detail::separable_moments(vs, m.p, state, var);
        const std::size_t nj = dim;

        // products of the per-coordinate normalizers, per mixture term
        std::vector<double> prod(nu, 1.0);
        for (std::size_t u = 0; u < nu; ++u)
            for (std::size_t j = 0; j < nj; ++j) prod[u] *= mm.f0[u * nj + j];

        double norm = 0.0;
        for (std::size_t u = 0; u < nu; ++u) norm += mm.chat[u] * prod[u];

        // tilted means per term: mean_z, mean_phi, mean_d, ... (ratios to f0)
        auto ratio = [&mm, nj](const std::vector<double>& f, std::size_t u, std::size_t j) {
            return f[u * nj + j] / mm.f0[u * nj + j];
        };

        std::vector<double> gsum(nu, 0.0);  // E_u[G | b]
        for (std::size_t u = 0; u < nu; ++u)
            for (std::size_t j = 0; j < nj; ++j) gsum[u] += ratio(mm.fphi, u, j);

        for (std::size_t i = 0; i < nj; ++i) {
            double acc = 0.0;
            for (std::size_t u = 0; u < nu; ++u) acc += mm.chat[u] * prod[u] * ratio(mm.fz, u, i);
            ev.stilde[i] = acc / norm;
        }
        {
            double acc = 0.0;
            for (std::size_t u = 0; u < nu; ++u) acc += mm.chat[u] * prod[u] * gsum[u];
            ev.ghat = acc / norm;
        }
        for (std::size_t j = 0; j < nj; ++j) {
            double ad = 0.0, d = 0.0, agd = 0.0;
            for (std::size_t u = 0; u < nu; ++u) {
                const double w = mm.chat[u] * prod[u];
                const double mean_d = ratio(mm.fd, u, j);
                d += w * mean_d;
                ad += w * terms[u].rate * mean_d;
                agd += w * terms[u].rate *
                       (ratio(mm.fphid, u, j) + mean_d * (gsum[u] - ratio(mm.fphi, u, j)));
            }
            ev.alpha[j] = ad / norm;
            ev.eta[j] = d / norm + agd / norm - ev.ghat * ev.alpha[j];
        }

        // second pass for sigma: the (z - stilde_i) factor at node level
        for (std::size_t i = 0; i < nj; ++i) {
            const auto& grid = mm.grids[i];
            const std::size_t nk = grid.points.size();
            std::vector<double> fsz(nu, 0.0), fszd(nu, 0.0);
            for (std::size_t k = 0; k < nk; ++k) {
                const double zc = grid.points[k] - ev.stilde[i];
                for (std::size_t u = 0; u < nu; ++u) {
                    const double e = mm.tilted[i][u * nk + k];
                    fsz[u] += e * zc;
                    fszd[u] += e * zc * mm.deriv[i][k];
                }
            }
            for (std::size_t j = 0; j < nj; ++j) {
                double acc = 0.0;
                for (std::size_t u = 0; u < nu; ++u) {
                    const double w = mm.chat[u] * prod[u] * terms[u].rate;
                    const std::size_t ui = u * nj + i;
                    acc += (i == j) ? w * fszd[u] / mm.f0[ui]
                                    : w * (fsz[u] / mm.f0[ui]) * ratio(mm.fd, u, j);
                }
                ev.sigma(i, j) += acc / norm;
            }
        }

        ev.norm = norm * std::exp(mm.log_scale);
        return ev;
    }

    // smooth claim: one tensor pass
    if (dim > 3) throw NumericsError("tensor evaluation requires J <= 3");
    const QuadRule& rule = quad_rule(s.numerics.quad_order);
    std::vector<GaussGrid> grids(dim);
    for (std::size_t j = 0; j < dim; ++j)
        grids[j] = gauss_grid_1d(state.b[j], var, claim_breakpoints(s.claim, j), rule);

    const double xp = s.initial_wealth + m.p;
    double log_scale = -std::numeric_limits<double>::infinity();
    for (const auto& t : terms) log_scale = std::max(log_scale, std::log(t.weight) - t.rate * xp);
    std::vector<double> chat(nu);
    for (std::size_t u = 0; u < nu; ++u)
        chat[u] = std::exp(std::log(terms[u].weight) - terms[u].rate * xp - log_scale);

    double norm = 0.0, gh = 0.0;
    std::vector<double> sz(dim, 0.0), d(dim, 0.0), ad(dim, 0.0), agd(dim, 0.0);
    std::vector<double> azd(dim * dim, 0.0);

    std::vector<std::size_t> index(dim, 0);
    std::vector<double> z(dim);
    while (true) {
        double wgt = 1.0;
        for (std::size_t j = 0; j < dim; ++j) {
            z[j] = grids[j].points[index[j]];
            wgt *= grids[j].weights[index[j]];
        }
        const auto [g, grad] = claim_eval(s.claim, z);
        double tw = 0.0, taw = 0.0;
        for (std::size_t u = 0; u < nu; ++u) {
            const double e = chat[u] * std::exp(terms[u].rate * g);
            tw += e;
            taw += terms[u].rate * e;
        }
        if (!std::isfinite(tw)) throw NumericsError("non-finite tilt factor (validation breach)");
        tw *= wgt;
        taw *= wgt;
        norm += tw;
        gh += tw * g;
        for (std::size_t i = 0; i < dim; ++i) {
            sz[i] += tw * z[i];
            d[i] += tw * grad[i];
            ad[i] += taw * grad[i];
            agd[i] += taw * g * grad[i];
            for (std::size_t j = 0; j < dim; ++j) azd[i * dim + j] += taw * z[i] * grad[j];
        }
        std::size_t j = 0;
        while (j < dim && ++index[j] == grids[j].points.size()) {
            index[j] = 0;
            ++j;
        }
        if (j == dim) break;
    }

    ev.ghat = gh / norm;
    for (std::size_t i = 0; i < dim; ++i) {
        ev.stilde[i] = sz[i] / norm;
        ev.alpha[i] = ad[i] / norm;
        ev.eta[i] = d[i] / norm + agd[i] / norm - ev.ghat * ad[i] / norm;
    }
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            ev.sigma(i, j) += azd[i * dim + j] / norm - ev.stilde[i] * ad[j] / norm;
    ev.norm = norm * std::exp(log_scale);
    return ev;
}

/// Price vector S~(t, b); equals b at maturity.
inline std::vector<double> price_fn(const TiltedMeasure& m, const State& state) {
    return evaluate_state(m, state).stilde;
}

/// Claim surface g^(t, b); equals G(b) at maturity and p at (0, 0).
inline double claim_fn(const TiltedMeasure& m, const State& state) {
    return evaluate_state(m, state).ghat;
}

/// Exponent process of the pricing density, alpha_j = Etilde[A dG_j | b].
/// The pricing-measure Brownian motion is Btilde = B - int alpha dt.
inline std::vector<double> girsanov_drift(const TiltedMeasure& m, const State& state) {
    return evaluate_state(m, state).alpha;
}

/// Volatility matrix from the risk-aversion formula; any mixture utility.
inline VolMatrix vol_matrix_general(const TiltedMeasure& m, const State& state) {
    const StateEval ev = evaluate_state(m, state);
    return {ev.sigma, min_singular_value(ev.sigma)};
}

/// Volatility matrix from the conditional-covariance form
///   sigma_ij = delta_ij + gamma Cov~(B_T^i, dG_j | b).
/// Single-exponential utilities only (constant risk aversion).
inline VolMatrix vol_matrix_bachelier(const TiltedMeasure& m, const State& state) {
    const ValidatedScenario& vs = *m.scenario;
    const Scenario& s = vs.scenario;
    if (!s.utility.single_exponential())
        throw EngineError("covariance form requires a single-exponential utility");
    if (s.traded != Traded::bachelier)
        throw EngineError("covariance form requires Bachelier traded assets");
    const std::size_t dim = static_cast<std::size_t>(s.num_assets);
    const double var = std::max(0.0, s.horizon - state.t);
    const double gamma = s.utility.rate();

    Matrix sig = Matrix::identity(dim);
    if (var == 0.0) return {sig, min_singular_value(sig)};

    if (std::holds_alternative<SeparableClaim>(s.claim)) {
        const detail::SepMoments mm = detail::separable_moments(vs, m.p, state, var);
        auto ratio = [&mm](const std::vector<double>& f, std::size_t j) {
            return f[j] / mm.f0[j];
        };
        // coordinates stay independent under the product tilt, so the
        // cross-covariances vanish identically and only the diagonal moves
        for (std::size_t i = 0; i < mm.dim; ++i)
            sig(i, i) += gamma * (ratio(mm.fzd, i) - ratio(mm.fz, i) * ratio(mm.fd, i));
        return {sig, min_singular_value(sig)};
    }

    // smooth claim: covariance assembled from tensor moments
    if (dim > 3) throw NumericsError("tensor evaluation requires J <= 3");
    const QuadRule& rule = quad_rule(s.numerics.quad_order);
    std::vector<GaussGrid> grids(dim);
    for (std::size_t j = 0; j < dim; ++j)
        grids[j] = gauss_grid_1d(state.b[j], var, claim_breakpoints(s.claim, j), rule);
    double norm = 0.0;
    std::vector<double> sz(dim, 0.0), d(dim, 0.0), zd(dim * dim, 0.0);
    std::vector<std::size_t> index(dim, 0);
    std::vector<double> z(dim);
    while (true) {
        double wgt = 1.0;
        for (std::size_t j = 0; j < dim; ++j) {
            z[j] = grids[j].points[index[j]];
            wgt *= grids[j].weights[index[j]];
        }
        const auto [g, grad] = claim_eval(s.claim, z);
        const double tw = std::exp(gamma * g) * wgt;
        if (!std::isfinite(tw)) throw NumericsError("non-finite tilt factor (validation breach)");
        norm += tw;
        for (std::size_t i = 0; i < dim; ++i) {
            sz[i] += tw * z[i];
            d[i] += tw * grad[i];
            for (std::size_t j = 0; j < dim; ++j) zd[i * dim + j] += tw * z[i] * grad[j];
        }
        std::size_t j = 0;
        while (j < dim && ++index[j] == grids[j].points.size()) {
            index[j] = 0;
            ++j;
        }
        if (j == dim) break;
    }
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            sig(i, j) += gamma * (zd[i * dim + j] / norm - (sz[i] / norm) * (d[j] / norm));
    return {sig, min_singular_value(sig)};
}

/// Closed-form Example-1 dynamics.  The pricing-measure Brownian motion is
/// Btilde_t = B_t - t; the traded asset's price is zero before tau and
/// follows Btilde afterwards, so the volatility is the indicator of
/// [tau, T].  btilde_tau anchors the price along a simulated path.
struct Example1Dynamics {
    double stilde = 0.0;
    double sigma = 0.0;
};

inline Example1Dynamics example1_dynamics(double t, double b, double tau,
                                          double btilde_tau = 0.0) {
    Example1Dynamics d;
    if (t < tau) {
        d.stilde = 0.0;
        d.sigma = 0.0;
    } else {
        d.stilde = (b - t) - btilde_tau;
        d.sigma = 1.0;
    }
    return d;
}

/// Completeness scan: smallest singular value of the volatility matrix over
/// a grid of states.  COMPLETE iff the minimum clears sv_tolerance.
struct ScanRow {
    State state;
    double min_sv = 0.0;
};

struct ScanReport {
    std::vector<ScanRow> rows;
    double overall_min = 0.0;
    bool complete = false;
    std::vector<std::size_t> failing;  // indices into rows
};

inline ScanReport completeness_scan(const TiltedMeasure& m, const std::vector<State>& grid) {
    const Scenario& s = m.scenario->scenario;
    ScanReport rep;
    rep.rows.reserve(grid.size());
    double overall = std::numeric_limits<double>::infinity();
    for (const auto& st : grid) {
        double sv;
        if (s.traded == Traded::example1) {
            sv = example1_dynamics(st.t, st.b[0], s.example1_time).sigma;
        } else {
            sv = vol_matrix_general(m, st).min_sv;
        }
        rep.rows.push_back({st, sv});
        overall = std::min(overall, sv);
    }
    rep.overall_min = overall;
    for (std::size_t i = 0; i < rep.rows.size(); ++i)
        if (rep.rows[i].min_sv < s.numerics.sv_tolerance) rep.failing.push_back(i);
    rep.complete = rep.failing.empty();
    return rep;
}

/// Pricing report extended with the dynamics cross-check: S~(0, 0) from the
/// state evaluator against the generic tensor route.
inline PricingReport full_consistency_report(const TiltedMeasure& m) {
    PricingReport r = consistency_report(m);
    const Scenario& s = m.scenario->scenario;
    if (s.traded == Traded::bachelier) {
        State origin{0.0, std::vector<double>(static_cast<std::size_t>(s.num_assets), 0.0)};
        const std::vector<double> st = price_fn(m, origin);
        double gap = 0.0;
        if (s.num_assets <= 3) {
            std::vector<std::vector<double>> bps(st.size());
            for (std::size_t j = 0; j < st.size(); ++j) bps[j] = claim_breakpoints(s.claim, j);
            for (std::size_t i = 0; i < st.size(); ++i) {
                const double direct =
                    cond_expect_nd(
                        origin, s.horizon,
                        [&](const std::vector<double>& z) { return z[i] * m.weight(z); },
                        NdMethod::tensor, s.numerics, bps)
                        .value /
                    cond_expect_nd(
                        origin, s.horizon,
                        [&](const std::vector<double>& z) { return m.weight(z); },
                        NdMethod::tensor, s.numerics, bps)
                        .value;
                gap = std::max(gap, std::abs(direct - st[i]));
            }
        }
        r.stilde0_gap = gap;
    }
    return r;
}

}  // namespace impact
