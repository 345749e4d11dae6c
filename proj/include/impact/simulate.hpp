#pragma once

// Seeded path simulation, discrete replication, martingale residual and
// market-maker optimality diagnostics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "impact/dynamics.hpp"
#include "impact/hedging.hpp"
#include "impact/rng.hpp"

namespace impact {

/// Worker cap: hardware concurrency, clamped by IMPACT_HEDGE_THREADS.
inline int worker_count() {
    static const int n = [] {
        const unsigned hc = std::thread::hardware_concurrency();
        int cap = hc ? static_cast<int>(hc) : 1;
        if (const char* env = std::getenv("IMPACT_HEDGE_THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1) cap = std::min(cap, v);
        }
        return cap;
    }();
    return n;
}

/// Static-chunk parallel map over [0, n).  Each index writes its own slot,
/// so results do not depend on the worker count.
template <class F>
inline void parallel_for(std::size_t n, F&& f) {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        pool.emplace_back([lo, hi, &f] {
            for (std::size_t i = lo; i < hi; ++i) f(i);
        });
    }
    for (auto& t : pool) t.join();
}

/// Brownian increments on a uniform grid, one RNG stream per (seed, path)
/// so parallel and serial generation agree bit-exactly.
struct PathBundle {
    std::size_t dim = 1;
    double horizon = 1.0;
    int steps = 1;
    int n_paths = 1;
    std::uint64_t seed = 0;
    std::vector<double> increments;  // [path][step][coord]

    double dt() const { return horizon / steps; }
    double inc(int path, int k, std::size_t j) const {
        return increments[(static_cast<std::size_t>(path) * steps + k) * dim + j];
    }
};

inline PathBundle simulate_paths(const Scenario& s, int steps, int n_paths, std::uint64_t seed) {
    if (steps < 1) throw ValidationError("steps", "must be >= 1");
    if (n_paths < 1) throw ValidationError("paths", "must be >= 1");
    PathBundle b;
    b.dim = static_cast<std::size_t>(s.num_assets);
    b.horizon = s.horizon;
    b.steps = steps;
    b.n_paths = n_paths;
    b.seed = seed;
    b.increments.resize(static_cast<std::size_t>(n_paths) * steps * b.dim);
    const double sd = std::sqrt(b.dt());
    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t path) {
        GaussianStream stream(seed, "paths", path);
        double* out = &b.increments[path * static_cast<std::size_t>(steps) * b.dim];
        for (int k = 0; k < steps; ++k)
            for (std::size_t j = 0; j < b.dim; ++j) *out++ = sd * stream.normal();
    });
    return b;
}

struct TrajectoryPoint {
    int path = 0;
    int step = 0;
    double t = 0.0;
    std::vector<double> b;
    std::vector<double> stilde;
    std::vector<double> holdings;
    double wealth = 0.0;
};

/// Discrete replication result: per-path terminal errors W_N - G(b_N).
struct HedgeReport {
    std::vector<double> terminal_errors;
    double rms = 0.0;
    double max_abs = 0.0;
    int steps = 0;
    int paths = 0;
    std::uint64_t seed = 0;
    bool any_warn = false;  // some state fell in the near-degenerate band
    std::vector<TrajectoryPoint> trajectories;  // filled only on request
};

struct ReplicationOptions {
    bool assume_complete = false;   // skip the coarse completeness pre-scan
    bool store_trajectories = false;
};

namespace detail {

inline std::vector<State> coarse_scan_grid(const Scenario& s) {
    std::vector<State> grid;
    const double T = s.horizon;
    const double sd = std::sqrt(T);
    const std::vector<double> times{0.0, 0.5 * T, 0.95 * T};
    const std::vector<double> levels{-2.0 * sd, 0.0, 2.0 * sd};
    const std::size_t dim = static_cast<std::size_t>(s.num_assets);
    if (dim <= 3) {
        std::vector<std::size_t> idx(dim, 0);
        while (true) {
            for (double t : times) {
                State st{t, std::vector<double>(dim)};
                for (std::size_t j = 0; j < dim; ++j) st.b[j] = levels[idx[j]];
                grid.push_back(std::move(st));
            }
            std::size_t j = 0;
            while (j < dim && ++idx[j] == levels.size()) {
                idx[j] = 0;
                ++j;
            }
            if (j == dim) break;
        }
    } else {
        for (double t : times)
            for (std::size_t j = 0; j < dim; ++j)
                for (double lv : levels) {
                    State st{t, std::vector<double>(dim, 0.0)};
                    st.b[j] = lv;
                    grid.push_back(std::move(st));
                }
    }
    return grid;
}

}  // namespace detail

/// Run the self-financing wealth recursion W_{k+1} = W_k + H_k (S~_{k+1} - S~_k)
/// from W_0 = p along every path and report the terminal replication errors.
inline HedgeReport replicate(const PathBundle& bundle, const TiltedMeasure& m,
                             const ReplicationOptions& opts = {}) {
    const Scenario& s = m.scenario->scenario;
    const std::size_t dim = bundle.dim;
    const int steps = bundle.steps;
    const double dt = bundle.dt();

    if (s.traded == Traded::example1) {
        // sigma vanishes on [0, tau), so the very first hedge already fails
        hedge_ratio(m, State{0.0, {0.0}});
        throw IncompleteMarketError("unreachable", 0.0, 0.0);
    }

    if (!opts.assume_complete) {
        const ScanReport scan = completeness_scan(m, detail::coarse_scan_grid(s));
        if (!scan.complete) {
            const auto& bad = scan.rows[scan.failing.front()];
            throw IncompleteMarketError(
                "completeness pre-scan failed: min singular value " +
                    std::to_string(bad.min_sv) + " at t = " + std::to_string(bad.state.t),
                bad.state.t, bad.min_sv);
        }
    }

    HedgeReport rep;
    rep.steps = steps;
    rep.paths = bundle.n_paths;
    rep.seed = bundle.seed;
    rep.terminal_errors.resize(bundle.n_paths);

    const StateEval eval0 = evaluate_state(m, State{0.0, std::vector<double>(dim, 0.0)});
    std::vector<char> warn(bundle.n_paths, 0);
    std::vector<std::vector<TrajectoryPoint>> traj;
    if (opts.store_trajectories) traj.resize(bundle.n_paths);

    std::vector<std::exception_ptr> errors(bundle.n_paths);
    parallel_for(static_cast<std::size_t>(bundle.n_paths), [&](std::size_t path) {
        try {
            StateEval left = eval0;
            State st{0.0, std::vector<double>(dim, 0.0)};
            double wealth = m.p;
            for (int k = 0; k < steps; ++k) {
                const HedgeRatio h = hedge_ratio_from_eval(left, s);
                if (h.warn) warn[path] = 1;
                if (opts.store_trajectories)
                    traj[path].push_back(
                        {static_cast<int>(path), k, st.t, st.b, left.stilde, h.H, wealth});
                for (std::size_t j = 0; j < dim; ++j) st.b[j] += bundle.inc(path, k, j);
                st.t = (k + 1 == steps) ? s.horizon : dt * (k + 1);
                const StateEval right = evaluate_state(m, st);
                for (std::size_t j = 0; j < dim; ++j)
                    wealth += h.H[j] * (right.stilde[j] - left.stilde[j]);
                left = right;
            }
            if (opts.store_trajectories)
                traj[path].push_back({static_cast<int>(path), steps, s.horizon, st.b, left.stilde,
                                      std::vector<double>(dim, 0.0), wealth});
            rep.terminal_errors[path] = wealth - claim_value(s.claim, st.b);
        } catch (...) {
            errors[path] = std::current_exception();
        }
    });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    double sumsq = 0.0;
    for (double e : rep.terminal_errors) {
        sumsq += e * e;
        rep.max_abs = std::max(rep.max_abs, std::abs(e));
    }
    rep.rms = std::sqrt(sumsq / rep.terminal_errors.size());
    for (char w : warn) rep.any_warn |= w != 0;
    if (opts.store_trajectories)
        for (auto& t : traj)
            rep.trajectories.insert(rep.trajectories.end(), t.begin(), t.end());
    return rep;
}

/// Residual of the local dynamics dS~ = sigma (dB - alpha dt): halving the
/// step should roughly halve the mean residual norm.
struct ResidualReport {
    int steps_coarse = 0;
    double mean_residual_coarse = 0.0;
    double mean_residual_fine = 0.0;  // at twice the number of steps
    double ratio = 0.0;               // coarse / fine
};

namespace detail {

inline double mean_step_residual(const PathBundle& bundle, const TiltedMeasure& m) {
    const Scenario& s = m.scenario->scenario;
    const std::size_t dim = bundle.dim;
    const double dt = bundle.dt();
    const StateEval eval0 = evaluate_state(m, State{0.0, std::vector<double>(dim, 0.0)});
    std::vector<double> per_path(bundle.n_paths, 0.0);
    parallel_for(static_cast<std::size_t>(bundle.n_paths), [&](std::size_t path) {
        StateEval left = eval0;
        State st{0.0, std::vector<double>(dim, 0.0)};
        double acc = 0.0;
        for (int k = 0; k < bundle.steps; ++k) {
            for (std::size_t j = 0; j < dim; ++j) st.b[j] += bundle.inc(path, k, j);
            st.t = (k + 1 == bundle.steps) ? s.horizon : dt * (k + 1);
            const StateEval right = evaluate_state(m, st);
            double norm2 = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                double r = right.stilde[i] - left.stilde[i];
                for (std::size_t j = 0; j < dim; ++j)
                    r -= left.sigma(i, j) * (bundle.inc(path, k, j) - left.alpha[j] * dt);
                norm2 += r * r;
            }
            acc += std::sqrt(norm2);
            left = right;
        }
        per_path[path] = acc / bundle.steps;
    });
    double total = 0.0;
    for (double v : per_path) total += v;
    return total / bundle.n_paths;
}

}  // namespace detail

inline ResidualReport martingale_residual_check(const PathBundle& bundle,
                                                const TiltedMeasure& m) {
    const Scenario& s = m.scenario->scenario;
    ResidualReport r;
    r.steps_coarse = bundle.steps;
    r.mean_residual_coarse = detail::mean_step_residual(bundle, m);
    const PathBundle fine = simulate_paths(s, bundle.steps * 2, bundle.n_paths, bundle.seed);
    r.mean_residual_fine = detail::mean_step_residual(fine, m);
    r.ratio = r.mean_residual_coarse /
              std::max(r.mean_residual_fine, std::numeric_limits<double>::min());
    return r;
}

/// Market-maker optimality: perturb the strategy -H by eps * phi for a
/// fixed family of bounded adapted shapes and estimate the utility change
/// with common random numbers.  Negative deltas confirm -H is optimal.
struct OptimalityCell {
    int shape = 0;
    double eps = 0.0;
    double delta = 0.0;
    double stderr_ = 0.0;
};

struct OptimalityReport {
    std::vector<OptimalityCell> cells;
    double base_utility = 0.0;   // E[U(x - sum H dS~)] along the bundle
    double exact_utility = 0.0;  // E[U(x + p - g)] along the same paths
    bool zero_at_eps0 = true;    // delta(0) == 0 bitwise
    bool negative_at_max_eps = true;
    bool concave_chain = true;
};

inline constexpr int kPerturbationShapes = 3;  // constant, sign-of-state, time ramp

inline OptimalityReport mm_optimality_check(const PathBundle& bundle, const TiltedMeasure& m,
                                            const std::vector<double>& eps_list) {
    const Scenario& s = m.scenario->scenario;
    const std::size_t dim = bundle.dim;
    const int steps = bundle.steps;
    const double dt = bundle.dt();
    const int n = bundle.n_paths;

    // base_i = sum_k H_k dS~_k and pert_i[shape] = sum_k phi_k dS~_k
    std::vector<double> base(n, 0.0), terminal_claim(n, 0.0);
    std::vector<std::array<double, kPerturbationShapes>> pert(
        n, std::array<double, kPerturbationShapes>{0.0, 0.0, 0.0});

    const StateEval eval0 = evaluate_state(m, State{0.0, std::vector<double>(dim, 0.0)});
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t path) {
        StateEval left = eval0;
        State st{0.0, std::vector<double>(dim, 0.0)};
        for (int k = 0; k < steps; ++k) {
            const HedgeRatio h = hedge_ratio_from_eval(left, s);
            std::array<std::vector<double>, kPerturbationShapes> phi;
            phi[0].assign(dim, 1.0);
            phi[1].resize(dim);
            for (std::size_t j = 0; j < dim; ++j) phi[1][j] = std::copysign(1.0, st.b[j]);
            phi[2].assign(dim, dt * k / s.horizon);
            for (std::size_t j = 0; j < dim; ++j) st.b[j] += bundle.inc(path, k, j);
            st.t = (k + 1 == steps) ? s.horizon : dt * (k + 1);
            const StateEval right = evaluate_state(m, st);
            for (std::size_t j = 0; j < dim; ++j) {
                const double ds = right.stilde[j] - left.stilde[j];
                base[path] += h.H[j] * ds;
                for (int q = 0; q < kPerturbationShapes; ++q) pert[path][q] += phi[q][j] * ds;
            }
            left = right;
        }
        terminal_claim[path] = claim_value(s.claim, st.b);
    });

    OptimalityReport rep;
    const double x = s.initial_wealth;
    double base_u = 0.0, exact_u = 0.0;
    for (int i = 0; i < n; ++i) {
        base_u += s.utility.value(x - base[i]);
        exact_u += s.utility.value(x + m.p - terminal_claim[i]);
    }
    rep.base_utility = base_u / n;
    rep.exact_utility = exact_u / n;

    for (int q = 0; q < kPerturbationShapes; ++q) {
        for (double eps : eps_list) {
            double sum = 0.0, sumsq = 0.0;
            for (int i = 0; i < n; ++i) {
                const double d =
                    s.utility.value(x - base[i] + eps * pert[i][q]) -
                    s.utility.value(x - base[i]);
                sum += d;
                sumsq += d * d;
            }
            const double mean = sum / n;
            const double var = std::max(0.0, sumsq / n - mean * mean);
            rep.cells.push_back({q, eps, mean, std::sqrt(var / n)});
        }
    }

    double max_eps = 0.0;
    for (double e : eps_list) max_eps = std::max(max_eps, e);
    for (const auto& c : rep.cells) {
        if (c.eps == 0.0 && c.delta != 0.0) rep.zero_at_eps0 = false;
        if (c.eps == max_eps && !(c.delta < -2.0 * c.stderr_)) rep.negative_at_max_eps = false;
    }
    // concavity along doubling pairs within each shape
    for (int q = 0; q < kPerturbationShapes; ++q) {
        for (double eps : eps_list) {
            if (eps == 0.0) continue;
            const OptimalityCell* half = nullptr;
            const OptimalityCell* full = nullptr;
            for (const auto& c : rep.cells) {
                if (c.shape != q) continue;
                if (c.eps == eps) full = &c;
                if (std::abs(c.eps - 0.5 * eps) < 1e-15) half = &c;
            }
            if (half && full &&
                !(full->delta <= half->delta + 2.0 * (full->stderr_ + half->stderr_)))
                rep.concave_chain = false;
        }
    }
    return rep;
}

/// RMS terminal error per step count.
struct StudyRow {
    int steps = 0;
    double rms = 0.0;
    double max_abs = 0.0;
};

inline std::vector<StudyRow> convergence_study(const TiltedMeasure& m,
                                               const std::vector<int>& steps_list, int n_paths,
                                               std::uint64_t seed) {
    std::vector<StudyRow> rows;
    for (int steps : steps_list) {
        const PathBundle bundle =
            simulate_paths(m.scenario->scenario, steps, n_paths, seed);
        const HedgeReport rep = replicate(bundle, m, {.assume_complete = true});
        rows.push_back({steps, rep.rms, rep.max_abs});
    }
    return rows;
}

}  // namespace impact
