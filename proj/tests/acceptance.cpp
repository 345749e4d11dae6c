// Acceptance suite: one pass/fail line per criterion.
//
// Usage: acceptance [N ...]   (default: run all nine)
// Exit code: number of failed criteria.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "impact/cli.hpp"
#include "impact/simulate.hpp"
#include "oracles.hpp"
#include "scenarios_common.hpp"

#ifndef IMPACT_SCENARIO_DIR
#define IMPACT_SCENARIO_DIR "scenarios"
#endif
#ifndef IMPACT_TEST_TMP
#define IMPACT_TEST_TMP "acceptance_tmp"
#endif

using namespace impact;
namespace fs = std::filesystem;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail << (detail.str().empty() ? "" : "; ") << what;
        }
    }
    void note(const std::string& what) {
        detail << (detail.str().empty() ? "" : "; ") << what;
    }
};

std::string scenario_file(const std::string& name) {
    return std::string(IMPACT_SCENARIO_DIR) + "/" + name;
}

std::string fresh_dir(const std::string& name) {
    const fs::path p = fs::path(IMPACT_TEST_TMP) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<State> random_states(const Scenario& s, int n, std::uint64_t seed) {
    GaussianStream rng(seed, "acceptance_states");
    std::vector<State> out;
    const std::size_t dim = static_cast<std::size_t>(s.num_assets);
    for (int i = 0; i < n; ++i) {
        State st;
        st.t = 0.95 * s.horizon * rng.uniform();
        st.b.resize(dim);
        for (auto& b : st.b) b = 1.5 * std::sqrt(s.horizon) * rng.normal();
        out.push_back(std::move(st));
    }
    return out;
}

// 1. Closed-form price on the linear scenario.
bool criterion1(std::string& detail) {
    Timer timer;
    Check c;
    const TiltedMeasure m = testkit::solve(testkit::linear_scenario(1.0, 1.0));
    c.require(std::abs(m.p - 1.0) <= 1e-8, "p differs from gamma T beyond 1e-8");
    c.require(m.closed_form_p.has_value(), "closed form missing");
    c.require(std::abs(m.p - *m.closed_form_p) <= 1e-10,
              "root vs closed form beyond 1e-10");
    const double secs = timer.seconds();
    c.require(secs < 1.0, "runtime above 1 s");
    std::ostringstream d;
    d << "p = " << format_double(m.p) << ", root-closed gap = "
      << format_double(m.p - *m.closed_form_p) << ", " << secs << " s";
    if (!c.ok) d << "; " << c.detail.str();
    detail = d.str();
    return c.ok;
}

// 2. Exact replication of the linear claim.
bool criterion2(std::string& detail) {
    Timer timer;
    Check c;
    const TiltedMeasure m = testkit::solve(testkit::linear_scenario(1.0, 1.0));
    const PathBundle bundle = simulate_paths(m.scenario->scenario, 16, 1000, 42);
    const HedgeReport rep = replicate(bundle, m);
    c.require(rep.max_abs <= 1e-7, "max terminal error above 1e-7");
    const double secs = timer.seconds();
    c.require(secs < 5.0, "runtime above 5 s");
    std::ostringstream d;
    d << "max |error| = " << format_double(rep.max_abs) << " over 1000 paths, " << secs << " s";
    if (!c.ok) d << "; " << c.detail.str();
    detail = d.str();
    return c.ok;
}

// 3. Replication error convergence on the call scenario.
bool criterion3(std::string& detail) {
    Timer timer;
    Check c;
    const TiltedMeasure m = testkit::solve(testkit::call_scenario(0.0, 1.0, 1.0));
    const auto rows = convergence_study(m, {16, 64, 256}, 2000, 42);
    c.require(rows[1].rms < rows[0].rms && rows[2].rms < rows[1].rms,
              "rms not strictly decreasing");
    c.require(rows[2].rms <= 0.5 * rows[0].rms, "rms(256) above half of rms(16)");
    const double secs = timer.seconds();
    c.require(secs < 120.0, "runtime above 2 min");
    std::ostringstream d;
    d << "rms = {" << format_double(rows[0].rms) << ", " << format_double(rows[1].rms) << ", "
      << format_double(rows[2].rms) << "}, " << secs << " s";
    if (!c.ok) d << "; " << c.detail.str();
    detail = d.str();
    return c.ok;
}

// 4. Volatility formula consistency and the delta identity.
bool criterion4(std::string& detail) {
    Check c;
    const std::vector<Scenario> scens{testkit::call_scenario(0.0, 1.0, 1.0),
                                      testkit::call_scenario(0.7, 0.5, 2.0),
                                      testkit::two_asset_scenario(1.0)};
    double worst_consistency = 0.0, worst_delta = 0.0;
    for (const auto& s : scens) {
        const TiltedMeasure m = testkit::solve(s);
        for (const auto& st : random_states(s, 67, 1001)) {
            const auto g = vol_matrix_general(m, st);
            const auto b = vol_matrix_bachelier(m, st);
            for (std::size_t i = 0; i < g.entries.n; ++i)
                for (std::size_t j = 0; j < g.entries.n; ++j)
                    worst_consistency = std::max(
                        worst_consistency, std::abs(g.entries(i, j) - b.entries(i, j)));
        }
        for (const auto& st : random_states(s, 34, 2002)) {
            const auto vol = vol_matrix_general(m, st);
            const double h = 1e-4 * std::sqrt(s.horizon - st.t);
            for (std::size_t i = 0; i < vol.entries.n; ++i)
                for (std::size_t j = 0; j < vol.entries.n; ++j) {
                    State up = st, dn = st;
                    up.b[j] += h;
                    dn.b[j] -= h;
                    const double fd = (price_fn(m, up)[i] - price_fn(m, dn)[i]) / (2.0 * h);
                    worst_delta = std::max(worst_delta, std::abs(vol.entries(i, j) - fd));
                }
        }
    }
    c.require(worst_consistency <= 1e-6, "general vs covariance route beyond 1e-6");
    c.require(worst_delta <= 1e-4, "sigma vs finite-difference delta beyond 1e-4");
    std::ostringstream d;
    d << "route gap = " << format_double(worst_consistency)
      << ", delta gap = " << format_double(worst_delta);
    if (!c.ok) d << "; " << c.detail.str();
    detail = d.str();
    return c.ok;
}

// 5. Diagonal structure for the two-asset separable convex claim.
bool criterion5(std::string& detail) {
    Check c;
    const Scenario s = testkit::two_asset_scenario(1.0);
    const TiltedMeasure m = testkit::solve(s);
    double max_off = 0.0, min_diag = 1e300;
    std::vector<State> grid;
    for (int it = 0; it < 5; ++it) {
        const double t = 0.9 * s.horizon * it / 4.0;
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 10; ++j) {
                const double b1 = -2.5 + 5.0 * i / 9.0;
                const double b2 = -2.5 + 5.0 * j / 9.0;
                grid.push_back({t, {b1, b2}});
            }
    }
    for (const auto& st : grid) {
        const auto vol = vol_matrix_general(m, st);
        max_off = std::max({max_off, std::abs(vol.entries(0, 1)), std::abs(vol.entries(1, 0))});
        min_diag = std::min({min_diag, vol.entries(0, 0), vol.entries(1, 1)});
    }
    const ScanReport scan = completeness_scan(m, grid);
    c.require(max_off <= 1e-8, "off-diagonal entries above 1e-8");
    c.require(min_diag >= 1.0 - 1e-8, "diagonal entries below 1 - 1e-8");
    c.require(scan.complete, "scan verdict not COMPLETE");
    c.require(scan.overall_min >= 1.0 - 1e-6, "scan minimum below 1 - 1e-6");
    std::ostringstream d;
    d << "max off-diag = " << format_double(max_off)
      << ", min diag = " << format_double(min_diag)
      << ", scan min sv = " << format_double(scan.overall_min) << " over " << grid.size()
      << " states";
    if (!c.ok) d << "; " << c.detail.str();
    detail = d.str();
    return c.ok;
}

// 6. Example-1 negative control.
bool criterion6(std::string& detail) {
    Check c;
    const TiltedMeasure m = testkit::solve(testkit::example1_scenario(0.5, 1.0));
    std::vector<State> grid;
    for (double t = 0.0; t < 1.0001; t += 0.05) grid.push_back({t, {0.2}});
    const ScanReport scan = completeness_scan(m, grid);
    bool zero_before = true, one_after = true;
    for (const auto& row : scan.rows) {
        if (row.state.t < 0.5 && row.min_sv != 0.0) zero_before = false;
        if (row.state.t >= 0.5 && row.min_sv != 1.0) one_after = false;
    }
    c.require(zero_before, "min_sv nonzero before tau");
    c.require(one_after, "min_sv not one after tau");
    c.require(!scan.complete, "scan verdict should fail");

    const std::string out = fresh_dir("c6_hedge");
    const int rc = cli::run_cli(
        {"hedge", "--scenario", scenario_file("example1.cfg"), "--out", out});
    c.require(rc == cli::kIncompleteMarket, "hedge exit code is not 4");
    std::ostringstream d;
    d << "min_sv = 0 on [0, tau), hedge exit code = " << rc;
    if (!c.ok) d << "; " << c.detail.str();
    detail = d.str();
    return c.ok;
}

// 7. Tilted-measure self-consistency plus quadrature vs Monte Carlo trials.
bool criterion7(std::string& detail) {
    Check c;
    Scenario straddle;
    straddle.num_assets = 1;
    straddle.horizon = 1.0;
    straddle.utility = {{{1.0, 2.0}}};
    straddle.claim = SeparableClaim{{straddle_payoff(0.5)}, {1.0}};
    const std::vector<Scenario> suite{
        testkit::constant_scenario(1.0),        testkit::linear_scenario(1.0, 1.0),
        testkit::call_scenario(0.0, 1.0, 1.0),  testkit::call_scenario(1.0, 0.5, 2.0),
        testkit::two_asset_scenario(1.0),       testkit::mixture_call_scenario(),
        straddle};
    double worst_gap = 0.0, worst_psi = 0.0;
    for (const auto& s : suite) {
        const TiltedMeasure m = testkit::solve(s);
        const PricingReport rep = consistency_report(m);
        worst_gap = std::max(worst_gap, std::abs(rep.tilt_expectation_gap));
        worst_psi = std::max(worst_psi, std::abs(rep.psi_residual));
    }
    c.require(worst_gap <= 1e-8, "E~[g] - p beyond 1e-8");
    c.require(worst_psi <= 1e-10, "psi residual beyond 1e-10");

    const QuadRule& rule = quad_rule(64);
    GaussianStream rng(20240, "xcheck_hp");
    int ok_trials = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        const double mean = 2.0 * (rng.uniform() - 0.5);
        const double var = 0.2 + 2.0 * rng.uniform();
        const double kink = mean + (rng.uniform() - 0.5) * 3.0;
        const double a = 1.2 * (rng.uniform() - 0.5);
        const double slope = 2.0 * (rng.uniform() - 0.5);
        auto fn = [=](double z) {
            const double pw = slope * std::max(z - kink, 0.0) + 0.3 * z;
            return (1.0 + std::abs(slope) * z) * std::exp(a * pw);
        };
        const double quad = cond_expect_1d(mean, var, fn, {kink}, rule);
        const auto mc = oracles::mc_gauss(
            [&fn](const std::vector<double>& z) { return fn(z[0]); }, {mean}, var, 20000,
            77000 + t);
        if (std::abs(quad - mc.value) <= 3.0 * mc.stderr_) ++ok_trials;
    }
    c.require(ok_trials >= 990, "fewer than 99% of trials inside 3 stderr");
    std::ostringstream d;
    d << "max |E~[g]-p| = " << format_double(worst_gap)
      << ", max |psi| = " << format_double(worst_psi) << ", trials ok = " << ok_trials << "/"
      << trials;
    if (!c.ok) d << "; " << c.detail.str();
    detail = d.str();
    return c.ok;
}

// 8. Market-maker optimality, statistical, pinned seed.
bool criterion8(std::string& detail) {
    Timer timer;
    Check c;
    const TiltedMeasure m = testkit::solve(testkit::call_scenario(0.0, 1.0, 1.0));
    const PathBundle bundle = simulate_paths(m.scenario->scenario, 32, 10000, 42);
    const auto rep = mm_optimality_check(bundle, m, {0.0, 0.25, 0.5});
    c.require(rep.zero_at_eps0, "delta(0) not exactly zero");
    int negative = 0;
    for (const auto& cell : rep.cells)
        if (cell.eps == 0.5 && cell.delta < -2.0 * cell.stderr_) ++negative;
    c.require(negative == kPerturbationShapes,
              "delta(0.5) not below -2 stderr for every shape");
    const double secs = timer.seconds();
    c.require(secs < 60.0, "runtime above 1 min");
    std::ostringstream d;
    d << "shapes negative at eps=0.5: " << negative << "/" << kPerturbationShapes << ", "
      << secs << " s";
    if (!c.ok) d << "; " << c.detail.str();
    detail = d.str();
    return c.ok;
}

// 9. Byte-identical hedge outputs.
bool criterion9(std::string& detail) {
    Check c;
    const std::string out1 = fresh_dir("c9_run1");
    const std::string out2 = fresh_dir("c9_run2");
    auto run = [&](const std::string& out) {
        return cli::run_cli({"hedge", "--scenario", scenario_file("call.cfg"), "--steps", "32",
                             "--paths", "300", "--seed", "4242", "--threshold", "1.0", "--out",
                             out});
    };
    c.require(run(out1) == cli::kOk, "first run failed");
    c.require(run(out2) == cli::kOk, "second run failed");
    const bool same_csv =
        slurp(out1 + "/terminal_errors.csv") == slurp(out2 + "/terminal_errors.csv");
    const bool same_json =
        slurp(out1 + "/hedge_report.json") == slurp(out2 + "/hedge_report.json");
    c.require(same_csv, "terminal_errors.csv differs between runs");
    c.require(same_json, "hedge_report.json differs between runs");
    std::ostringstream d;
    d << "csv identical = " << (same_csv ? "yes" : "no")
      << ", report identical = " << (same_json ? "yes" : "no");
    if (!c.ok) d << "; " << c.detail.str();
    detail = d.str();
    return c.ok;
}

const char* kTitles[9] = {
    "closed-form price (linear scenario)",
    "exact linear replication",
    "call replication convergence",
    "volatility formula consistency",
    "two-asset diagonal structure",
    "example1 incompleteness control",
    "tilted-measure self-consistency",
    "market-maker optimality",
    "reproducible hedge outputs",
};

bool (*kCriteria[9])(std::string&) = {criterion1, criterion2, criterion3,
                                      criterion4, criterion5, criterion6,
                                      criterion7, criterion8, criterion9};

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
    if (which.empty())
        for (int i = 1; i <= 9; ++i) which.push_back(i);

    int failures = 0;
    for (int k : which) {
        if (k < 1 || k > 9) {
            std::printf("[FAIL] criterion %d: unknown criterion\n", k);
            ++failures;
            continue;
        }
        std::string detail;
        bool ok = false;
        try {
            ok = kCriteria[k - 1](detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", k, kTitles[k - 1],
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures;
}
