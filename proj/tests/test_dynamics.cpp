#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "impact/dynamics.hpp"
#include "impact/hedging.hpp"
#include "oracles.hpp"
#include "scenarios_common.hpp"

using namespace impact;
using testkit::solve;

namespace {

std::vector<State> random_states(const Scenario& s, int n, std::uint64_t seed,
                                 double t_max_frac = 0.95) {
    GaussianStream rng(seed, "states");
    std::vector<State> out;
    const std::size_t dim = static_cast<std::size_t>(s.num_assets);
    for (int i = 0; i < n; ++i) {
        State st;
        st.t = t_max_frac * s.horizon * rng.uniform();
        st.b.resize(dim);
        for (auto& b : st.b) b = 1.5 * std::sqrt(s.horizon) * rng.normal();
        out.push_back(std::move(st));
    }
    return out;
}

}  // namespace

TEST_CASE("price surface hits the terminal boundary exactly") {
    const TiltedMeasure m = solve(testkit::call_scenario());
    const State st{1.0, {0.731}};
    const auto s = price_fn(m, st);
    CHECK(s[0] == 0.731);
    CHECK(claim_fn(m, st) == Catch::Approx(std::max(0.731, 0.0)).margin(1e-15));
}

TEST_CASE("constant claim leaves the Brownian motion a martingale") {
    const TiltedMeasure m = solve(testkit::constant_scenario(3.0));
    for (double t : {0.0, 0.4, 0.99}) {
        for (double b : {-1.2, 0.0, 2.0}) {
            CHECK(price_fn(m, {t, {b}})[0] == Catch::Approx(b).margin(1e-11));
        }
    }
    const auto vol = vol_matrix_general(m, {0.3, {0.5}});
    CHECK(vol.entries(0, 0) == Catch::Approx(1.0).margin(1e-11));
    CHECK(girsanov_drift(m, {0.3, {0.5}})[0] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("linear claim surfaces are the tilted affine closed forms") {
    const double gamma = 1.0, T = 1.0;
    const TiltedMeasure m = solve(testkit::linear_scenario(gamma, T));
    for (double t : {0.0, 0.25, 0.9}) {
        for (double b : {-2.0, 0.0, 1.3}) {
            const State st{t, {b}};
            CHECK(price_fn(m, st)[0] == Catch::Approx(b + gamma * (T - t)).margin(1e-10));
            CHECK(claim_fn(m, st) == Catch::Approx(b + gamma * (T - t)).margin(1e-10));
            CHECK(girsanov_drift(m, st)[0] == Catch::Approx(gamma).margin(1e-10));
            const auto vol = vol_matrix_general(m, st);
            CHECK(vol.entries(0, 0) == Catch::Approx(1.0).margin(1e-10));
            CHECK(vol.min_sv == Catch::Approx(1.0).margin(1e-10));
        }
    }
}

TEST_CASE("claim surface interpolates the price at the origin") {
    const TiltedMeasure m = solve(testkit::call_scenario());
    CHECK(claim_fn(m, {0.0, {0.0}}) == Catch::Approx(m.p).margin(1e-11));
}

TEST_CASE("drift of the call scenario is the tilted tail probability") {
    const TiltedMeasure m = solve(testkit::call_scenario(0.0, 1.0, 1.0));
    for (double t : {0.0, 0.5}) {
        for (double b : {-1.0, 0.0, 0.8}) {
            const double a = girsanov_drift(m, {t, {b}})[0];
            const double want = oracles::tilted_tail_probability(b, 1.0 - t, 1.0, 0.0);
            CHECK(a == Catch::Approx(want).margin(1e-10));
            CHECK(a > 0.0);
            CHECK(a < 1.0);
        }
    }
}

TEST_CASE("volatility formulas agree between the general and covariance routes") {
    for (const auto& scen :
         {testkit::call_scenario(0.0, 1.0), testkit::call_scenario(0.7, 0.5, 2.0),
          testkit::two_asset_scenario(1.0)}) {
        const TiltedMeasure m = solve(scen);
        for (const auto& st : random_states(scen, 25, 99)) {
            const auto general = vol_matrix_general(m, st);
            const auto bach = vol_matrix_bachelier(m, st);
            const std::size_t n = general.entries.n;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    CHECK(general.entries(i, j) ==
                          Catch::Approx(bach.entries(i, j)).margin(1e-9));
        }
    }
}

TEST_CASE("covariance route refuses mixtures") {
    const TiltedMeasure m = solve(testkit::mixture_call_scenario());
    CHECK_THROWS_AS(vol_matrix_bachelier(m, {0.0, {0.0}}), EngineError);
    CHECK_NOTHROW(vol_matrix_general(m, {0.0, {0.0}}));
}

TEST_CASE("call volatility exceeds one and matches a Monte Carlo covariance") {
    const TiltedMeasure m = solve(testkit::call_scenario(0.0, 1.0, 1.0));
    const auto vol = vol_matrix_general(m, {0.0, {0.0}});
    CHECK(vol.entries(0, 0) > 1.0);

    // sigma11 = 1 + gamma Cov~(B_T, 1_{B_T > 0}); estimate the tilted
    // covariance by weighted Monte Carlo
    GaussianStream rng(4242, "cov_mc");
    const int n = 400000;
    double sw = 0.0, szw = 0.0, sdw = 0.0, szdw = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        const double w = std::exp(std::max(z, 0.0));
        const double d = z > 0.0 ? 1.0 : 0.0;
        sw += w;
        szw += z * w;
        sdw += d * w;
        szdw += z * d * w;
    }
    const double cov = szdw / sw - (szw / sw) * (sdw / sw);
    CHECK(vol.entries(0, 0) == Catch::Approx(1.0 + cov).margin(0.01));
}

TEST_CASE("separable convex claims give diagonal volatility with unit floor") {
    const TiltedMeasure m = solve(testkit::two_asset_scenario(1.0));
    for (const auto& st : random_states(m.scenario->scenario, 40, 7)) {
        const auto vol = vol_matrix_general(m, st);
        CHECK(std::abs(vol.entries(0, 1)) <= 1e-10);
        CHECK(std::abs(vol.entries(1, 0)) <= 1e-10);
        CHECK(vol.entries(0, 0) >= 1.0 - 1e-10);
        CHECK(vol.entries(1, 1) >= 1.0 - 1e-10);
        CHECK(vol.min_sv >= 1.0 - 1e-8);
    }
}

TEST_CASE("volatility equals the spatial derivative of the price surface") {
    for (const auto& scen : {testkit::call_scenario(0.0, 1.0), testkit::two_asset_scenario(0.8)}) {
        const TiltedMeasure m = solve(scen);
        for (const auto& st : random_states(scen, 12, 31)) {
            const auto vol = vol_matrix_general(m, st);
            const double h = 1e-4 * std::sqrt(scen.horizon - st.t);
            const std::size_t dim = st.b.size();
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = 0; j < dim; ++j) {
                    State up = st, dn = st;
                    up.b[j] += h;
                    dn.b[j] -= h;
                    const double fd =
                        (price_fn(m, up)[i] - price_fn(m, dn)[i]) / (2.0 * h);
                    CHECK(vol.entries(i, j) == Catch::Approx(fd).margin(1e-4));
                }
        }
    }
}

TEST_CASE("mixture utilities satisfy the same delta identity") {
    const TiltedMeasure m = solve(testkit::mixture_call_scenario());
    for (const auto& st : random_states(m.scenario->scenario, 10, 17)) {
        const auto vol = vol_matrix_general(m, st);
        const double h = 1e-4;
        State up = st, dn = st;
        up.b[0] += h;
        dn.b[0] -= h;
        const double fd = (price_fn(m, up)[0] - price_fn(m, dn)[0]) / (2.0 * h);
        CHECK(vol.entries(0, 0) == Catch::Approx(fd).margin(1e-4));
    }
}

TEST_CASE("volatility tends to the identity at maturity") {
    const TiltedMeasure m = solve(testkit::call_scenario());
    const auto vol = vol_matrix_general(m, {1.0 - 1e-6, {0.4}});
    CHECK(vol.entries(0, 0) == Catch::Approx(1.0).margin(1e-3));
    const auto vol_exact = vol_matrix_general(m, {1.0, {0.4}});
    CHECK(vol_exact.entries(0, 0) == 1.0);
}

TEST_CASE("completeness scan on the call grid") {
    const TiltedMeasure m = solve(testkit::call_scenario());
    std::vector<State> grid;
    for (double t : {0.0, 0.3, 0.6, 0.9})
        for (double b = -2.0; b <= 2.0; b += 0.5) grid.push_back({t, {b}});
    const auto rep = completeness_scan(m, grid);
    CHECK(rep.complete);
    CHECK(rep.overall_min >= 1.0 - 1e-6);
    CHECK(rep.failing.empty());
}

TEST_CASE("example1 scan fails before tau and clears after") {
    const TiltedMeasure m = solve(testkit::example1_scenario(0.5, 1.0));
    std::vector<State> grid;
    for (double t : {0.0, 0.2, 0.49, 0.5, 0.7, 1.0}) grid.push_back({t, {0.3}});
    const auto rep = completeness_scan(m, grid);
    CHECK_FALSE(rep.complete);
    CHECK(rep.overall_min == 0.0);
    for (const auto& row : rep.rows) {
        if (row.state.t < 0.5) {
            CHECK(row.min_sv == 0.0);
        } else {
            CHECK(row.min_sv == 1.0);
        }
    }
}

TEST_CASE("example1 closed-form dynamics") {
    const double tau = 0.5;
    const auto before = example1_dynamics(0.2, 0.7, tau);
    CHECK(before.stilde == 0.0);
    CHECK(before.sigma == 0.0);

    const auto at_T = example1_dynamics(1.0, 0.7, tau);
    CHECK(at_T.sigma == 1.0);

    // anchored at btilde_tau: stilde follows Btilde after tau
    const double btilde_tau = 0.1 - tau;
    const auto after = example1_dynamics(0.8, 0.9, tau, btilde_tau);
    CHECK(after.stilde == Catch::Approx((0.9 - 0.8) - btilde_tau).margin(1e-15));

    // tau = 0 degenerates to the complete linear Bachelier case
    const auto full = example1_dynamics(0.3, 0.4, 0.0);
    CHECK(full.sigma == 1.0);
    CHECK(full.stilde == Catch::Approx(0.4 - 0.3).margin(1e-15));
}

TEST_CASE("price evaluation refuses example1 traded assets") {
    const TiltedMeasure m = solve(testkit::example1_scenario());
    CHECK_THROWS_AS(price_fn(m, {0.0, {0.0}}), EngineError);
}

TEST_CASE("full consistency report cross-checks the dynamics route") {
    const TiltedMeasure m = solve(testkit::call_scenario());
    const auto rep = full_consistency_report(m);
    CHECK(std::abs(rep.psi_residual) <= 1e-10);
    CHECK(std::abs(rep.tilt_expectation_gap) <= 1e-8);
    CHECK(std::abs(rep.stilde0_gap) <= 1e-9);
}

TEST_CASE("three-asset separable scenarios use the product factorization") {
    Scenario s;
    s.num_assets = 3;
    s.horizon = 1.0;
    s.utility = {{{1.0, 1.0}}};
    s.claim = SeparableClaim{{call_payoff(0.0), put_payoff(0.5), straddle_payoff(-0.5)},
                             {0.5, 0.3, 0.2}};
    const TiltedMeasure m = solve(s);
    const State st{0.4, {0.2, -0.3, 0.5}};
    const auto vol = vol_matrix_general(m, st);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) {
                CHECK(vol.entries(i, i) >= 1.0 - 1e-10);
            } else {
                CHECK(std::abs(vol.entries(i, j)) <= 1e-10);
            }
            State up = st, dn = st;
            up.b[j] += 1e-4;
            dn.b[j] -= 1e-4;
            const double fd = (price_fn(m, up)[i] - price_fn(m, dn)[i]) / 2e-4;
            CHECK(vol.entries(i, j) == Catch::Approx(fd).margin(1e-4));
        }
    }
    CHECK(vol.min_sv >= 1.0 - 1e-8);
    const auto h = hedge_ratio_from_eval(evaluate_state(m, st), s);
    CHECK(h.H.size() == 3);
    CHECK(h.H[0] >= 0.0);   // call leg
    CHECK(h.H[1] <= 0.0);   // put leg
}

TEST_CASE("smooth claims run through the tensor evaluator") {
    Scenario s;
    s.num_assets = 1;
    s.horizon = 1.0;
    s.utility = {{{1.0, 1.0}}};
    s.claim = SmoothClaim{
        [](const std::vector<double>& z) { return std::log1p(std::exp(z[0])); },
        [](const std::vector<double>& z) {
            return std::vector<double>{1.0 / (1.0 + std::exp(-z[0]))};
        },
        1.0, 1};
    const TiltedMeasure m = solve(s);
    for (const auto& st : random_states(s, 8, 3)) {
        const auto vol = vol_matrix_general(m, st);
        const double h = 1e-4;
        State up = st, dn = st;
        up.b[0] += h;
        dn.b[0] -= h;
        const double fd = (price_fn(m, up)[0] - price_fn(m, dn)[0]) / (2.0 * h);
        CHECK(vol.entries(0, 0) == Catch::Approx(fd).margin(1e-4));
        const auto bach = vol_matrix_bachelier(m, st);
        CHECK(bach.entries(0, 0) == Catch::Approx(vol.entries(0, 0)).margin(1e-9));
    }
}
