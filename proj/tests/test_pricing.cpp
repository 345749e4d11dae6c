#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "impact/pricing.hpp"
#include "oracles.hpp"
#include "scenarios_common.hpp"

using namespace impact;
using testkit::solve;

namespace {

// Monte Carlo of p = E[G e^{gamma G}] / E[e^{gamma G}] with a batched
// standard error for the ratio.
oracles::McEstimate mc_price(const std::function<double(double)>& payoff, double gamma,
                             double horizon, int n, std::uint64_t seed) {
    GaussianStream stream(seed, "mc_price");
    const int batches = 25;
    const int per = n / batches;
    std::vector<double> ratios(batches);
    for (int b = 0; b < batches; ++b) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i < per; ++i) {
            const double g = payoff(std::sqrt(horizon) * stream.normal());
            const double w = std::exp(gamma * g);
            num += g * w;
            den += w;
        }
        ratios[b] = num / den;
    }
    double mean = 0.0;
    for (double r : ratios) mean += r;
    mean /= batches;
    double var = 0.0;
    for (double r : ratios) var += (r - mean) * (r - mean);
    var /= (batches - 1);
    return {mean, std::sqrt(var / batches)};
}

}  // namespace

TEST_CASE("constant claim prices at its level") {
    const TiltedMeasure m = solve(testkit::constant_scenario(2.5));
    CHECK(m.p == Catch::Approx(2.5).margin(1e-12));
    const auto rep = consistency_report(m);
    CHECK(std::abs(rep.psi_residual) <= 1e-12);
    CHECK(std::abs(rep.tilt_expectation_gap) <= 1e-12);
}

TEST_CASE("linear claim reproduces the Gaussian tilting identity") {
    // E[X e^{gamma X}] / E[e^{gamma X}] = gamma T for X ~ N(0, T)
    const TiltedMeasure m = solve(testkit::linear_scenario(1.0, 1.0));
    CHECK(m.p == Catch::Approx(1.0).margin(1e-10));
    REQUIRE(m.closed_form_p.has_value());
    CHECK(*m.closed_form_p == Catch::Approx(1.0).margin(1e-10));
    CHECK(std::abs(m.p - *m.closed_form_p) <= 1e-10);

    const TiltedMeasure m2 = solve(testkit::linear_scenario(0.7, 2.0));
    CHECK(m2.p == Catch::Approx(1.4).margin(1e-10));

    const auto mc = mc_price([](double z) { return z; }, 1.0, 1.0, 500000, 31);
    CHECK(std::abs(m.p - mc.value) <= 3.0 * mc.stderr_);
}

TEST_CASE("call price matches the closed form and brute-force Monte Carlo") {
    const TiltedMeasure m = solve(testkit::call_scenario(0.0, 0.5, 1.0));
    const double want = oracles::exp_utility_call_price(0.0, 1.0, 0.5, 0.0);
    CHECK(m.p == Catch::Approx(want).margin(1e-10));

    const auto mc = mc_price([](double z) { return std::max(z, 0.0); }, 0.5, 1.0, 2000000, 77);
    CHECK(std::abs(m.p - mc.value) <= 3.0 * mc.stderr_);

    // pinned value computed from the erfc closed form
    CHECK(want == Catch::Approx(0.6160412).margin(5e-7));
}

TEST_CASE("solver agrees with the closed form across scenarios") {
    for (double gamma : {0.25, 1.0, 2.0}) {
        for (double strike : {-0.5, 0.0, 1.0}) {
            const TiltedMeasure m = solve(testkit::call_scenario(strike, gamma, 1.5));
            REQUIRE(m.closed_form_p.has_value());
            CHECK(std::abs(m.p - *m.closed_form_p) <= 1e-10 * std::max(1.0, std::abs(m.p)));
        }
    }
}

TEST_CASE("tilt weight ratios follow the exponential algebra") {
    const TiltedMeasure m = solve(testkit::call_scenario(0.0, 1.0, 1.0));
    // single exponential: weight(z1)/weight(z2) = exp(gamma (G(z1) - G(z2)))
    const double r = tilt_weight(m, {2.0}) / tilt_weight(m, {-1.0});
    CHECK(r == Catch::Approx(std::exp(2.0 - 0.0)).epsilon(1e-12));

    const TiltedMeasure mc = solve(testkit::constant_scenario(1.0));
    CHECK(tilt_weight(mc, {3.0}) == Catch::Approx(tilt_weight(mc, {-3.0})).epsilon(1e-13));

    // mixture: ratio matches a direct marginal-utility evaluation
    const TiltedMeasure mm = solve(testkit::mixture_call_scenario());
    const Scenario& s = mm.scenario->scenario;
    const double z1 = 1.0, z2 = 0.0;  // G(z1) = 1, G(z2) = 0
    const double direct = s.utility.marginal(s.initial_wealth + mm.p - 1.0) /
                          s.utility.marginal(s.initial_wealth + mm.p - 0.0);
    CHECK(tilt_weight(mm, {z1}) / tilt_weight(mm, {z2}) == Catch::Approx(direct).epsilon(1e-12));
    CHECK(tilt_weight(mm, {-5.0}) > 0.0);
    CHECK(tilt_weight(mm, {5.0}) > 0.0);
}

TEST_CASE("convex claims price above the untilted expectation") {
    const std::vector<Scenario> suite{
        testkit::call_scenario(0.0, 1.0),   testkit::call_scenario(1.0, 0.5),
        testkit::call_scenario(-1.0, 2.0),  testkit::two_asset_scenario(1.0),
        testkit::linear_scenario(1.0, 1.0),
    };
    for (const auto& s : suite) {
        const TiltedMeasure m = solve(s);
        CHECK(m.p >= m.base_price - 1e-10);
    }
}

TEST_CASE("price is continuous at vanishing risk aversion") {
    const TiltedMeasure m = solve(testkit::call_scenario(0.0, 1e-4, 1.0));
    const double base = m.base_price;
    CHECK(std::abs(m.p - base) <= 1e-3 * std::max(1.0, std::abs(base)));
}

TEST_CASE("consistency report residuals are tiny across the suite") {
    const std::vector<Scenario> suite{
        testkit::constant_scenario(1.0), testkit::linear_scenario(1.0, 1.0),
        testkit::call_scenario(0.0, 1.0), testkit::two_asset_scenario(1.0),
        testkit::mixture_call_scenario(),
    };
    for (const auto& s : suite) {
        const TiltedMeasure m = solve(s);
        const auto rep = consistency_report(m);
        CHECK(std::abs(rep.psi_residual) <= 1e-10);
        CHECK(std::abs(rep.tilt_expectation_gap) <= 1e-8);
        CHECK(rep.unique);
    }
}

TEST_CASE("norm0 is the unconditional weight expectation") {
    const TiltedMeasure m = solve(testkit::call_scenario(0.0, 1.0, 1.0));
    // E[e^{(Z)^+ } ] scaled by e^{-(x+p)}
    const double want = std::exp(-m.p) * oracles::tilted_call_mass(0.0, 1.0, 1.0, 0.0);
    CHECK(m.norm0 == Catch::Approx(want).epsilon(1e-11));
}

TEST_CASE("smooth claims price through the tensor route") {
    Scenario s;
    s.num_assets = 2;
    s.horizon = 1.0;
    s.utility = {{{1.0, 1.0}}};
    // smooth approximation of a basket option via softplus
    s.claim = SmoothClaim{
        [](const std::vector<double>& z) {
            const double y = 0.5 * (z[0] + z[1]);
            return std::log1p(std::exp(y));
        },
        [](const std::vector<double>& z) {
            const double y = 0.5 * (z[0] + z[1]);
            const double d = 1.0 / (1.0 + std::exp(-y));
            return std::vector<double>{0.5 * d, 0.5 * d};
        },
        1.0, 2};
    const TiltedMeasure m = solve(s);
    const auto mc = oracles::mc_gauss(
        [&s, &m](const std::vector<double>& z) {
            return (claim_value(s.claim, z) - m.p) * tilt_weight(m, z);
        },
        {0.0, 0.0}, 1.0, 400000, 2025);
    CHECK(std::abs(mc.value) <= 3.0 * mc.stderr_);
}
