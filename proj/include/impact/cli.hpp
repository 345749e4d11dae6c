#pragma once

// Command-line front end: price / surface / hedge / verify.
//
// Exit codes: 0 success, 1 threshold or generic failure, 2 validation,
// 3 non-unique price root, 4 incomplete market, 5 verify failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "impact/config.hpp"
#include "impact/dynamics.hpp"
#include "impact/hedging.hpp"
#include "impact/pricing.hpp"
#include "impact/report.hpp"
#include "impact/simulate.hpp"

namespace impact::cli {

inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kValidation = 2;
inline constexpr int kNonUniquePrice = 3;
inline constexpr int kIncompleteMarket = 4;
inline constexpr int kVerifyFailure = 5;

struct GridSpec {
    double lo = 0.0;
    double hi = 0.0;
    int n = 1;

    std::vector<double> points() const {
        std::vector<double> out;
        if (n <= 1) {
            out.push_back(lo);
            return out;
        }
        for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
        return out;
    }
};

/// Parse "a:b:n" into a grid specification.
inline GridSpec parse_grid(const std::string& text) {
    GridSpec g;
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw ValidationError("grid", "expected 'lo:hi:n', got '" + text + "'");
    try {
        g.lo = std::stod(text.substr(0, c1));
        g.hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
        g.n = std::stoi(text.substr(c2 + 1));
    } catch (const std::exception&) {
        throw ValidationError("grid", "expected 'lo:hi:n', got '" + text + "'");
    }
    if (g.n < 1) throw ValidationError("grid", "grid needs at least one point");
    return g;
}

namespace detail {

struct Args {
    std::string scenario_path;
    std::string out_dir;
    std::string t_grid = "0:0.9:4";
    std::string b_grid = "-2:2:9";
    std::string study;  // comma-separated step counts
    int steps = 0;
    int paths = 0;
    std::uint64_t seed = 0;
    bool seed_given = false;
    double threshold = -1.0;
    bool dump_paths = false;
    bool check_manifest_flag = false;
};

inline int check_manifest_and_report(const std::string& out_dir) {
    if (out_dir.empty()) {
        std::cerr << "--check-manifest requires --out DIR\n";
        return kValidation;
    }
    const ManifestCheck c = check_manifest(out_dir);
    if (c.ok) {
        std::cout << "manifest ok: all outputs match\n";
        return kOk;
    }
    for (const auto& p : c.problems) std::cout << "manifest mismatch: " << p << '\n';
    return kVerifyFailure;
}

inline std::shared_ptr<const ValidatedScenario> load_validated(const std::string& path) {
    return std::make_shared<const ValidatedScenario>(validate(load_scenario(path)));
}

inline void ensure_out_dir(const std::string& dir) {
    if (!dir.empty()) std::filesystem::create_directories(dir);
}

inline nlohmann::json pricing_report_json(const PricingReport& rep,
                                          const TiltedMeasure& m) {
    nlohmann::json j;
    j["p"] = rep.p;
    j["base_price"] = m.base_price;
    if (m.closed_form_p) j["closed_form_p"] = *m.closed_form_p;
    j["psi_residual"] = rep.psi_residual;
    j["tilt_expectation_gap"] = rep.tilt_expectation_gap;
    j["closed_form_gap"] = rep.closed_form_gap;
    j["stilde0_gap"] = rep.stilde0_gap;
    j["unique_root"] = rep.unique;
    j["roots"] = m.roots;
    return j;
}

}  // namespace detail

inline int cmd_price(const detail::Args& a) {
    if (a.check_manifest_flag) return detail::check_manifest_and_report(a.out_dir);
    WallClock clock;
    std::shared_ptr<const ValidatedScenario> vs;
    TiltedMeasure m;
    try {
        vs = detail::load_validated(a.scenario_path);
        m = solve_price(vs);
    } catch (const ValidationError& e) {
        std::cerr << e.what() << '\n';
        return kValidation;
    } catch (const NonUniquePriceError& e) {
        std::cerr << e.what() << ":";
        for (double r : e.roots) std::cerr << ' ' << format_double(r);
        std::cerr << '\n';
        return kNonUniquePrice;
    }
    const PricingReport rep = full_consistency_report(m);
    std::cout << "p                  = " << format_double(rep.p) << '\n';
    if (m.closed_form_p)
        std::cout << "closed-form p      = " << format_double(*m.closed_form_p) << '\n';
    std::cout << "psi residual       = " << format_double(rep.psi_residual) << '\n'
              << "E~[g] - p          = " << format_double(rep.tilt_expectation_gap) << '\n'
              << "unique root        = " << (rep.unique ? "yes" : "no") << '\n';
    if (!a.out_dir.empty()) {
        detail::ensure_out_dir(a.out_dir);
        std::ofstream out(std::filesystem::path(a.out_dir) / "price.json", std::ios::binary);
        out << detail::pricing_report_json(rep, m).dump(2) << '\n';
        out.close();
        RunManifest man;
        man.command = "price";
        man.scenario_path = a.scenario_path;
        man.out_dir = a.out_dir;
        man.numerics = vs->scenario.numerics;
        man.seed = vs->scenario.numerics.seed;
        man.outputs = {"price.json"};
        man.wall_ms = clock.ms();
        man.write();
    }
    return kOk;
}

inline int cmd_surface(const detail::Args& a) {
    if (a.check_manifest_flag) return detail::check_manifest_and_report(a.out_dir);
    WallClock clock;
    std::shared_ptr<const ValidatedScenario> vs;
    TiltedMeasure m;
    GridSpec tg, bg;
    try {
        vs = detail::load_validated(a.scenario_path);
        if (vs->scenario.traded != Traded::bachelier)
            throw ValidationError("traded", "surface requires Bachelier traded assets");
        tg = parse_grid(a.t_grid);
        bg = parse_grid(a.b_grid);
        if (tg.lo < 0.0 || tg.hi > vs->scenario.horizon)
            throw ValidationError("t-grid", "time grid outside [0, T]");
        m = solve_price(vs);
    } catch (const ValidationError& e) {
        std::cerr << e.what() << '\n';
        return kValidation;
    } catch (const NonUniquePriceError& e) {
        std::cerr << e.what() << '\n';
        return kNonUniquePrice;
    }

    const Scenario& s = vs->scenario;
    const std::size_t dim = static_cast<std::size_t>(s.num_assets);
    std::vector<std::string> header{"t"};
    for (std::size_t j = 0; j < dim; ++j) header.push_back("b" + std::to_string(j + 1));
    for (std::size_t j = 0; j < dim; ++j) header.push_back("stilde" + std::to_string(j + 1));
    header.push_back("ghat");
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            header.push_back("sigma" + std::to_string(i + 1) + std::to_string(j + 1));
    header.push_back("min_sv");
    for (std::size_t j = 0; j < dim; ++j) header.push_back("H" + std::to_string(j + 1));
    CsvWriter csv(header);

    const auto t_points = tg.points();
    const auto b_points = bg.points();
    std::vector<std::size_t> idx(dim, 0);
    for (double t : t_points) {
        idx.assign(dim, 0);
        while (true) {
            State st{t, std::vector<double>(dim)};
            for (std::size_t j = 0; j < dim; ++j) st.b[j] = b_points[idx[j]];
            const StateEval ev = evaluate_state(m, st);
            const double min_sv = min_singular_value(ev.sigma);
            std::vector<double> row{t};
            row.insert(row.end(), st.b.begin(), st.b.end());
            row.insert(row.end(), ev.stilde.begin(), ev.stilde.end());
            row.push_back(ev.ghat);
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = 0; j < dim; ++j) row.push_back(ev.sigma(i, j));
            row.push_back(min_sv);
            if (min_sv >= s.numerics.sv_tolerance) {
                const HedgeRatio h = hedge_ratio_from_eval(ev, s);
                row.insert(row.end(), h.H.begin(), h.H.end());
            } else {
                row.insert(row.end(), dim, std::nan(""));
            }
            csv.add_row(row);
            std::size_t j = 0;
            while (j < dim && ++idx[j] == b_points.size()) {
                idx[j] = 0;
                ++j;
            }
            if (j == dim) break;
        }
    }

    detail::ensure_out_dir(a.out_dir);
    const std::string csv_path = (std::filesystem::path(a.out_dir) / "surface.csv").string();
    csv.write(csv_path);
    std::cout << "wrote " << csv_path << '\n';

    RunManifest man;
    man.command = "surface";
    man.scenario_path = a.scenario_path;
    man.out_dir = a.out_dir;
    man.numerics = s.numerics;
    man.seed = s.numerics.seed;
    man.outputs = {"surface.csv"};
    man.wall_ms = clock.ms();
    man.write();
    return kOk;
}

inline int cmd_hedge(const detail::Args& a) {
    if (a.check_manifest_flag) return detail::check_manifest_and_report(a.out_dir);
    WallClock clock;
    std::shared_ptr<const ValidatedScenario> vs;
    TiltedMeasure m;
    try {
        vs = detail::load_validated(a.scenario_path);
        m = solve_price(vs);
    } catch (const ValidationError& e) {
        std::cerr << e.what() << '\n';
        return kValidation;
    } catch (const NonUniquePriceError& e) {
        std::cerr << e.what() << '\n';
        return kNonUniquePrice;
    }

    const Scenario& s = vs->scenario;
    const int steps = a.steps > 0 ? a.steps : s.numerics.time_steps;
    const int paths = a.paths > 0 ? a.paths : s.numerics.mc_paths;
    const std::uint64_t seed = a.seed_given ? a.seed : s.numerics.seed;
    const double threshold = a.threshold >= 0.0 ? a.threshold : s.hedge_threshold;

    HedgeReport rep;
    ResidualReport resid;
    try {
        const PathBundle bundle = simulate_paths(s, steps, paths, seed);
        rep = replicate(bundle, m, {.store_trajectories = a.dump_paths});
        const PathBundle small =
            simulate_paths(s, steps, std::min(paths, 200), seed);
        resid = martingale_residual_check(small, m);
    } catch (const IncompleteMarketError& e) {
        std::cerr << "incomplete market: " << e.what() << '\n';
        return kIncompleteMarket;
    }

    std::cout << "paths = " << paths << ", steps = " << steps << ", seed = " << seed << '\n'
              << "rms terminal error = " << format_double(rep.rms) << '\n'
              << "max |error|        = " << format_double(rep.max_abs) << '\n'
              << "residual ratio     = " << format_double(resid.ratio) << '\n';

    detail::ensure_out_dir(a.out_dir);
    RunManifest man;
    man.command = "hedge";
    man.scenario_path = a.scenario_path;
    man.out_dir = a.out_dir;
    man.numerics = s.numerics;
    man.numerics.time_steps = steps;
    man.numerics.mc_paths = paths;
    man.numerics.seed = seed;
    man.seed = seed;

    CsvWriter errs({"path", "terminal_error"});
    for (std::size_t i = 0; i < rep.terminal_errors.size(); ++i)
        errs.add_row({static_cast<double>(i), rep.terminal_errors[i]});
    errs.write((std::filesystem::path(a.out_dir) / "terminal_errors.csv").string());
    man.outputs.push_back("terminal_errors.csv");

    nlohmann::json j;
    j["p"] = m.p;
    j["rms"] = rep.rms;
    j["max_abs"] = rep.max_abs;
    j["steps"] = steps;
    j["paths"] = paths;
    j["seed"] = seed;
    j["threshold"] = threshold;
    j["within_threshold"] = rep.rms <= threshold;
    j["martingale_residual"] = {{"steps_coarse", resid.steps_coarse},
                                {"mean_coarse", resid.mean_residual_coarse},
                                {"mean_fine", resid.mean_residual_fine},
                                {"ratio", resid.ratio}};

    if (!a.study.empty()) {
        std::vector<int> steps_list;
        std::istringstream in(a.study);
        std::string tok;
        while (std::getline(in, tok, ',')) steps_list.push_back(std::stoi(tok));
        const auto rows = convergence_study(m, steps_list, paths, seed);
        CsvWriter study({"steps", "rms", "max_abs"});
        j["study"] = nlohmann::json::array();
        for (const auto& r : rows) {
            study.add_row({static_cast<double>(r.steps), r.rms, r.max_abs});
            j["study"].push_back({{"steps", r.steps}, {"rms", r.rms}, {"max_abs", r.max_abs}});
        }
        study.write((std::filesystem::path(a.out_dir) / "study.csv").string());
        man.outputs.push_back("study.csv");
    }

    if (a.dump_paths) {
        const std::size_t dim = static_cast<std::size_t>(s.num_assets);
        std::vector<std::string> header{"path", "k", "t"};
        for (std::size_t c = 0; c < dim; ++c) header.push_back("b" + std::to_string(c + 1));
        for (std::size_t c = 0; c < dim; ++c) header.push_back("stilde" + std::to_string(c + 1));
        for (std::size_t c = 0; c < dim; ++c) header.push_back("H" + std::to_string(c + 1));
        header.push_back("W");
        CsvWriter tr(header);
        for (const auto& pt : rep.trajectories) {
            std::vector<double> row{static_cast<double>(pt.path), static_cast<double>(pt.step),
                                    pt.t};
            row.insert(row.end(), pt.b.begin(), pt.b.end());
            row.insert(row.end(), pt.stilde.begin(), pt.stilde.end());
            row.insert(row.end(), pt.holdings.begin(), pt.holdings.end());
            row.push_back(pt.wealth);
            tr.add_row(row);
        }
        tr.write((std::filesystem::path(a.out_dir) / "trajectories.csv").string());
        man.outputs.push_back("trajectories.csv");
    }

    {
        std::ofstream out(std::filesystem::path(a.out_dir) / "hedge_report.json",
                          std::ios::binary);
        out << j.dump(2) << '\n';
    }
    man.outputs.push_back("hedge_report.json");
    man.wall_ms = clock.ms();
    man.write();

    if (rep.rms > threshold) {
        std::cerr << "rms " << format_double(rep.rms) << " above threshold "
                  << format_double(threshold) << '\n';
        return kFailure;
    }
    return kOk;
}

namespace detail {

struct VerifyCheck {
    std::string name;
    std::string status;  // PASS / FAIL / SKIP
    std::string detail;
};

inline bool quadrature_selftest(std::string& detail_out) {
    std::ostringstream msg;
    bool ok = true;
    for (int order : {8, 64}) {
        const QuadRule& r = quad_rule(order);
        double sum = 0.0;
        for (double w : r.weights) sum += w;
        if (std::abs(sum - 1.0) > 1e-12) ok = false;
        const double want[5] = {1.0, 1.0, 3.0, 15.0, 105.0};
        for (int k = 0; k <= std::min(8, 2 * order - 1); k += 2) {
            double acc = 0.0;
            for (std::size_t i = 0; i < r.order(); ++i)
                acc += r.weights[i] * std::pow(r.nodes[i], k);
            if (std::abs(acc - want[k / 2]) > 1e-9 * want[k / 2]) ok = false;
        }
    }
    const QuadRule& r = quad_rule(64);
    const double mgf =
        cond_expect_1d(0.0, 1.0, [](double z) { return std::exp(z); }, {0.3}, r);
    if (std::abs(mgf - std::exp(0.5)) > 1e-11) ok = false;
    msg << "mgf gap " << format_double(mgf - std::exp(0.5));
    detail_out = msg.str();
    return ok;
}

}  // namespace detail

inline int cmd_verify(const detail::Args& a) {
    if (a.check_manifest_flag) return detail::check_manifest_and_report(a.out_dir);
    WallClock clock;
    std::shared_ptr<const ValidatedScenario> vs;
    TiltedMeasure m;
    try {
        vs = detail::load_validated(a.scenario_path);
        m = solve_price(vs);
    } catch (const ValidationError& e) {
        std::cerr << e.what() << '\n';
        return kValidation;
    } catch (const NonUniquePriceError& e) {
        std::cerr << e.what() << '\n';
        return kNonUniquePrice;
    }

    const Scenario& s = vs->scenario;
    const bool example1 = s.traded == Traded::example1;
    const bool single_exp = s.utility.single_exponential();
    const auto* sep = std::get_if<SeparableClaim>(&s.claim);
    const std::size_t dim = static_cast<std::size_t>(s.num_assets);
    std::vector<detail::VerifyCheck> checks;
    ScanReport scan;

    {
        std::string d;
        const bool ok = detail::quadrature_selftest(d);
        checks.push_back({"quadrature", ok ? "PASS" : "FAIL", d});
    }

    if (!example1) {
        const PricingReport rep = full_consistency_report(m);
        const bool ok = std::abs(rep.psi_residual) <=
                            std::max(1e-10, s.numerics.root_tolerance) &&
                        std::abs(rep.tilt_expectation_gap) <= 1e-8 &&
                        std::abs(rep.closed_form_gap) <= 1e-10 &&
                        std::abs(rep.stilde0_gap) <= 1e-8 && rep.unique;
        std::ostringstream d;
        d << "psi " << format_double(rep.psi_residual) << ", E~[g]-p "
          << format_double(rep.tilt_expectation_gap);
        checks.push_back({"price-consistency", ok ? "PASS" : "FAIL", d.str()});
    } else {
        checks.push_back({"price-consistency", "SKIP", "example1"});
    }

    GaussianStream rng(s.numerics.seed, "verify_states");
    auto random_state = [&]() {
        State st;
        st.t = 0.95 * s.horizon * rng.uniform();
        st.b.resize(dim);
        for (auto& b : st.b) b = 1.5 * std::sqrt(s.horizon) * rng.normal();
        return st;
    };

    if (!example1 && single_exp) {
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            const State st = random_state();
            const auto g = vol_matrix_general(m, st);
            const auto b = vol_matrix_bachelier(m, st);
            for (std::size_t r = 0; r < dim; ++r)
                for (std::size_t c = 0; c < dim; ++c)
                    worst = std::max(worst, std::abs(g.entries(r, c) - b.entries(r, c)));
        }
        checks.push_back({"vol-consistency", worst <= 1e-6 ? "PASS" : "FAIL",
                          "max gap " + format_double(worst)});
    } else {
        checks.push_back({"vol-consistency", "SKIP", example1 ? "example1" : "mixture utility"});
    }

    if (!example1) {
        double worst = 0.0;
        for (int i = 0; i < 25; ++i) {
            const State st = random_state();
            const auto vol = vol_matrix_general(m, st);
            const double h = 1e-4 * std::sqrt(s.horizon - st.t);
            for (std::size_t r = 0; r < dim; ++r)
                for (std::size_t c = 0; c < dim; ++c) {
                    State up = st, dn = st;
                    up.b[c] += h;
                    dn.b[c] -= h;
                    const double fd = (price_fn(m, up)[r] - price_fn(m, dn)[r]) / (2.0 * h);
                    worst = std::max(worst, std::abs(vol.entries(r, c) - fd));
                }
        }
        checks.push_back({"delta-identity", worst <= 1e-4 ? "PASS" : "FAIL",
                          "max gap " + format_double(worst)});
    } else {
        checks.push_back({"delta-identity", "SKIP", "example1"});
    }

    if (!example1 && single_exp && sep && sep->convex()) {
        double max_off = 0.0, min_diag = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 40; ++i) {
            const State st = random_state();
            const auto vol = vol_matrix_general(m, st);
            for (std::size_t r = 0; r < dim; ++r)
                for (std::size_t c = 0; c < dim; ++c) {
                    if (r == c)
                        min_diag = std::min(min_diag, vol.entries(r, c));
                    else
                        max_off = std::max(max_off, std::abs(vol.entries(r, c)));
                }
        }
        const bool ok = max_off <= 1e-8 && min_diag >= 1.0 - 1e-8;
        std::ostringstream d;
        d << "max off-diag " << format_double(max_off) << ", min diag "
          << format_double(min_diag);
        checks.push_back({"diagonal-structure", ok ? "PASS" : "FAIL", d.str()});
    } else {
        checks.push_back({"diagonal-structure", "SKIP",
                          example1 ? "example1" : "needs separable convex + single exponential"});
    }

    {
        std::vector<State> grid;
        const double sd = std::sqrt(s.horizon);
        for (double tf : {0.0, 0.5, 0.9}) {
            for (double lv : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
                State st{tf * s.horizon, std::vector<double>(dim, 0.0)};
                for (auto& b : st.b) b = lv * sd;
                grid.push_back(std::move(st));
            }
        }
        scan = completeness_scan(m, grid);
        std::ostringstream d;
        d << "min sv " << format_double(scan.overall_min) << " over " << grid.size()
          << " states";
        checks.push_back({"completeness", scan.complete ? "PASS" : "FAIL", d.str()});
    }

    if (!example1) {
        const int paths = std::min(s.numerics.mc_paths, 4000);
        const PathBundle bundle = simulate_paths(s, 16, paths, s.numerics.seed);
        bool ok = true;
        std::string note;
        try {
            const auto rep = mm_optimality_check(bundle, m, {0.0, 0.25, 0.5});
            ok = rep.zero_at_eps0 && rep.negative_at_max_eps && rep.concave_chain;
            note = ok ? "all perturbations lose utility" : "statistical assertion failed";
        } catch (const EngineError& e) {
            ok = false;
            note = e.what();
        }
        // statistical checks gate hard only on the pinned default seed
        const bool hard = s.numerics.seed == NumericsConfig{}.seed;
        checks.push_back({"optimality", ok ? "PASS" : (hard ? "FAIL" : "WARN"), note});
    } else {
        checks.push_back({"optimality", "SKIP", "example1"});
    }

    bool all_ok = true;
    std::printf("%-22s %-6s %s\n", "check", "status", "detail");
    for (const auto& c : checks) {
        std::printf("%-22s %-6s %s\n", c.name.c_str(), c.status.c_str(), c.detail.c_str());
        if (c.status == "FAIL") all_ok = false;
    }

    if (!a.out_dir.empty()) {
        detail::ensure_out_dir(a.out_dir);
        RunManifest man;
        man.command = "verify";
        man.scenario_path = a.scenario_path;
        man.out_dir = a.out_dir;
        man.numerics = s.numerics;
        man.seed = s.numerics.seed;

        CsvWriter csv([&] {
            std::vector<std::string> h{"t"};
            for (std::size_t j = 0; j < dim; ++j) h.push_back("b" + std::to_string(j + 1));
            h.push_back("min_sv");
            return h;
        }());
        for (const auto& row : scan.rows) {
            std::vector<double> r{row.state.t};
            r.insert(r.end(), row.state.b.begin(), row.state.b.end());
            r.push_back(row.min_sv);
            csv.add_row(r);
        }
        csv.write((std::filesystem::path(a.out_dir) / "scan.csv").string());
        man.outputs.push_back("scan.csv");

        nlohmann::json j;
        j["verdict"] = all_ok ? "PASS" : "FAIL";
        j["scan"] = {{"complete", scan.complete}, {"min_sv", scan.overall_min}};
        j["checks"] = nlohmann::json::array();
        for (const auto& c : checks)
            j["checks"].push_back({{"name", c.name}, {"status", c.status}, {"detail", c.detail}});
        std::ofstream out(std::filesystem::path(a.out_dir) / "verify.json", std::ios::binary);
        out << j.dump(2) << '\n';
        out.close();
        man.outputs.push_back("verify.json");
        man.wall_ms = clock.ms();
        man.write();
    }

    return all_ok ? kOk : kVerifyFailure;
}

/// Entry point shared by main() and the tests.
inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"Equilibrium pricing and replication engine for the "
                 "price-impact Bachelier market"};
    app.require_subcommand(1);

    detail::Args a;
    auto add_common = [&a](CLI::App* sub, bool need_out) {
        sub->add_option("--scenario", a.scenario_path, "scenario config file")
            ->required();
        auto* out = sub->add_option("--out", a.out_dir, "output directory");
        if (need_out) out->required();
        sub->add_flag("--check-manifest", a.check_manifest_flag,
                      "verify hashes of a previous run's outputs instead of recomputing");
    };

    CLI::App* price = app.add_subcommand("price", "solve the price equation and report residuals");
    add_common(price, false);

    CLI::App* surface = app.add_subcommand("surface", "tabulate price, volatility and hedge over a grid");
    add_common(surface, true);
    surface->add_option("--t-grid", a.t_grid, "time grid lo:hi:n");
    surface->add_option("--b-grid", a.b_grid, "per-coordinate Brownian grid lo:hi:n");

    CLI::App* hedge = app.add_subcommand("hedge", "replicate the claim along simulated paths");
    add_common(hedge, true);
    hedge->add_option("--steps", a.steps, "time steps (default: scenario)");
    hedge->add_option("--paths", a.paths, "Monte Carlo paths (default: scenario)");
    hedge->add_option("--seed", a.seed, "RNG seed (default: scenario)")
        ->each([&a](const std::string&) { a.seed_given = true; });
    hedge->add_option("--threshold", a.threshold, "rms gate (default: scenario)");
    hedge->add_flag("--dump-paths", a.dump_paths, "write per-path trajectories");
    hedge->add_option("--study", a.study, "comma-separated step counts for a convergence study");

    CLI::App* verify = app.add_subcommand("verify", "run the invariant suite against a scenario");
    add_common(verify, false);

    std::vector<const char*> argv{"impact-hedge"};
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kOk : kValidation;
    }

    try {
        if (price->parsed()) return cmd_price(a);
        if (surface->parsed()) return cmd_surface(a);
        if (hedge->parsed()) return cmd_hedge(a);
        if (verify->parsed()) return cmd_verify(a);
    } catch (const ValidationError& e) {
        std::cerr << e.what() << '\n';
        return kValidation;
    } catch (const IncompleteMarketError& e) {
        std::cerr << "incomplete market: " << e.what() << '\n';
        return kIncompleteMarket;
    } catch (const NonUniquePriceError& e) {
        std::cerr << e.what() << '\n';
        return kNonUniquePrice;
    } catch (const EngineError& e) {
        std::cerr << e.what() << '\n';
        return kFailure;
    }
    return kValidation;
}

}  // namespace impact::cli
