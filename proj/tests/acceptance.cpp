// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [work_dir] [criterion...]

#include "cli.hpp"
#include "lmm/averaging.hpp"
#include "lmm/detect.hpp"
#include "lmm/errors.hpp"
#include "lmm/geodesic.hpp"
#include "lmm/io.hpp"
#include "lmm/rng.hpp"
#include "lmm/shooting.hpp"
#include "lmm/stats.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace lmm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_rel_drift(const GeodesicTrajectory &t) {
    const double h0 = t.hamiltonian_samples.front();
    double worst = 0.0;
    for (double h : t.hamiltonian_samples) {
        worst = std::max(worst, std::fabs(h - h0) / std::fabs(h0));
    }
    return worst;
}

Outcome hamiltonian_conservation() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 gen(1001);
    std::uniform_int_distribution<int> size(2, 20);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const int n = size(gen);
        const Points q = oracle::ring(n, 3.0, 0.5, gen);
        Points p = oracle::random_points(n, 1.0, gen);
        p *= std::min(1.0, 2.0 / p.norm());
        worst = std::max(worst, max_rel_drift(evolve(q, p, KernelSpec{}, 100)));
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-6 && secs < 10.0, fmt("max relative drift %.2e over 500 systems, %.2f s", worst, secs)};
}

Outcome exp_log_round_trip() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 gen(1002);
    std::uniform_real_distribution<double> norm(0.05, 0.5);
    std::uniform_int_distribution<int> size(2, 20);
    ShootingOptions o;
    o.tol = 1e-7;
    int ok = 0;
    double worst_fit = 0.0, worst_mom = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(gen);
        const LandmarkTemplate ref{oracle::ring(n, 1.0 + 0.2 * n, 0.2, gen), ""};
        Points p = oracle::random_points(n, 1.0, gen);
        p *= norm(gen) / std::sqrt(sobolev_norm_sq(ref.points, p, KernelSpec{}));
        const LandmarkTemplate target = exp_map(ref, MomentumField{p, ref}, KernelSpec{});
        const auto r = log_map(ref, target, KernelSpec{}, o);
        const double fit = rms_distance(exp_map(ref, r.momentum, KernelSpec{}).points, target.points);
        const double mom = rms_distance(r.momentum.momenta, p);
        worst_fit = std::max(worst_fit, fit);
        worst_mom = std::max(worst_mom, mom);
        ok += r.converged && fit < 1e-5 && mom < 1e-3;
    }
    const double secs = seconds_since(t0);
    return {ok == 200 && secs < 60.0,
            fmt("%d/200 pass, worst RMS miss-fit %.2e, worst momentum error %.2e, %.2f s", ok, worst_fit, worst_mom,
                secs)};
}

Outcome average_descent() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 gen(1003);
    int runs = 0, converged = 0, ascents = 0, silent = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int m = 2 + trial % 9;
        const int n = 4 + trial % 13;
        const Points base = oracle::ring(n, 2.0, 0.2, gen);
        std::vector<LandmarkTemplate> g;
        for (int i = 0; i < m; ++i) {
            g.push_back(exp_map({base, ""}, MomentumField{oracle::random_points(n, 0.5, gen), {base, ""}}, KernelSpec{}));
        }
        for (WeightKind kind : {WeightKind::equal, WeightKind::robust}) {
            ++runs;
            try {
                const auto r = group_average(g, {kind}, KernelSpec{});
                for (std::size_t k = 1; k < r.objective_history.size(); ++k) {
                    ascents += r.objective_history[k] > r.objective_history[k - 1] * (1 + 1e-8);
                }
                converged += r.converged;
                silent += !r.converged && r.iterations < 100;
            } catch (const AveragingError &) {
                // reported non-convergence
            }
        }
    }
    const double secs = seconds_since(t0);
    const bool pass = ascents == 0 && silent == 0 && converged >= 0.95 * runs;
    return {pass, fmt("%d/%d runs converged, %d ascending steps, %.2f s", converged, runs, ascents, secs)};
}

// RMS distance of the two averages to the Euclidean mean of the ellipse members.
std::pair<double, double> outlier_run(double alpha, std::uint64_t seed) {
    io::SynthOptions so;
    so.alpha = alpha;
    so.seed = seed;
    const auto g = io::synth_group(so);
    Points ellipse_mean = Points::Zero(so.landmarks, 2);
    int k = 0;
    for (const auto &t : g) {
        if (!io::is_heart(t)) {
            ellipse_mean += t.points;
            ++k;
        }
    }
    ellipse_mean /= k;
    const auto eq = group_average(g, {WeightKind::equal}, KernelSpec{});
    const auto rb = group_average(g, {WeightKind::robust}, KernelSpec{});
    if (!eq.converged || !rb.converged) {
        throw AveragingError("average did not converge", g.size());
    }
    return {rms_distance(eq.average.points, ellipse_mean), rms_distance(rb.average.points, ellipse_mean)};
}

Outcome outlier_sensitivity() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> alphas{0.1, 0.2, 0.3, 0.4};
    int monotone = 0, robust_wins = 0, robust_cases = 0;
    std::ostringstream table;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::vector<double> eq;
        table << " seed " << seed << ":";
        for (double a : alphas) {
            const auto [e, r] = outlier_run(a, seed);
            eq.push_back(e);
            table << fmt(" %.3f/%.3f", e, r);
            if (a >= 0.2) {
                ++robust_cases;
                robust_wins += r < e;
            }
        }
        int ties = 0;
        bool increasing = true;
        for (std::size_t i = 1; i < eq.size(); ++i) {
            if (eq[i] == eq[i - 1]) {
                ++ties;
            } else if (eq[i] < eq[i - 1]) {
                increasing = false;
            }
        }
        monotone += increasing && ties <= 1;
    }
    const double secs = seconds_since(t0);
    return {monotone == 5 && robust_wins == robust_cases && secs < 300.0,
            fmt("equal-weight distance monotone in alpha for %d/5 seeds, robust closer in %d/%d runs, %.1f s;",
                monotone, robust_wins, robust_cases, secs) +
                " equal/robust distances" + table.str()};
}

Outcome overlap_algebra() {
    const stats::Box a{{0, 2}, {0, 2}}, b{{1, 3}, {1, 3}}, far{{5, 6}, {5, 6}};
    const double e1 = std::fabs(stats::overlap_ratio_boxes(a, a) - 1.0);
    const double e2 = std::fabs(stats::overlap_ratio_boxes(a, far));
    const double e3 = std::fabs(stats::overlap_ratio_boxes(a, b) - 1.0 / 7.0);
    Rng rng(1005);
    Points z(100000, 2);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        z(i, 0) = rng.normal();
        z(i, 1) = rng.normal();
    }
    const auto c = stats::hpd_contour(z);
    double lo = 1e300, hi = 0.0;
    for (const auto &p : c.polygon) {
        lo = std::min(lo, p.norm());
        hi = std::max(hi, p.norm());
    }
    const double target = 2.4477;
    const bool pass = std::max({e1, e2, e3}) <= 1e-12 && lo >= 0.95 * target && hi <= 1.05 * target;
    return {pass, fmt("box example errors %.1e %.1e %.1e; contour radius in [%.4f, %.4f]", e1, e2, e3, lo, hi)};
}

stats::LandmarkSampleMatrix bivariate_cell(int n, double mx, double my, double rho, std::uint64_t seed) {
    Rng rng(seed);
    stats::LandmarkSampleMatrix s{"N", 1, Points(n, 2)};
    for (int i = 0; i < n; ++i) {
        const double z1 = rng.normal(), z2 = rng.normal();
        s.rows(i, 0) = mx + z1;
        s.rows(i, 1) = my + rho * z1 + std::sqrt(1 - rho * rho) * z2;
    }
    return s;
}

std::vector<double> column(const Points &p, int c) { return {p.col(c).data(), p.col(c).data() + p.rows()}; }

Outcome mcmc_calibration() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> failures;
    auto mean_of = [](const stats::PosteriorDraws &d, auto field) {
        double s = 0.0;
        const auto pool = d.pooled();
        for (const auto &t : pool) {
            s += t.*field;
        }
        return s / static_cast<double>(pool.size());
    };
    double worst_psrf = 0.0;
    auto check_psrf = [&](const stats::PosteriorDraws &d) {
        for (double r : stats::psrf(d)) {
            worst_psrf = std::max(worst_psrf, r);
        }
    };

    const auto base = stats::fit_posterior(bivariate_cell(200, 1.0, 2.0, 0.0, 101), {}, {}, 7);
    check_psrf(base);
    const double mx = mean_of(base, &stats::ModelParameters::mu_x);
    const double my = mean_of(base, &stats::ModelParameters::mu_y);
    const double r0 = mean_of(base, &stats::ModelParameters::rho);
    if (std::fabs(mx - 1.0) > 0.15 || std::fabs(my - 2.0) > 0.15) {
        failures.push_back("means");
    }
    if (std::fabs(r0) > 0.1) {
        failures.push_back("rho=0");
    }
    const auto corr = stats::fit_posterior(bivariate_cell(500, 1.0, 2.0, 0.8, 202), {}, {}, 8);
    check_psrf(corr);
    const double r8 = mean_of(corr, &stats::ModelParameters::rho);
    if (std::fabs(r8 - 0.8) > 0.08) {
        failures.push_back("rho=0.8");
    }
    if (worst_psrf >= 1.1) {
        failures.push_back("psrf");
    }

    // coverage of the central 95% box, averaged over independent calibration cells
    const int cells = 10, fresh_draws = 100000;
    double cov_x = 0.0, cov_y = 0.0;
    for (int c = 0; c < cells; ++c) {
        const auto post = stats::fit_posterior(bivariate_cell(200, 1.0, 2.0, 0.0, 101 + c), {}, {}, 7 + c);
        const Points s = stats::predictive_draws(post, 0, 11 + c);
        const auto bx = stats::marginal_interval(column(s, 0)), by = stats::marginal_interval(column(s, 1));
        Rng fresh(1000 + c);
        int cx = 0, cy = 0;
        for (int i = 0; i < fresh_draws; ++i) {
            const double x = 1.0 + fresh.normal(), y = 2.0 + fresh.normal();
            cx += bx.lo <= x && x <= bx.hi;
            cy += by.lo <= y && y <= by.hi;
        }
        cov_x += cx / double(fresh_draws) / cells;
        cov_y += cy / double(fresh_draws) / cells;
    }
    if (std::fabs(cov_x - 0.95) > 0.015 || std::fabs(cov_y - 0.95) > 0.015) {
        failures.push_back("coverage");
    }
    const double secs = seconds_since(t0);
    if (secs >= 180.0) {
        failures.push_back("runtime");
    }
    std::string detail = fmt("means (%.3f, %.3f), rho %.3f and %.3f, max PSRF %.4f, coverage (%.4f, %.4f), %.1f s", mx,
                             my, r0, r8, worst_psrf, cov_x, cov_y, secs);
    for (const auto &f : failures) {
        detail += "; failed: " + f;
    }
    return {failures.empty(), detail};
}

bool contains(const std::vector<int> &v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

Outcome planted_shift() {
    const auto t0 = std::chrono::steady_clock::now();
    int both = 0, m1 = 0, m2 = 0;
    std::string misses;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        io::PlantedShiftOptions p;
        p.seed = seed;
        p.landmark = 1 + static_cast<int>(seed % 13);
        const auto data = io::synth_planted_shift(p);
        DetectOptions o;
        o.seed = seed;
        o.contours = false;
        const auto rep = detect(data.controls, data.cases, o);
        const bool a = contains(rep.method1.flagged, p.landmark);
        const bool b = contains(rep.momentum.predictor, p.landmark);
        m1 += a;
        m2 += b;
        both += a && b;
        if (!(a && b)) {
            misses += fmt(" seed %d", static_cast<int>(seed));
        }
    }
    const double secs = seconds_since(t0);
    return {both >= 19, fmt("detected by both methods in %d/20 seeds (method 1: %d, method 2: %d), %.1f s", both, m1, m2,
                            secs) +
                            (misses.empty() ? "" : "; missed:" + misses)};
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome detect_determinism(const fs::path &work) {
    const auto t0 = std::chrono::steady_clock::now();
    io::PlantedShiftOptions p;
    p.seed = 8;
    const auto data = io::synth_planted_shift(p);
    io::write_group(data.controls, work / "data" / "control" / "control.json", "control", "control");
    io::write_group(data.cases, work / "data" / "case" / "case.json", "case", "case");
    cli::RunConfig cfg;
    cfg.command = "detect";
    cfg.inputs = {(work / "data" / "control" / "control.json").string(), (work / "data" / "case" / "case.json").string()};
    cfg.out = (work / "detect").string();
    cfg.seed = 42;
    std::string first;
    for (int pass = 0; pass < 2; ++pass) {
        fs::remove_all(cfg.out);
        if (cli::run(cfg) != cli::kOk) {
            return {false, "cmd_detect failed"};
        }
        const std::string text = slurp(fs::path(cfg.out) / "report.json");
        if (pass == 0) {
            first = text;
        } else {
            const double secs = seconds_since(t0);
            const bool same = !text.empty() && text == first;
            return {same, fmt("two runs %s (%zu bytes), %.1f s", same ? "byte-identical" : "differ", text.size(), secs)};
        }
    }
    return {false, "unreachable"};
}

} // namespace

int main(int argc, char **argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_work";
    std::set<int> only;
    for (int i = 2; i < argc; ++i) {
        only.insert(std::atoi(argv[i]));
    }
    fs::create_directories(work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"Hamiltonian conservation", hamiltonian_conservation},
        {"Exp/Log round trip", exp_log_round_trip},
        {"averaging descent", average_descent},
        {"outlier sensitivity of the two weightings", outlier_sensitivity},
        {"overlap ratio and HPD contour", overlap_algebra},
        {"MCMC calibration", mcmc_calibration},
        {"planted shift detection", planted_shift},
        {"detect determinism", [&] { return detect_determinism(work); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id)) {
            continue;
        }
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
