#include "cli.hpp"

#include "lmm/averaging.hpp"
#include "lmm/detect.hpp"
#include "lmm/errors.hpp"
#include "lmm/geodesic.hpp"
#include "lmm/io.hpp"
#include "lmm/shooting.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace lmm::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

KernelSpec kernel_of(const RunConfig &c) {
    KernelSpec k;
    k.a = c.kernel_a;
    k.b = c.kernel_b;
    return k;
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text)) {
        throw IngestionError(path.string(), 0, "cannot write");
    }
}

void write_json(const fs::path &path, const ordered_json &j) {
    write_text(path, j.dump(2) + "\n");
}

fs::path prepare_out(const RunConfig &c) {
    fs::path out(c.out);
    fs::create_directories(out);
    write_json(out / "run_config.json", to_json(c));
    return out;
}

LandmarkTemplate single_template(const std::string &path) {
    auto ts = io::read_template_csv(path);
    if (ts.size() != 1) {
        throw IngestionError(path, 0, "expected exactly one template, found " + std::to_string(ts.size()));
    }
    return ts.front();
}

void need_inputs(const RunConfig &c, std::size_t n) {
    if (c.inputs.size() != n) {
        throw ParameterError(c.command + ": expected " + std::to_string(n) + " input path(s)");
    }
}

ordered_json points_json(const Points &p) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        a.push_back(ordered_json::array({p(i, 0), p(i, 1)}));
    }
    return a;
}

std::string fmt(const char *f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string join_ints(const ordered_json &a) {
    std::string s = "{";
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (i ? ", " : "") + std::to_string(a[i].get<int>());
    }
    return s + "}";
}

// Human tables are a view of the JSON report only.
std::string detect_tables(const ordered_json &rep) {
    std::ostringstream os;
    const auto &m1 = rep["method1"];
    os << "Method 1: norm of mean momentum\n";
    os << "landmark  control      case         case/se\n";
    for (std::size_t j = 0; j < m1["case_norms"].size(); ++j) {
        const double se = m1["case_standard_errors"][j].get<double>();
        const double cn = m1["case_norms"][j].get<double>();
        os << fmt("%8.0f", static_cast<double>(j + 1)) << "  " << fmt("%-11.4e", m1["control_norms"][j].get<double>())
           << "  " << fmt("%-11.4f", cn) << "  " << fmt("%.2f", se > 0 ? cn / se : 0.0) << "\n";
    }
    os << "flagged: " << join_ints(m1["flagged"]) << "\n\n";
    for (const char *key : {"method2_momentum", "method2_position"}) {
        const auto &m = rep[key];
        os << "Method 2 (" << m["mode"].get<std::string>() << "): overlap ratio of 95% boxes\n";
        os << "landmark  ratio\n";
        for (std::size_t j = 0; j < m["ratios"].size(); ++j) {
            os << fmt("%8.0f", static_cast<double>(j + 1)) << "  " << fmt("%.4f", m["ratios"][j].get<double>()) << "\n";
        }
        os << "predictor: " << join_ints(m["predictor"]) << "\n\n";
    }
    os << "predictor (method 1 and momentum method 2): " << join_ints(rep["predictor"]) << "\n";
    return os.str();
}

int cmd_match(const RunConfig &c) {
    need_inputs(c, 2);
    const auto ref = single_template(c.inputs[0]);
    const auto target = single_template(c.inputs[1]);
    ShootingOptions so;
    so.tol = c.tol;
    so.max_iter = c.max_iter;
    so.steps = c.steps;
    const fs::path out = prepare_out(c);
    const ShootingResult r = log_map(ref, target, kernel_of(c), so);
    LandmarkTemplate mom{r.momentum.momenta, ref.label};
    io::write_template_csv({mom}, out / "momentum.csv");
    ordered_json j;
    j["run_config"] = to_json(c);
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["final_missfit"] = r.final_missfit;
    j["tolerance"] = r.tolerance;
    j["distance_estimate"] = std::sqrt(sobolev_norm_sq(ref.points, r.momentum.momenta, kernel_of(c)));
    j["missfit_history"] = r.missfit_history;
    j["momentum"] = points_json(r.momentum.momenta);
    write_json(out / "match.json", j);
    std::cout << "converged " << (r.converged ? "yes" : "no") << " after " << r.iterations << " iterations, miss-fit "
              << fmt("%.3e", r.final_missfit) << " (tol " << fmt("%.3e", r.tolerance) << ")\n";
    return r.converged ? kOk : kNonConvergence;
}

int cmd_exp(const RunConfig &c) {
    need_inputs(c, 2);
    const auto base = single_template(c.inputs[0]);
    const auto mom = single_template(c.inputs[1]);
    if (mom.size() != base.size()) {
        throw ParameterError("exp: momentum has " + std::to_string(mom.size()) + " rows, template has " +
                             std::to_string(base.size()));
    }
    const fs::path out = prepare_out(c);
    const KernelSpec spec = kernel_of(c);
    const LandmarkTemplate moved = exp_map(base, MomentumField{mom.points, base}, spec, c.steps);
    io::write_template_csv({moved}, out / "deformed.csv");
    ordered_json j;
    j["run_config"] = to_json(c);
    j["hamiltonian"] = hamiltonian(base.points, mom.points, spec);
    j["deformed"] = points_json(moved.points);
    write_json(out / "exp.json", j);
    std::cout << "H = " << fmt("%.6e", j["hamiltonian"].get<double>()) << ", wrote " << (out / "deformed.csv").string()
              << "\n";
    return kOk;
}

int cmd_average(const RunConfig &c) {
    need_inputs(c, 1);
    const auto group = io::read_group(c.inputs[0]);
    AverageOptions ao;
    ao.max_iter = c.max_iter;
    ao.epsilon = c.tol;
    ao.threads = c.threads;
    ao.shooting.steps = c.steps;
    const WeightScheme scheme{parse_weight_kind(c.weights)};
    const fs::path out = prepare_out(c);
    const AverageResult r = group_average(group, scheme, kernel_of(c), ao);
    io::write_template_csv({r.average}, out / "average.csv");
    std::vector<LandmarkTemplate> residual;
    for (std::size_t i = 0; i < r.residual_momenta.size(); ++i) {
        residual.push_back({r.residual_momenta[i].momenta, group[i].label});
    }
    io::write_template_csv(residual, out / "residual_momenta.csv");
    ordered_json j;
    j["run_config"] = to_json(c);
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["epsilon"] = r.epsilon;
    j["final_mean_momentum_norm"] = r.final_mean_momentum_norm;
    j["objective_history"] = r.objective_history;
    j["step_history"] = r.step_history;
    ordered_json members = ordered_json::array();
    for (std::size_t i = 0; i < group.size(); ++i) {
        members.push_back({{"label", group[i].label}, {"weight", r.weights[i]}, {"distance", r.distances[i]}});
    }
    j["members"] = std::move(members);
    j["average"] = points_json(r.average.points);
    write_json(out / "average.json", j);
    std::cout << "average (" << c.weights << " weights): " << r.iterations << " iterations, "
              << (r.converged ? "converged" : "not converged") << ", objective "
              << fmt("%.6e", r.objective_history.empty() ? 0.0 : r.objective_history.back()) << "\n";
    return r.converged ? kOk : kNonConvergence;
}

int cmd_detect(const RunConfig &c) {
    need_inputs(c, 2);
    const auto controls = io::read_group(c.inputs[0]);
    const auto cases = io::read_group(c.inputs[1]);
    DetectOptions o;
    o.kernel = kernel_of(c);
    o.scheme = WeightScheme{parse_weight_kind(c.weights)};
    o.averaging.max_iter = c.max_iter;
    o.averaging.epsilon = c.tol;
    o.averaging.shooting.steps = c.steps;
    o.mcmc.chains = c.chains;
    o.mcmc.burn_in = c.burn_in;
    o.mcmc.draws = c.draws;
    o.threshold = c.threshold;
    o.seed = c.seed;
    o.threads = c.threads;
    const fs::path out = prepare_out(c);
    const DetectionReport rep = detect(controls, cases, o);
    ordered_json j;
    j["run_config"] = to_json(c);
    j["options"] = to_json(o);
    const ordered_json body = to_json(rep);
    for (auto it = body.begin(); it != body.end(); ++it) {
        j[it.key()] = it.value();
    }
    write_json(out / "report.json", j);
    const std::string tables = detect_tables(j);
    write_text(out / "tables.txt", tables);
    write_contours_csv(rep.momentum, out / "contours_momentum.csv");
    write_contours_csv(rep.position, out / "contours_position.csv");
    write_predictive_csv(rep.momentum, out / "predictive_momentum.csv");
    write_predictive_csv(rep.position, out / "predictive_position.csv");
    std::cout << tables;
    return rep.converged() ? kOk : kNonConvergence;
}

int cmd_synth(const RunConfig &c) {
    need_inputs(c, 0);
    const fs::path out = prepare_out(c);
    ordered_json j;
    j["run_config"] = to_json(c);
    if (c.planted_landmark > 0) {
        io::PlantedShiftOptions po;
        po.controls = po.cases = c.members;
        po.landmarks = c.landmarks;
        po.landmark = c.planted_landmark;
        po.shift_sds = c.shift_sds;
        po.seed = c.seed;
        const auto d = io::synth_planted_shift(po);
        io::write_group(d.controls, out / "control" / "control.json", "control", "control");
        io::write_group(d.cases, out / "case" / "case.json", "case", "case");
        j["manifests"] = {"control/control.json", "case/case.json"};
    } else {
        io::SynthOptions so;
        so.alpha = c.alpha;
        so.members = c.members;
        so.landmarks = c.landmarks;
        so.seed = c.seed;
        const auto g = io::synth_group(so);
        io::write_group(g, out / "group.json", "synth");
        ordered_json labels = ordered_json::array();
        for (const auto &t : g) {
            labels.push_back(t.label);
        }
        j["manifests"] = {"group.json"};
        j["labels"] = std::move(labels);
    }
    write_json(out / "synth.json", j);
    std::cout << "wrote " << out.string() << "\n";
    return kOk;
}

int dispatch(const RunConfig &c) {
    if (c.command == "match") return cmd_match(c);
    if (c.command == "exp") return cmd_exp(c);
    if (c.command == "average") return cmd_average(c);
    if (c.command == "detect") return cmd_detect(c);
    if (c.command == "synth") return cmd_synth(c);
    throw ParameterError("unknown command '" + c.command + "'");
}

} // namespace

int default_max_iter(const std::string &command) { return command == "match" ? 500 : 100; }

ordered_json to_json(const RunConfig &c) {
    ordered_json j;
    j["command"] = c.command;
    j["inputs"] = c.inputs;
    j["out"] = c.out;
    j["kernel_a"] = c.kernel_a;
    j["kernel_b"] = c.kernel_b;
    j["weights"] = c.weights;
    j["tol"] = c.tol ? ordered_json(*c.tol) : ordered_json(nullptr);
    j["max_iter"] = c.max_iter;
    j["steps"] = c.steps;
    j["seed"] = c.seed;
    j["chains"] = c.chains;
    j["burn_in"] = c.burn_in;
    j["draws"] = c.draws;
    j["threshold"] = c.threshold;
    j["threads"] = c.threads;
    j["alpha"] = c.alpha;
    j["members"] = c.members;
    j["landmarks"] = c.landmarks;
    j["planted_landmark"] = c.planted_landmark;
    j["shift_sds"] = c.shift_sds;
    return j;
}

RunConfig run_config_from_json(const nlohmann::json &j) {
    RunConfig c;
    c.command = j.at("command").get<std::string>();
    c.inputs = j.at("inputs").get<std::vector<std::string>>();
    c.out = j.at("out").get<std::string>();
    c.kernel_a = j.at("kernel_a").get<double>();
    c.kernel_b = j.at("kernel_b").get<double>();
    c.weights = j.at("weights").get<std::string>();
    if (!j.at("tol").is_null()) {
        c.tol = j.at("tol").get<double>();
    }
    c.max_iter = j.at("max_iter").get<int>();
    c.steps = j.at("steps").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.chains = j.at("chains").get<int>();
    c.burn_in = j.at("burn_in").get<int>();
    c.draws = j.at("draws").get<int>();
    c.threshold = j.at("threshold").get<double>();
    c.threads = j.at("threads").get<unsigned>();
    c.alpha = j.at("alpha").get<double>();
    c.members = j.at("members").get<int>();
    c.landmarks = j.at("landmarks").get<int>();
    c.planted_landmark = j.at("planted_landmark").get<int>();
    c.shift_sds = j.at("shift_sds").get<double>();
    return c;
}

int run(const RunConfig &config) {
    RunConfig cfg = config;
    if (cfg.max_iter == 0) {
        cfg.max_iter = default_max_iter(cfg.command);
    }
    try {
        return dispatch(cfg);
    } catch (const FitError &e) {
        std::cerr << "lmm " << cfg.command << ": fit failure: " << e.what() << "\n";
        return kFitFailure;
    } catch (const ContourError &e) {
        std::cerr << "lmm " << cfg.command << ": fit failure: " << e.what() << "\n";
        return kFitFailure;
    } catch (const AveragingError &e) {
        std::cerr << "lmm " << cfg.command << ": non-convergence (member " << e.member() << "): " << e.what() << "\n";
        return kNonConvergence;
    } catch (const ShootingError &e) {
        std::cerr << "lmm " << cfg.command << ": non-convergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const DivergenceError &e) {
        std::cerr << "lmm " << cfg.command << ": non-convergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const ConversionError &e) {
        std::cerr << "lmm " << cfg.command << ": non-convergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const EvaluationError &e) {
        std::cerr << "lmm " << cfg.command << ": non-convergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const DegenerateRadiusError &e) {
        std::cerr << "lmm " << cfg.command << ": non-convergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const std::exception &e) {
        std::cerr << "lmm " << cfg.command << ": " << e.what() << "\n";
        return kUsage;
    }
}

int main(int argc, char **argv) {
    CLI::App app{"Landmark matching on the momentum field: shooting, group averages and group-difference detection"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::optional<int> max_iter;
    std::optional<std::uint64_t> seed;
    std::string replay_path;
    std::string replay_out;

    auto common = [&](CLI::App *sub, bool kernel) {
        sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
        sub->add_option("--threads", cfg.threads, "Worker cap, 0 for all cores")->capture_default_str();
        if (kernel) {
            sub->add_option("--kernel-a", cfg.kernel_a, "Kernel length scale a")->capture_default_str();
            sub->add_option("--kernel-b", cfg.kernel_b, "Kernel order b (1.5 is the conic kernel)")->capture_default_str();
            sub->add_option("--steps", cfg.steps, "RK4 steps on [0, 1]")->capture_default_str();
        }
    };

    auto *match = app.add_subcommand("match", "Log map: initial momentum from REF to TARGET");
    match->add_option("inputs", cfg.inputs, "REF.csv TARGET.csv")->required()->expected(2);
    match->add_option("--tol", cfg.tol, "Absolute RMS miss-fit tolerance (default 1e-6 x diameter)");
    match->add_option("--max-iter", max_iter, "Shooting iterations (default 500)");
    common(match, true);

    auto *exp = app.add_subcommand("exp", "Exp map: deform TEMPLATE by MOMENTUM");
    exp->add_option("inputs", cfg.inputs, "TEMPLATE.csv MOMENTUM.csv")->required()->expected(2);
    common(exp, true);

    auto *average = app.add_subcommand("average", "Group average on the momentum field");
    average->add_option("inputs", cfg.inputs, "MANIFEST.json")->required()->expected(1);
    average->add_option("--weights", cfg.weights, "equal | robust")->capture_default_str();
    average->add_option("--tol", cfg.tol, "Stopping threshold epsilon (default 1e-6 sqrt(N))");
    average->add_option("--max-iter", max_iter, "Outer iterations (default 100)");
    common(average, true);

    auto *det = app.add_subcommand("detect", "Group-difference detection, controls vs cases");
    det->add_option("inputs", cfg.inputs, "CONTROL.json CASE.json")->required()->expected(2);
    det->add_option("--weights", cfg.weights, "equal | robust")->capture_default_str();
    det->add_option("--tol", cfg.tol, "Averaging threshold epsilon (default 1e-6 sqrt(N))");
    det->add_option("--max-iter", max_iter, "Averaging outer iterations (default 100)");
    det->add_option("--seed", seed, "Master seed (default 0)");
    det->add_option("--chains", cfg.chains, "MCMC chains")->capture_default_str();
    det->add_option("--burn-in", cfg.burn_in, "Burn-in sweeps per chain")->capture_default_str();
    det->add_option("--draws", cfg.draws, "Retained draws over all chains")->capture_default_str();
    det->add_option("--threshold", cfg.threshold, "Overlap-ratio threshold")->capture_default_str();
    common(det, true);

    auto *synth = app.add_subcommand("synth", "Synthetic ellipse/heart group or planted-shift pair");
    synth->add_option("--alpha", cfg.alpha, "Heart fraction")->capture_default_str();
    synth->add_option("--m", cfg.members, "Members (per group for planted data)")->capture_default_str();
    synth->add_option("--landmarks", cfg.landmarks, "Landmarks per template")->capture_default_str();
    synth->add_option("--planted-landmark", cfg.planted_landmark, "Write control/case groups with this landmark shifted");
    synth->add_option("--shift", cfg.shift_sds, "Planted shift in noise standard deviations")->capture_default_str();
    synth->add_option("--seed", seed, "Seed (default 0)");
    common(synth, false);

    auto *replay = app.add_subcommand("replay", "Re-run a recorded run_config.json");
    replay->add_option("config", replay_path, "run_config.json")->required()->check(CLI::ExistingFile);
    replay->add_option("--out", replay_out, "Override the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    if (replay->parsed()) {
        try {
            std::ifstream in(replay_path);
            cfg = run_config_from_json(nlohmann::json::parse(in));
        } catch (const std::exception &e) {
            std::cerr << "lmm replay: " << e.what() << "\n";
            return kUsage;
        }
        if (!replay_out.empty()) {
            cfg.out = replay_out;
        }
        return run(cfg);
    }

    cfg.command = app.get_subcommands().front()->get_name();
    cfg.max_iter = max_iter.value_or(default_max_iter(cfg.command));
    cfg.seed = seed.value_or(0);
    return run(cfg);
}

} // namespace lmm::cli
