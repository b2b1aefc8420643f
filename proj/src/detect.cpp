#include "lmm/detect.hpp"

#include "lmm/errors.hpp"
#include "lmm/io.hpp"
#include "lmm/parallel.hpp"
#include "lmm/rng.hpp"
#include "lmm/shooting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace lmm {
namespace {

using nlohmann::ordered_json;

std::vector<double> column(const Points &p, int c) {
    return {p.col(c).data(), p.col(c).data() + p.rows()};
}

CellReport summarise_cell(const stats::LandmarkSampleMatrix &sample, FeatureMode mode, const DetectOptions &opts) {
    CellReport cell;
    cell.group = sample.group;
    cell.landmark = sample.landmark_index;
    cell.mean_norm = stats::mean_momentum_norm(sample);
    cell.seed = derive_seed(opts.seed, {static_cast<std::uint64_t>(mode), sample.group == "N" ? 0u : 1u,
                                        static_cast<std::uint64_t>(sample.landmark_index)});
    const auto post = stats::fit_posterior(sample, opts.hyper, opts.mcmc, cell.seed);
    cell.psrf = opts.mcmc.chains >= 2 ? stats::psrf(post) : std::array<double, 5>{1, 1, 1, 1, 1};
    cell.min_acceptance = 1.0;
    for (const auto &d : post.diagnostics) {
        for (const auto &[name, rate] : d.acceptance) {
            cell.min_acceptance = std::min(cell.min_acceptance, rate);
        }
    }
    cell.warnings = post.warnings;
    auto &pred = cell.predictive;
    pred.draws = stats::predictive_draws(post, opts.predictive_count, derive_seed(cell.seed, {0x9D}));
    const auto xs = column(pred.draws, 0);
    const auto ys = column(pred.draws, 1);
    pred.x = stats::marginal_interval(xs, opts.level);
    pred.y = stats::marginal_interval(ys, opts.level);
    if (opts.contours) {
        pred.contour = stats::hpd_contour(pred.draws, opts.level, opts.contour);
    }
    return cell;
}

ordered_json interval_json(const stats::Interval &iv) {
    return ordered_json::array({iv.lo, iv.hi});
}

ordered_json cell_json(const CellReport &c) {
    ordered_json j;
    j["landmark"] = c.landmark;
    j["group"] = c.group;
    j["seed"] = c.seed;
    j["mean_norm"] = c.mean_norm;
    j["x_interval"] = interval_json(c.predictive.x);
    j["y_interval"] = interval_json(c.predictive.y);
    j["psrf"] = c.psrf;
    j["min_acceptance"] = c.min_acceptance;
    if (!c.predictive.contour.polygon.empty()) {
        j["contour_area"] = stats::polygon_area(c.predictive.contour.polygon);
        j["contour_density_level"] = c.predictive.contour.density_level;
    }
    j["warnings"] = c.warnings;
    return j;
}

ordered_json mode_json(const ModeReport &m) {
    ordered_json j;
    j["mode"] = to_string(m.mode);
    j["ratios"] = m.ratios;
    j["predictor"] = m.predictor;
    ordered_json cells = ordered_json::array();
    for (std::size_t i = 0; i < m.control.size(); ++i) {
        cells.push_back(cell_json(m.control[i]));
        cells.push_back(cell_json(m.cases[i]));
    }
    j["cells"] = std::move(cells);
    return j;
}

ordered_json points_json(const Points &p) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        a.push_back(ordered_json::array({p(i, 0), p(i, 1)}));
    }
    return a;
}

void write_text(const std::filesystem::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IngestionError(path.string(), 0, "cannot open for writing");
    }
    out << text;
    if (!out) {
        throw IngestionError(path.string(), 0, "write failed");
    }
}

} // namespace

std::string to_string(FeatureMode mode) {
    return mode == FeatureMode::momentum ? "momentum" : "position";
}

void DetectOptions::validate() const {
    kernel.validate();
    hyper.validate();
    mcmc.validate();
    if (!(level > 0.0 && level < 1.0)) {
        throw ParameterError("detect: level must lie in (0, 1)");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ParameterError("detect: threshold must lie in [0, 1]");
    }
    if (!(method1_factor > 0.0)) {
        throw ParameterError("detect: method-1 factor must be positive");
    }
}

bool DetectionReport::converged() const {
    return average_converged && std::all_of(case_converged.begin(), case_converged.end(), [](bool b) { return b; });
}

std::vector<stats::LandmarkSampleMatrix> landmark_samples(const std::vector<Points> &members, const std::string &group) {
    if (members.empty()) {
        throw ParameterError("landmark_samples: empty group");
    }
    const Eigen::Index n = members.front().rows();
    std::vector<stats::LandmarkSampleMatrix> out;
    for (Eigen::Index j = 0; j < n; ++j) {
        stats::LandmarkSampleMatrix s{group, static_cast<int>(j) + 1, Points(static_cast<Eigen::Index>(members.size()), 2)};
        for (std::size_t k = 0; k < members.size(); ++k) {
            if (members[k].rows() != n) {
                throw ParameterError("landmark_samples: members differ in landmark count");
            }
            s.rows.row(static_cast<Eigen::Index>(k)) = members[k].row(j);
        }
        out.push_back(std::move(s));
    }
    return out;
}

ModeReport compare_groups(const std::vector<stats::LandmarkSampleMatrix> &control,
                          const std::vector<stats::LandmarkSampleMatrix> &cases, FeatureMode mode,
                          const DetectOptions &opts) {
    if (control.size() != cases.size()) {
        throw ParameterError("compare_groups: groups differ in landmark count");
    }
    const std::size_t n = control.size();
    ModeReport out;
    out.mode = mode;
    std::vector<CellReport> cells(2 * n);
    parallel_for(2 * n, opts.threads, [&](std::size_t k) {
        const auto &sample = k < n ? control[k] : cases[k - n];
        cells[k] = summarise_cell(sample, mode, opts);
    });
    for (std::size_t j = 0; j < n; ++j) {
        out.control.push_back(std::move(cells[j]));
        out.cases.push_back(std::move(cells[n + j]));
        out.ratios.push_back(stats::overlap_ratio_boxes(out.control[j].predictive.box(), out.cases[j].predictive.box()));
    }
    out.predictor = stats::select_predictor(out.ratios, opts.threshold);
    return out;
}

DetectionReport detect(const std::vector<LandmarkTemplate> &controls, const std::vector<LandmarkTemplate> &cases,
                       const DetectOptions &opts) {
    opts.validate();
    if (controls.size() < 2 || cases.size() < 2) {
        throw ParameterError("detect: each group needs at least two templates");
    }
    const Eigen::Index n = controls.front().size();
    for (const auto *g : {&controls, &cases}) {
        for (const auto &t : *g) {
            validate(t);
            if (t.size() != n) {
                throw ParameterError("detect: template '" + t.label + "' has " + std::to_string(t.size()) +
                                     " landmarks, expected " + std::to_string(n));
            }
        }
    }

    DetectionReport rep;
    rep.options = opts;
    AverageOptions avg_opts = opts.averaging;
    avg_opts.threads = opts.threads;
    const AverageResult avg = group_average(controls, opts.scheme, opts.kernel, avg_opts);
    rep.control_average = avg.average;
    rep.average_iterations = avg.iterations;
    rep.average_converged = avg.converged;
    rep.average_epsilon = avg.epsilon;
    rep.control_momenta = avg.residual_momenta;

    rep.case_momenta.resize(cases.size());
    rep.case_missfits.resize(cases.size());
    rep.case_converged.resize(cases.size());
    parallel_for(cases.size(), opts.threads, [&](std::size_t i) {
        const ShootingResult r = log_map(avg.average, cases[i], opts.kernel, opts.averaging.shooting);
        rep.case_momenta[i] = r.momentum;
        rep.case_missfits[i] = r.final_missfit;
        rep.case_converged[i] = r.converged;
    });

    auto momenta_of = [](const std::vector<MomentumField> &fields) {
        std::vector<Points> out;
        for (const auto &f : fields) {
            out.push_back(f.momenta);
        }
        return out;
    };
    auto positions_of = [](const std::vector<LandmarkTemplate> &group) {
        std::vector<Points> out;
        for (const auto &t : group) {
            out.push_back(t.points);
        }
        return out;
    };
    const auto n_mom = landmark_samples(momenta_of(rep.control_momenta), "N");
    const auto s_mom = landmark_samples(momenta_of(rep.case_momenta), "S");

    // Method 1
    const double m = static_cast<double>(cases.size());
    for (std::size_t j = 0; j < n_mom.size(); ++j) {
        rep.method1.control_norms.push_back(stats::mean_momentum_norm(n_mom[j]));
        const double norm = stats::mean_momentum_norm(s_mom[j]);
        const Points &rows = s_mom[j].rows;
        const Eigen::RowVector2d mean = rows.colwise().mean();
        const double trace = (rows.rowwise() - mean).squaredNorm() / (m - 1.0);
        const double se = std::sqrt(trace / m);
        rep.method1.case_norms.push_back(norm);
        rep.method1.case_standard_errors.push_back(se);
        if (norm > opts.method1_factor * se) {
            rep.method1.flagged.push_back(static_cast<int>(j) + 1);
        }
    }

    rep.momentum = compare_groups(n_mom, s_mom, FeatureMode::momentum, opts);
    rep.position = compare_groups(landmark_samples(positions_of(controls), "N"),
                                  landmark_samples(positions_of(cases), "S"), FeatureMode::position, opts);

    std::set<int> uni(rep.method1.flagged.begin(), rep.method1.flagged.end());
    uni.insert(rep.momentum.predictor.begin(), rep.momentum.predictor.end());
    rep.predictor.assign(uni.begin(), uni.end());
    return rep;
}

ordered_json to_json(const DetectOptions &o) {
    ordered_json j;
    j["kernel"] = {{"a", o.kernel.a}, {"b", o.kernel.b}, {"n", o.kernel.n}, {"r_cutoff", o.kernel.r_cutoff}};
    j["weights"] = to_string(o.scheme.kind);
    j["weights_epsilon_d"] = o.scheme.epsilon_d;
    const auto &s = o.averaging.shooting;
    ordered_json shoot;
    shoot["h0"] = s.h0;
    shoot["shrink"] = s.shrink;
    shoot["h_floor"] = s.h_floor;
    shoot["tol"] = s.tol ? ordered_json(*s.tol) : ordered_json(nullptr);
    shoot["rel_tol"] = s.rel_tol;
    shoot["max_iter"] = s.max_iter;
    shoot["steps"] = s.steps;
    j["shooting"] = std::move(shoot);
    j["averaging"] = {{"max_iter", o.averaging.max_iter},
                      {"epsilon", o.averaging.epsilon ? ordered_json(*o.averaging.epsilon) : ordered_json(nullptr)},
                      {"warm_start", o.averaging.warm_start}};
    j["mcmc"] = {{"chains", o.mcmc.chains},       {"burn_in", o.mcmc.burn_in},
                 {"draws", o.mcmc.draws},         {"thin", o.mcmc.thin},
                 {"adapt_interval", o.mcmc.adapt_interval}, {"target_acceptance", {o.mcmc.target_low, o.mcmc.target_high}}};
    j["hyper"] = {{"mean_hyper_scale", o.hyper.mean_hyper_scale},
                  {"rho_mean_hyper_scale", o.hyper.rho_mean_hyper_scale},
                  {"convention", stats::to_string(o.hyper.convention)},
                  {"precision_upper", o.hyper.precision_upper},
                  {"gamma_shape_upper", o.hyper.gamma_shape_upper},
                  {"gamma_rate_upper", o.hyper.gamma_rate_upper}};
    j["contour"] = {{"enabled", o.contours},
                    {"nx", o.contour.nx},
                    {"ny", o.contour.ny},
                    {"pad_bandwidths", o.contour.pad_bandwidths},
                    {"bandwidth_scale", o.contour.bandwidth_scale}};
    j["level"] = o.level;
    j["threshold"] = o.threshold;
    j["method1_factor"] = o.method1_factor;
    j["predictive_count"] = o.predictive_count;
    j["seed"] = o.seed;
    return j;
}

ordered_json to_json(const DetectionReport &r) {
    ordered_json j;
    j["control_average"] = {{"points", points_json(r.control_average.points)},
                            {"iterations", r.average_iterations},
                            {"converged", r.average_converged},
                            {"epsilon", r.average_epsilon}};
    ordered_json cases = ordered_json::array();
    for (std::size_t i = 0; i < r.case_momenta.size(); ++i) {
        cases.push_back({{"index", i}, {"missfit", r.case_missfits[i]}, {"converged", static_cast<bool>(r.case_converged[i])}});
    }
    j["case_shooting"] = std::move(cases);
    j["method1"] = {{"control_norms", r.method1.control_norms},
                    {"case_norms", r.method1.case_norms},
                    {"case_standard_errors", r.method1.case_standard_errors},
                    {"flagged", r.method1.flagged}};
    j["method2_momentum"] = mode_json(r.momentum);
    j["method2_position"] = mode_json(r.position);
    j["predictor"] = r.predictor;
    ordered_json momenta;
    auto fields = [](const std::vector<MomentumField> &fs) {
        ordered_json a = ordered_json::array();
        for (const auto &f : fs) {
            a.push_back(points_json(f.momenta));
        }
        return a;
    };
    momenta["control"] = fields(r.control_momenta);
    momenta["case"] = fields(r.case_momenta);
    j["residual_momenta"] = std::move(momenta);
    return j;
}

void write_contours_csv(const ModeReport &mode, const std::filesystem::path &path) {
    std::string s = "landmark,group,x,y\n";
    for (std::size_t i = 0; i < mode.control.size(); ++i) {
        for (const CellReport *c : {&mode.control[i], &mode.cases[i]}) {
            for (const Vec2 &p : c->predictive.contour.polygon) {
                s += std::to_string(c->landmark) + "," + c->group + "," + io::format_double(p.x()) + "," +
                     io::format_double(p.y()) + "\n";
            }
        }
    }
    write_text(path, s);
}

void write_predictive_csv(const ModeReport &mode, const std::filesystem::path &path, std::size_t scatter_limit) {
    std::string s = "landmark,group,x,y\n";
    for (std::size_t i = 0; i < mode.control.size(); ++i) {
        for (const CellReport *c : {&mode.control[i], &mode.cases[i]}) {
            const Points &d = c->predictive.draws;
            const auto rows = std::min<Eigen::Index>(d.rows(), static_cast<Eigen::Index>(scatter_limit));
            for (Eigen::Index k = 0; k < rows; ++k) {
                s += std::to_string(c->landmark) + "," + c->group + "," + io::format_double(d(k, 0)) + "," +
                     io::format_double(d(k, 1)) + "\n";
            }
        }
    }
    write_text(path, s);
}

} // namespace lmm
