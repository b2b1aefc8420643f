#include "lmm/io.hpp"

#include "lmm/errors.hpp"
#include "lmm/rng.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace lmm::io {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv(const std::string &line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string &s, const std::string &file, std::size_t line) {
    double v = 0.0;
    const char *b = s.data();
    const char *e = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
        throw IngestionError(file, line, "cannot parse '" + s + "' as a number");
    }
    if (!std::isfinite(v)) {
        throw IngestionError(file, line, "non-finite coordinate '" + s + "'");
    }
    return v;
}

long parse_id(const std::string &s, const std::string &file, std::size_t line) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 1) {
        throw IngestionError(file, line, "landmark_id must be a positive integer, got '" + s + "'");
    }
    return v;
}

void write_file(const fs::path &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open '" + path.string() + "' for writing");
    }
    out << content;
    if (!out) {
        throw Error("failed writing '" + path.string() + "'");
    }
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

GroupManifest read_manifest(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw IngestionError(path.string(), 0, "cannot open manifest");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw IngestionError(path.string(), 0, std::string("invalid JSON: ") + e.what());
    }
    GroupManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.role = j.value("role", std::string("unlabeled"));
        m.landmarks = j.at("landmarks").get<int>();
        m.templates = j.at("templates").get<std::vector<std::string>>();
        if (j.contains("landmark_names")) {
            m.landmark_names = j.at("landmark_names").get<std::vector<std::string>>();
        }
    } catch (const json::exception &e) {
        throw IngestionError(path.string(), 0, std::string("manifest schema: ") + e.what());
    }
    if (m.role != "control" && m.role != "case" && m.role != "unlabeled") {
        throw IngestionError(path.string(), 0, "role must be control, case or unlabeled");
    }
    if (m.landmarks < 1) {
        throw IngestionError(path.string(), 0, "landmarks must be positive");
    }
    if (!m.landmark_names.empty() && static_cast<int>(m.landmark_names.size()) != m.landmarks) {
        throw IngestionError(path.string(), 0, "landmark_names length does not match landmarks");
    }
    return m;
}

void write_manifest(const GroupManifest &m, const fs::path &path) {
    json j;
    j["name"] = m.name;
    j["role"] = m.role;
    j["landmarks"] = m.landmarks;
    j["templates"] = m.templates;
    if (!m.landmark_names.empty()) {
        j["landmark_names"] = m.landmark_names;
    }
    write_file(path, j.dump(2) + "\n");
}

std::vector<LandmarkTemplate> read_template_csv(const fs::path &path) {
    const std::string file = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestionError(file, 0, "cannot open template file");
    }
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw IngestionError(file, 1, "missing header");
    }
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != kTemplateCsvHeader) {
        throw IngestionError(file, 1, std::string("header must be '") + kTemplateCsvHeader + "'");
    }
    std::vector<std::string> ids;
    std::map<std::string, std::map<long, Vec2>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto f = split_csv(line);
        if (f.size() != 4) {
            throw IngestionError(file, lineno, "expected 4 fields, got " + std::to_string(f.size()));
        }
        if (f[0].empty()) {
            throw IngestionError(file, lineno, "empty template_id");
        }
        const long id = parse_id(f[1], file, lineno);
        const Vec2 xy(parse_double(f[2], file, lineno), parse_double(f[3], file, lineno));
        auto it = rows.find(f[0]);
        if (it == rows.end()) {
            ids.push_back(f[0]);
            it = rows.emplace(f[0], std::map<long, Vec2>{}).first;
        }
        if (!it->second.emplace(id, xy).second) {
            throw IngestionError(file, lineno, "duplicate landmark_id " + f[1] + " for template " + f[0]);
        }
    }
    if (ids.empty()) {
        throw IngestionError(file, lineno, "no landmark rows");
    }
    std::vector<LandmarkTemplate> out;
    for (const auto &id : ids) {
        const auto &r = rows.at(id);
        LandmarkTemplate t;
        t.label = id;
        t.points.resize(static_cast<Eigen::Index>(r.size()), 2);
        Eigen::Index k = 0;
        for (const auto &[lid, xy] : r) {
            if (lid != k + 1) {
                throw IngestionError(file, 0, "template " + id + " has non-contiguous landmark ids");
            }
            t.points.row(k++) = xy.transpose();
        }
        out.push_back(std::move(t));
    }
    return out;
}

void write_template_csv(const std::vector<LandmarkTemplate> &templates, const fs::path &path) {
    std::string s = std::string(kTemplateCsvHeader) + "\n";
    for (std::size_t t = 0; t < templates.size(); ++t) {
        const auto &tpl = templates[t];
        const std::string id = tpl.label.empty() ? std::to_string(t + 1) : tpl.label;
        if (id.find_first_of(",\n\r") != std::string::npos) {
            throw ParameterError("template_id '" + id + "' contains a separator");
        }
        for (Eigen::Index i = 0; i < tpl.points.rows(); ++i) {
            s += id;
            s += ',';
            s += std::to_string(i + 1);
            s += ',';
            s += format_double(tpl.points(i, 0));
            s += ',';
            s += format_double(tpl.points(i, 1));
            s += '\n';
        }
    }
    write_file(path, s);
}

std::vector<LandmarkTemplate> read_group(const fs::path &manifest_path) {
    const GroupManifest m = read_manifest(manifest_path);
    const fs::path dir = manifest_path.parent_path();
    std::vector<LandmarkTemplate> out;
    for (const auto &rel : m.templates) {
        const fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : dir / rel;
        for (auto &t : read_template_csv(p)) {
            if (t.size() != m.landmarks) {
                throw IngestionError(p.string(), 0,
                                     "template " + t.label + " has " + std::to_string(t.size()) +
                                         " landmarks, manifest declares " + std::to_string(m.landmarks));
            }
            out.push_back(std::move(t));
        }
    }
    if (out.empty()) {
        throw IngestionError(manifest_path.string(), 0, "manifest lists no templates");
    }
    return out;
}

void write_group(const std::vector<LandmarkTemplate> &templates, const fs::path &manifest_path,
                 const std::string &name, const std::string &role, const std::vector<std::string> &landmark_names) {
    if (templates.empty()) {
        throw ParameterError("write_group: no templates");
    }
    GroupManifest m;
    m.name = name;
    m.role = role;
    m.landmarks = static_cast<int>(templates.front().size());
    m.landmark_names = landmark_names;
    const fs::path dir = manifest_path.parent_path();
    if (!dir.empty()) {
        fs::create_directories(dir);
    }
    for (std::size_t i = 0; i < templates.size(); ++i) {
        if (templates[i].size() != m.landmarks) {
            throw ParameterError("write_group: templates have different landmark counts");
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "_%03zu.csv", i + 1);
        const std::string file = name + buf;
        LandmarkTemplate t = templates[i];
        if (t.label.empty()) {
            t.label = name + std::to_string(i + 1);
        }
        write_template_csv({t}, dir / file);
        m.templates.push_back(file);
    }
    write_manifest(m, manifest_path);
}

LandmarkTemplate synth_ellipse(double a_axis, double b_axis, int n_landmarks) {
    if (n_landmarks < 1) {
        throw ParameterError("synth_ellipse: need at least one landmark");
    }
    LandmarkTemplate t;
    t.label = "ellipse";
    t.points.resize(n_landmarks, 2);
    for (int k = 0; k < n_landmarks; ++k) {
        const double th = 2.0 * std::numbers::pi * k / n_landmarks;
        t.points(k, 0) = a_axis * std::cos(th);
        t.points(k, 1) = b_axis * std::sin(th);
    }
    return t;
}

LandmarkTemplate synth_heart(int n_landmarks) {
    if (n_landmarks < 1) {
        throw ParameterError("synth_heart: need at least one landmark");
    }
    LandmarkTemplate t;
    t.label = "heart";
    t.points.resize(n_landmarks, 2);
    for (int k = 0; k < n_landmarks; ++k) {
        const double th = 2.0 * std::numbers::pi * k / n_landmarks;
        const double s = std::sin(th);
        t.points(k, 0) = (13.0 * std::cos(th) - 5.0 * std::cos(2.0 * th) - 2.0 * std::cos(3.0 * th) -
                          std::cos(4.0 * th)) / 5.0;
        t.points(k, 1) = 16.0 * s * s * s / 5.0;
    }
    return t;
}

std::vector<LandmarkTemplate> synth_group(const SynthOptions &opts) {
    if (!(opts.alpha >= 0.0 && opts.alpha <= 1.0)) {
        throw ParameterError("synth_group: alpha must lie in [0, 1]");
    }
    if (opts.members < 1 || opts.landmarks < 1) {
        throw ParameterError("synth_group: members and landmarks must be positive");
    }
    if (!(opts.axis_sd >= 0.0)) {
        throw ParameterError("synth_group: axis_sd must be non-negative");
    }
    if (!(opts.axis_mean.x() > opts.axis_floor && opts.axis_mean.y() > opts.axis_floor)) {
        throw ParameterError("synth_group: axis means must exceed the axis floor");
    }
    const int hearts = static_cast<int>(std::lround(opts.alpha * opts.members));
    const int ellipses = opts.members - hearts;
    Rng rng(derive_seed(opts.seed, {0x5EED}));
    auto draw_axis = [&](double mean) {
        for (;;) {
            const double v = rng.normal(mean, opts.axis_sd);
            if (v >= opts.axis_floor) {
                return v;
            }
        }
    };
    std::vector<LandmarkTemplate> out;
    out.reserve(opts.members);
    char buf[32];
    for (int i = 0; i < ellipses; ++i) {
        const double a = draw_axis(opts.axis_mean.x());
        const double b = draw_axis(opts.axis_mean.y());
        LandmarkTemplate t = synth_ellipse(a, b, opts.landmarks);
        std::snprintf(buf, sizeof buf, "ellipse_%02d", i + 1);
        t.label = buf;
        out.push_back(std::move(t));
    }
    for (int i = 0; i < hearts; ++i) {
        LandmarkTemplate t = synth_heart(opts.landmarks);
        std::snprintf(buf, sizeof buf, "heart_%02d", i + 1);
        t.label = buf;
        out.push_back(std::move(t));
    }
    return out;
}

PlantedShiftData synth_planted_shift(const PlantedShiftOptions &opts) {
    if (opts.controls < 2 || opts.cases < 2 || opts.landmarks < 1) {
        throw ParameterError("synth_planted_shift: need two members per group and at least one landmark");
    }
    if (opts.landmark < 1 || opts.landmark > opts.landmarks) {
        throw ParameterError("synth_planted_shift: planted landmark out of range");
    }
    if (!(opts.noise_sd > 0.0) || !(opts.axes.x() > 0.0) || !(opts.axes.y() > 0.0)) {
        throw ParameterError("synth_planted_shift: axes and noise_sd must be positive");
    }
    const LandmarkTemplate base = synth_ellipse(opts.axes.x(), opts.axes.y(), opts.landmarks);
    const auto j = static_cast<Eigen::Index>(opts.landmark - 1);
    // outward normal of x^2/a^2 + y^2/b^2 = 1 is the gradient direction (x/a^2, y/b^2)
    Vec2 normal(base.points(j, 0) / (opts.axes.x() * opts.axes.x()), base.points(j, 1) / (opts.axes.y() * opts.axes.y()));
    normal.normalize();
    Rng rng(derive_seed(opts.seed, {0x5A1F}));
    PlantedShiftData out;
    char buf[32];
    auto member = [&](const char *prefix, int i) {
        LandmarkTemplate t = base;
        for (Eigen::Index k = 0; k < t.size(); ++k) {
            t.points(k, 0) += opts.noise_sd * rng.normal();
            t.points(k, 1) += opts.noise_sd * rng.normal();
        }
        std::snprintf(buf, sizeof buf, "%s_%02d", prefix, i + 1);
        t.label = buf;
        return t;
    };
    for (int i = 0; i < opts.controls; ++i) {
        out.controls.push_back(member("control", i));
    }
    for (int i = 0; i < opts.cases; ++i) {
        LandmarkTemplate t = member("case", i);
        t.points.row(j) += (opts.shift_sds * opts.noise_sd * normal).transpose();
        out.cases.push_back(std::move(t));
    }
    return out;
}

} // namespace lmm::io
