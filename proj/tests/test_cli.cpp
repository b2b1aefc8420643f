#include "doctest.h"

#include "lmm/io.hpp"
#include "lmm/types.hpp"

#include "json.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace lmm;
namespace fs = std::filesystem;

namespace {
const fs::path work_root = LMM_CLI_WORK;

fs::path fresh_dir(const std::string &name) {
    const fs::path d = work_root / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run_lmm(const std::string &args, const fs::path &log) {
    const std::string cmd = std::string(LMM_EXE) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

nlohmann::json load(const fs::path &p) { return nlohmann::json::parse(slurp(p)); }

LandmarkTemplate ellipse(int n, double a, double b, double wobble) {
    Points p(n, 2);
    for (int i = 0; i < n; ++i) {
        const double t = 2 * M_PI * i / n;
        p(i, 0) = a * std::cos(t) + wobble * std::sin(3 * t);
        p(i, 1) = b * std::sin(t);
    }
    return {p, "ellipse"};
}

void write_one(const LandmarkTemplate &t, const fs::path &p) { io::write_template_csv({t}, p); }
} // namespace

TEST_CASE("match: identical inputs give zero momentum") {
    const auto d = fresh_dir("match_identity");
    write_one(ellipse(10, 2, 1, 0), d / "ref.csv");
    REQUIRE(run_lmm("match " + (d / "ref.csv").string() + " " + (d / "ref.csv").string() + " --out " + (d / "o").string(),
                d / "log") == 0);
    const auto p = io::read_template_csv(d / "o" / "momentum.csv");
    REQUIRE(p.size() == 1);
    CHECK(p[0].points.isZero(0.0));
    const auto j = load(d / "o" / "match.json");
    CHECK(j["converged"] == true);
    CHECK(j["run_config"]["seed"] == 0);
    CHECK(j["run_config"]["kernel_b"] == 1.5);
    CHECK(fs::exists(d / "o" / "run_config.json"));
}

TEST_CASE("match: missing input and forced non-convergence") {
    const auto d = fresh_dir("match_errors");
    write_one(ellipse(10, 2, 1, 0), d / "ref.csv");
    write_one(ellipse(10, 2.5, 1.2, 0.3), d / "tgt.csv");
    CHECK(run_lmm("match " + (d / "nope.csv").string() + " " + (d / "tgt.csv").string() + " --out " + d.string(),
              d / "log") == 1);
    CHECK(slurp(d / "log").find("nope.csv") != std::string::npos);
    CHECK(run_lmm("match " + (d / "ref.csv").string() + " " + (d / "tgt.csv").string() + " --max-iter 1 --out " +
                  (d / "o").string(),
              d / "log") == 2);
    CHECK(load(d / "o" / "match.json")["converged"] == false);
    CHECK(run_lmm("match --kernel-z 3", d / "log") == 1);
}

TEST_CASE("match then exp reproduces the target") {
    const auto d = fresh_dir("roundtrip");
    const auto tgt = ellipse(12, 2.4, 1.3, 0.3);
    write_one(ellipse(12, 2, 1, 0), d / "ref.csv");
    write_one(tgt, d / "tgt.csv");
    REQUIRE(run_lmm("match " + (d / "ref.csv").string() + " " + (d / "tgt.csv").string() + " --out " + d.string(),
                d / "log") == 0);
    const double tol = load(d / "match.json")["tolerance"].get<double>();
    REQUIRE(run_lmm("exp " + (d / "ref.csv").string() + " " + (d / "momentum.csv").string() + " --out " + d.string(),
                d / "log") == 0);
    const auto moved = io::read_template_csv(d / "deformed.csv");
    // csv round trip keeps 17 significant digits, so the reached points come back unchanged
    CHECK(rms_distance(moved[0].points, tgt.points) <= tol * 1.0001);
}

TEST_CASE("exp: zero momentum is the identity; missing momentum file fails") {
    const auto d = fresh_dir("exp_identity");
    const auto t = ellipse(8, 2, 1, 0.2);
    write_one(t, d / "t.csv");
    write_one({Points::Zero(8, 2), "zero"}, d / "p.csv");
    REQUIRE(run_lmm("exp " + (d / "t.csv").string() + " " + (d / "p.csv").string() + " --out " + d.string(), d / "log") == 0);
    CHECK(io::read_template_csv(d / "deformed.csv")[0].points == t.points);
    CHECK(run_lmm("exp " + (d / "t.csv").string() + " " + (d / "q.csv").string() + " --out " + d.string(), d / "log") == 1);
}

TEST_CASE("average: identical members average to themselves") {
    const auto d = fresh_dir("average_identity");
    const auto t = ellipse(10, 2, 1, 0.1);
    io::write_group({t, t, t}, d / "group.json", "same");
    REQUIRE(run_lmm("average " + (d / "group.json").string() + " --out " + d.string(), d / "log") == 0);
    const auto avg = io::read_template_csv(d / "average.csv");
    CHECK(rms_distance(avg[0].points, t.points) < 1e-5);
    CHECK(load(d / "average.json")["converged"] == true);
    CHECK(run_lmm("average " + (d / "none.json").string() + " --out " + d.string(), d / "log") == 1);
    CHECK(run_lmm("average " + (d / "group.json").string() + " --weights median --out " + d.string(), d / "log") == 1);
}

TEST_CASE("average: residual momenta shoot the average onto each member") {
    const auto d = fresh_dir("average_members");
    REQUIRE(run_lmm("synth --m 6 --landmarks 12 --seed 3 --out " + d.string(), d / "log") == 0);
    REQUIRE(run_lmm("average " + (d / "group.json").string() + " --weights robust --out " + d.string(), d / "log") == 0);
    const auto members = io::read_group(d / "group.json");
    const auto mom = io::read_template_csv(d / "residual_momenta.csv");
    REQUIRE(mom.size() == members.size());
    write_one(io::read_template_csv(d / "average.csv")[0], d / "avg.csv");
    for (std::size_t i = 0; i < members.size(); ++i) {
        write_one(mom[i], d / "p.csv");
        REQUIRE(run_lmm("exp " + (d / "avg.csv").string() + " " + (d / "p.csv").string() + " --out " + d.string(),
                    d / "log") == 0);
        const auto reached = io::read_template_csv(d / "deformed.csv")[0];
        CHECK(rms_distance(reached.points, members[i].points) < 1e-5 * diameter(members[i].points));
    }
    const auto summary = load(d / "average.json");
    double s = 0.0;
    for (const auto &x : summary["members"]) {
        s += x["weight"].get<double>();
    }
    CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("synth: reproducible output and argument checks") {
    const auto a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
    REQUIRE(run_lmm("synth --alpha 0.2 --m 5 --landmarks 9 --seed 4 --out " + a.string(), a / "log") == 0);
    REQUIRE(run_lmm("synth --alpha 0.2 --m 5 --landmarks 9 --seed 4 --out " + b.string(), b / "log") == 0);
    const auto ga = io::read_group(a / "group.json"), gb = io::read_group(b / "group.json");
    REQUIRE(ga.size() == 5);
    for (std::size_t i = 0; i < ga.size(); ++i) {
        CHECK(ga[i].points == gb[i].points);
        CHECK(ga[i].size() == 9);
    }
    CHECK(run_lmm("synth --alpha 1.5 --out " + a.string(), a / "log") == 1);
}

TEST_CASE("detect: planted shift end to end, replay and fit failure") {
    const auto d = fresh_dir("detect");
    REQUIRE(run_lmm("synth --planted-landmark 4 --seed 12 --out " + d.string(), d / "log") == 0);
    const std::string groups = (d / "control" / "control.json").string() + " " + (d / "case" / "case.json").string();
    REQUIRE(run_lmm("detect " + groups + " --burn-in 1000 --draws 2000 --seed 5 --out " + (d / "r").string(), d / "log") == 0);
    const auto rep = load(d / "r" / "report.json");
    bool found = false;
    for (const auto &x : rep["predictor"]) {
        found = found || x == 4;
    }
    CHECK(found);
    CHECK(rep["run_config"]["seed"] == 5);
    for (const char *f : {"tables.txt", "contours_momentum.csv", "predictive_position.csv", "run_config.json"}) {
        CHECK(fs::exists(d / "r" / f));
    }
    REQUIRE(run_lmm("replay " + (d / "r" / "run_config.json").string() + " --out " + (d / "again").string(), d / "log") == 0);
    auto a = load(d / "r" / "report.json"), b = load(d / "again" / "report.json");
    a["run_config"].erase("out");
    b["run_config"].erase("out");
    CHECK(a == b);

    CHECK(run_lmm("detect " + groups.substr(0, groups.find(' ')) + " " + (d / "missing.json").string() + " --out " +
                  d.string(),
              d / "log") == 1);

    // identical controls: positions have no spread, so the position-mode fit fails
    const auto t = ellipse(6, 2, 1, 0);
    io::write_group({t, t, t}, d / "flat" / "flat.json", "flat");
    CHECK(run_lmm("detect " + (d / "flat" / "flat.json").string() + " " + (d / "flat" / "flat.json").string() +
                  " --burn-in 200 --draws 400 --out " + (d / "f").string(),
              d / "log") == 3);
}
