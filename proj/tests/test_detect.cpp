#include "doctest.h"

#include "lmm/detect.hpp"
#include "lmm/errors.hpp"
#include "lmm/io.hpp"

#include <algorithm>

using namespace lmm;
using lmm::io::PlantedShiftData;
using lmm::io::PlantedShiftOptions;
using lmm::io::synth_planted_shift;

namespace {
DetectOptions quick_options(std::uint64_t seed) {
    DetectOptions o;
    o.seed = seed;
    o.mcmc.burn_in = 1000;
    o.mcmc.draws = 2000;
    return o;
}

PlantedShiftData planted(std::uint64_t seed, int landmark = 5) {
    PlantedShiftOptions p;
    p.seed = seed;
    p.landmark = landmark;
    return synth_planted_shift(p);
}

bool contains(const std::vector<int> &v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }
} // namespace

TEST_CASE("landmark samples regroup member rows") {
    Points a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 5, 6, 7, 8;
    const auto s = landmark_samples({a, b}, "N");
    REQUIRE(s.size() == 2);
    CHECK(s[1].landmark_index == 2);
    CHECK(s[1].group == "N");
    CHECK(s[1].rows(0, 0) == 3);
    CHECK(s[1].rows(1, 1) == 8);
}

TEST_CASE("comparing a group with itself selects nothing") {
    const auto data = planted(3);
    const auto rep = detect(data.controls, data.controls, quick_options(11));
    REQUIRE(rep.converged());
    CHECK(rep.method1.flagged.empty());
    CHECK(rep.momentum.predictor.empty());
    CHECK(rep.predictor.empty());
    for (double r : rep.momentum.ratios) {
        CHECK(r > 0.7);
    }
}

TEST_CASE("a planted landmark shift is found") {
    const auto data = planted(21, 5);
    const auto rep = detect(data.controls, data.cases, quick_options(21));
    REQUIRE(rep.converged());
    CHECK(contains(rep.method1.flagged, 5));
    CHECK(contains(rep.momentum.predictor, 5));
    CHECK(contains(rep.predictor, 5));
    const auto worst = std::min_element(rep.momentum.ratios.begin(), rep.momentum.ratios.end());
    CHECK(worst - rep.momentum.ratios.begin() == 4);
    // controls sit around their own average, so their residual momenta average out
    for (double v : rep.method1.control_norms) {
        CHECK(v < 1e-3);
    }
}

TEST_CASE("report structure") {
    const auto data = planted(4);
    auto o = quick_options(5);
    o.contours = false;
    const auto rep = detect(data.controls, data.cases, o);
    CHECK(rep.control_momenta.size() == 14);
    CHECK(rep.case_momenta.size() == 14);
    for (const ModeReport *m : {&rep.momentum, &rep.position}) {
        CHECK(m->ratios.size() == 13);
        CHECK(m->control.size() == 13);
        CHECK(m->cases.size() == 13);
        for (double r : m->ratios) {
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
        }
        for (const auto &c : m->control) {
            CHECK(c.predictive.box().x.lo < c.predictive.box().x.hi);
            CHECK(c.predictive.contour.polygon.empty());
        }
    }
    const auto j = to_json(rep);
    CHECK(j.contains("method1"));
    CHECK(j["method2_momentum"]["ratios"].size() == 13);
    CHECK(j["predictor"].is_array());
}

TEST_CASE("detection is deterministic and independent of thread count") {
    const auto data = planted(8);
    auto o = quick_options(9);
    o.threads = 1;
    const auto a = to_json(detect(data.controls, data.cases, o)).dump();
    o.threads = 4;
    const auto b = to_json(detect(data.controls, data.cases, o)).dump();
    CHECK(a == b);
    o.seed = 10;
    const auto c = to_json(detect(data.controls, data.cases, o)).dump();
    CHECK(a != c);
}

TEST_CASE("detect input checks") {
    const auto data = planted(1);
    auto cases = data.cases;
    cases[0].points.conservativeResize(12, 2);
    CHECK_THROWS_AS(detect(data.controls, cases, quick_options(1)), ParameterError);
    CHECK_THROWS_AS(detect(data.controls, {data.cases[0]}, quick_options(1)), ParameterError);
    auto bad = quick_options(1);
    bad.threshold = 1.5;
    CHECK_THROWS_AS(detect(data.controls, data.cases, bad), ParameterError);
}

TEST_CASE("planted shift synthesis") {
    const auto a = planted(2, 7), b = planted(2, 7);
    REQUIRE(a.controls.size() == 14);
    REQUIRE(a.cases.size() == 14);
    CHECK(a.cases[3].points == b.cases[3].points);
    CHECK(a.controls.front().size() == 13);
    PlantedShiftOptions p;
    p.landmark = 14;
    CHECK_THROWS_AS(synth_planted_shift(p), ParameterError);
}
