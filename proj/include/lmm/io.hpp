#pragma once

#include "lmm/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lmm::io {

inline constexpr const char *kTemplateCsvHeader = "template_id,landmark_id,x,y";

struct GroupManifest {
    std::string name;
    std::string role = "unlabeled";  // control | case | unlabeled
    int landmarks = 0;
    std::vector<std::string> templates;       // paths relative to the manifest
    std::vector<std::string> landmark_names;  // optional
};

// 17 significant digits; round-trips any double.
std::string format_double(double v);

GroupManifest read_manifest(const std::filesystem::path &path);
void write_manifest(const GroupManifest &manifest, const std::filesystem::path &path);

// All templates in a CSV file, in order of first appearance; landmark rows sorted by landmark_id.
std::vector<LandmarkTemplate> read_template_csv(const std::filesystem::path &path);
void write_template_csv(const std::vector<LandmarkTemplate> &templates, const std::filesystem::path &path);

// Templates of a manifest, in manifest order. Throws IngestionError with file/line context.
std::vector<LandmarkTemplate> read_group(const std::filesystem::path &manifest_path);

// Writes one CSV per template next to the manifest, then the manifest itself.
void write_group(const std::vector<LandmarkTemplate> &templates, const std::filesystem::path &manifest_path,
                 const std::string &name, const std::string &role = "unlabeled",
                 const std::vector<std::string> &landmark_names = {});

// Points at theta_k = 2 pi k / n on x^2/a^2 + y^2/b^2 = 1.
LandmarkTemplate synth_ellipse(double a_axis, double b_axis, int n_landmarks);

// Points at theta_k = 2 pi k / n on the heart curve
//   x = (13 cos t - 5 cos 2t - 2 cos 3t - cos 4t) / 5,  y = 16 sin^3 t / 5.
LandmarkTemplate synth_heart(int n_landmarks);

struct SynthOptions {
    double alpha = 0.0;  // outlier fraction
    int members = 20;
    int landmarks = 20;
    Vec2 axis_mean = Vec2(4.0, 2.0);
    double axis_sd = 0.4472135954999579;  // sqrt(0.2)
    double axis_floor = 0.1;               // axis draws below this are redrawn
    std::uint64_t seed = 0;
};

// round(alpha * m) heart outliers after m - round(alpha * m) ellipses with Gaussian axes.
std::vector<LandmarkTemplate> synth_group(const SynthOptions &opts);

struct PlantedShiftOptions {
    int controls = 14;
    int cases = 14;
    int landmarks = 13;
    Vec2 axes = Vec2(4.0, 2.0);  // base ellipse
    double noise_sd = 0.1;       // isotropic landmark jitter, both groups
    double shift_sds = 3.0;      // displacement of the planted landmark in units of noise_sd
    int landmark = 1;            // 1-based planted landmark
    std::uint64_t seed = 0;
};

struct PlantedShiftData {
    std::vector<LandmarkTemplate> controls;
    std::vector<LandmarkTemplate> cases;
};

// Two jittered copies of one ellipse; every case has `landmark` moved outward along the ellipse
// normal by shift_sds * noise_sd.
PlantedShiftData synth_planted_shift(const PlantedShiftOptions &opts);

inline bool is_heart(const LandmarkTemplate &t) { return t.label.rfind("heart", 0) == 0; }

} // namespace lmm::io
