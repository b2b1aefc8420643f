#include "lmm/stats.hpp"

#include "lmm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_map>

namespace lmm::stats {
namespace {

double sample_sd(const Eigen::VectorXd &v) {
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

// Normalised discrete Gaussian with standard deviation `sigma` grid cells, truncated at 4 sigma.
std::vector<double> gaussian_taps(double sigma) {
    const int half = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> w(2 * half + 1);
    for (int k = -half; k <= half; ++k) {
        w[k + half] = std::exp(-0.5 * (k / sigma) * (k / sigma));
    }
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (double &x : w) {
        x /= s;
    }
    return w;
}

struct Grid {
    int nx = 0, ny = 0;
    double x0 = 0.0, y0 = 0.0, dx = 0.0, dy = 0.0;
    std::vector<double> f;  // row-major in y: f[j * nx + i]

    double &at(int i, int j) { return f[static_cast<std::size_t>(j) * nx + i]; }
    double at(int i, int j) const { return f[static_cast<std::size_t>(j) * nx + i]; }
};

void convolve_x(Grid &g, const std::vector<double> &w) {
    const int half = static_cast<int>(w.size() / 2);
    std::vector<double> row(g.nx);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            double s = 0.0;
            for (int k = std::max(-half, -i); k <= std::min(half, g.nx - 1 - i); ++k) {
                s += w[k + half] * g.at(i + k, j);
            }
            row[i] = s;
        }
        std::copy(row.begin(), row.end(), g.f.begin() + static_cast<std::ptrdiff_t>(j) * g.nx);
    }
}

void convolve_y(Grid &g, const std::vector<double> &w) {
    const int half = static_cast<int>(w.size() / 2);
    std::vector<double> col(g.ny);
    for (int i = 0; i < g.nx; ++i) {
        for (int j = 0; j < g.ny; ++j) {
            double s = 0.0;
            for (int k = std::max(-half, -j); k <= std::min(half, g.ny - 1 - j); ++k) {
                s += w[k + half] * g.at(i, j + k);
            }
            col[j] = s;
        }
        for (int j = 0; j < g.ny; ++j) {
            g.at(i, j) = col[j];
        }
    }
}

// Marching squares on g at `level`; returns all closed loops. The caller guarantees the outer
// ring of g is below the level, so every loop closes.
std::vector<Polygon> iso_loops(const Grid &g, double level) {
    // Edge keys: 2*(j*nx+i) is the horizontal edge (i,j)-(i+1,j); +1 is the vertical edge (i,j)-(i,j+1).
    auto hkey = [&](int i, int j) { return 2 * (static_cast<long>(j) * g.nx + i); };
    auto vkey = [&](int i, int j) { return 2 * (static_cast<long>(j) * g.nx + i) + 1; };
    auto point = [&](long key) {
        const long cell = key / 2;
        const int i = static_cast<int>(cell % g.nx);
        const int j = static_cast<int>(cell / g.nx);
        const double a = g.at(i, j);
        if (key % 2 == 0) {
            const double b = g.at(i + 1, j);
            const double t = (level - a) / (b - a);
            return Vec2(g.x0 + (i + t) * g.dx, g.y0 + j * g.dy);
        }
        const double b = g.at(i, j + 1);
        const double t = (level - a) / (b - a);
        return Vec2(g.x0 + i * g.dx, g.y0 + (j + t) * g.dy);
    };

    // Directed segments with the high side on the left; next[from] = to.
    std::unordered_map<long, long> next;
    for (int j = 0; j + 1 < g.ny; ++j) {
        for (int i = 0; i + 1 < g.nx; ++i) {
            const double v0 = g.at(i, j), v1 = g.at(i + 1, j), v2 = g.at(i + 1, j + 1), v3 = g.at(i, j + 1);
            const int c = (v0 >= level ? 1 : 0) | (v1 >= level ? 2 : 0) | (v2 >= level ? 4 : 0) | (v3 >= level ? 8 : 0);
            const long eb = hkey(i, j), er = vkey(i + 1, j), et = hkey(i, j + 1), el = vkey(i, j);
            auto seg = [&](long a, long b) { next[a] = b; };
            switch (c) {
            case 0: case 15: break;
            case 1: seg(el, eb); break;
            case 2: seg(eb, er); break;
            case 3: seg(el, er); break;
            case 4: seg(er, et); break;
            case 6: seg(eb, et); break;
            case 7: seg(el, et); break;
            case 8: seg(et, el); break;
            case 9: seg(et, eb); break;
            case 11: seg(et, er); break;
            case 12: seg(er, el); break;
            case 13: seg(er, eb); break;
            case 14: seg(eb, el); break;
            case 5:
            case 10: {
                const bool centre_high = 0.25 * (v0 + v1 + v2 + v3) >= level;
                if (c == 5) {
                    if (centre_high) { seg(el, et); seg(er, eb); }
                    else { seg(el, eb); seg(er, et); }
                } else {
                    if (centre_high) { seg(eb, el); seg(et, er); }
                    else { seg(eb, er); seg(et, el); }
                }
                break;
            }
            }
        }
    }

    std::vector<long> starts;
    starts.reserve(next.size());
    for (const auto &kv : next) {
        starts.push_back(kv.first);
    }
    std::sort(starts.begin(), starts.end());
    std::unordered_map<long, bool> used;
    std::vector<Polygon> loops;
    for (long s : starts) {
        if (used[s]) {
            continue;
        }
        Polygon poly;
        long k = s;
        while (!used[k]) {
            used[k] = true;
            poly.push_back(point(k));
            auto it = next.find(k);
            if (it == next.end()) {
                break;
            }
            k = it->second;
        }
        if (poly.size() >= 3) {
            loops.push_back(std::move(poly));
        }
    }
    return loops;
}

} // namespace

double polygon_area(const Polygon &poly) {
    double a = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const Vec2 &p = poly[i];
        const Vec2 &q = poly[(i + 1) % n];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

Contour hpd_contour(const Points &sample, double level, const ContourOptions &opts) {
    const auto n = static_cast<std::size_t>(sample.rows());
    if (n < opts.min_draws) {
        throw ContourError("hpd_contour: need at least " + std::to_string(opts.min_draws) + " draws, got " +
                           std::to_string(n));
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw ParameterError("hpd_contour: level must lie in (0, 1)");
    }
    if (opts.nx < 8 || opts.ny < 8 || !(opts.bandwidth_scale > 0.0) || !(opts.pad_bandwidths >= 0.0)) {
        throw ParameterError("hpd_contour: invalid grid options");
    }
    if (!sample.allFinite()) {
        throw ContourError("hpd_contour: non-finite draws");
    }
    // Silverman's rule in two dimensions: h = sigma * n^{-1/6}.
    const double factor = std::pow(static_cast<double>(n), -1.0 / 6.0) * opts.bandwidth_scale;
    const Vec2 h(sample_sd(sample.col(0)) * factor, sample_sd(sample.col(1)) * factor);
    if (!(h.x() > 0.0) || !(h.y() > 0.0)) {
        throw ContourError("hpd_contour: sample has zero spread in a coordinate");
    }

    // One guard cell on each side stays zero so every level set closes inside the grid.
    Grid g;
    g.nx = opts.nx + 2;
    g.ny = opts.ny + 2;
    const double xlo = sample.col(0).minCoeff() - opts.pad_bandwidths * h.x();
    const double xhi = sample.col(0).maxCoeff() + opts.pad_bandwidths * h.x();
    const double ylo = sample.col(1).minCoeff() - opts.pad_bandwidths * h.y();
    const double yhi = sample.col(1).maxCoeff() + opts.pad_bandwidths * h.y();
    g.dx = (xhi - xlo) / (opts.nx - 1);
    g.dy = (yhi - ylo) / (opts.ny - 1);
    g.x0 = xlo - g.dx;
    g.y0 = ylo - g.dy;
    g.f.assign(static_cast<std::size_t>(g.nx) * g.ny, 0.0);

    // linear binning onto the interior nodes 1..nx
    Grid inner;
    inner.nx = opts.nx;
    inner.ny = opts.ny;
    inner.f.assign(static_cast<std::size_t>(inner.nx) * inner.ny, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double u = std::clamp((sample(static_cast<Eigen::Index>(k), 0) - xlo) / g.dx, 0.0, opts.nx - 1.0);
        const double v = std::clamp((sample(static_cast<Eigen::Index>(k), 1) - ylo) / g.dy, 0.0, opts.ny - 1.0);
        const int i = std::min(static_cast<int>(u), opts.nx - 2);
        const int j = std::min(static_cast<int>(v), opts.ny - 2);
        const double fu = u - i, fv = v - j;
        inner.at(i, j) += (1 - fu) * (1 - fv);
        inner.at(i + 1, j) += fu * (1 - fv);
        inner.at(i, j + 1) += (1 - fu) * fv;
        inner.at(i + 1, j + 1) += fu * fv;
    }
    convolve_x(inner, gaussian_taps(h.x() / g.dx));
    convolve_y(inner, gaussian_taps(h.y() / g.dy));
    const double norm = 1.0 / (static_cast<double>(n) * g.dx * g.dy);
    for (int j = 0; j < inner.ny; ++j) {
        for (int i = 0; i < inner.nx; ++i) {
            g.at(i + 1, j + 1) = inner.at(i, j) * norm;
        }
    }

    // density level: highest cells first until the requested mass is reached
    std::vector<double> dens = inner.f;
    std::sort(dens.begin(), dens.end(), std::greater<>());
    const double total = std::accumulate(dens.begin(), dens.end(), 0.0);
    double acc = 0.0;
    double f_level = dens.front();
    for (double d : dens) {
        acc += d;
        f_level = d;
        if (acc >= level * total) {
            break;
        }
    }

    Contour out;
    out.bandwidth = h;
    out.density_level = f_level * norm;
    out.mass = acc / total;
    auto loops = iso_loops(g, out.density_level);
    if (loops.empty()) {
        throw ContourError("hpd_contour: no iso-density loop found");
    }
    auto best = std::max_element(loops.begin(), loops.end(), [](const Polygon &a, const Polygon &b) {
        return std::fabs(polygon_area(a)) < std::fabs(polygon_area(b));
    });
    // the level is a node value, so a crossing can land on a node and repeat a vertex
    for (const Vec2 &p : *best) {
        if (out.polygon.empty() || p != out.polygon.back()) {
            out.polygon.push_back(p);
        }
    }
    while (out.polygon.size() > 1 && out.polygon.front() == out.polygon.back()) {
        out.polygon.pop_back();
    }
    if (polygon_area(out.polygon) < 0.0) {
        std::reverse(out.polygon.begin(), out.polygon.end());
    }
    return out;
}

} // namespace lmm::stats
