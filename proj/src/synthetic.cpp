#include "mfreg/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace mfreg::synthetic {

namespace {

double soft_step(double x, double width) { return 1.0 / (1.0 + std::exp(-x / width)); }

} // namespace

Volume make_phantom(std::array<index_t, 3> m, std::array<double, 3> h) {
    Volume v;
    v.grid = make_image_grid(m, h);
    v.data.resize(static_cast<std::size_t>(v.grid.count()));
    const std::array<double, 3> e = {v.grid.extent(0), v.grid.extent(1), v.grid.extent(2)};
    const double scale = std::min({e[0], e[1], e[2]});
    const double edge = 0.015 * scale;

    struct Sphere {
        std::array<double, 3> c; // relative to extent
        double r;                // relative to min extent
        double w;
    };
    static constexpr Sphere spheres[] = {
        {{0.35, 0.4, 0.45}, 0.22, 1.0},
        {{0.68, 0.62, 0.40}, 0.14, -0.7},
        {{0.55, 0.30, 0.68}, 0.10, 0.8},
        {{0.30, 0.70, 0.62}, 0.08, 0.6},
        {{0.72, 0.35, 0.70}, 0.06, -0.5},
    };

    const index_t n = v.grid.count();
    for (index_t i = 0; i < n; ++i) {
        const auto p = v.grid.point_coords(i);
        double val = 0.1 * (p[0] / e[0]) * (p[1] / e[1]);
        for (const auto& s : spheres) {
            double d2 = 0.0;
            for (int a = 0; a < 3; ++a) {
                const double diff = p[static_cast<std::size_t>(a)] -
                                    s.c[static_cast<std::size_t>(a)] * e[static_cast<std::size_t>(a)];
                d2 += diff * diff;
            }
            val += s.w * soft_step(s.r * scale - std::sqrt(d2), edge);
        }
        // Diagonal slab through the volume.
        const double plane = (p[0] / e[0] + p[1] / e[1] + p[2] / e[2]) / 3.0 - 0.55;
        val += 0.4 * soft_step(-std::abs(plane) + 0.04, 0.01);
        // Smooth texture so the gradient direction varies everywhere.
        const double tx = 2.0 * std::numbers::pi * p[0] / e[0];
        const double ty = 2.0 * std::numbers::pi * p[1] / e[1];
        const double tz = 2.0 * std::numbers::pi * p[2] / e[2];
        val += 0.12 * std::sin(3.0 * tx + 0.8 * std::sin(2.0 * ty)) *
                   std::cos(2.0 * ty + 0.6 * std::sin(3.0 * tz)) +
               0.08 * std::cos(4.0 * tz + 0.7 * std::sin(2.0 * tx)) *
                   std::sin(3.0 * ty + 0.5 * std::cos(2.0 * tx));
        v.data[static_cast<std::size_t>(i)] = val;
    }
    return v;
}

Volume make_random_volume(std::array<index_t, 3> m, std::array<double, 3> h, std::uint64_t seed,
                          int smooth_passes) {
    Volume v;
    v.grid = make_image_grid(m, h);
    v.data.resize(static_cast<std::size_t>(v.grid.count()));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (auto& x : v.data) {
        x = dist(rng);
    }
    std::vector<double> tmp(v.data.size());
    for (int pass = 0; pass < smooth_passes; ++pass) {
        for (index_t i = 0; i < v.grid.count(); ++i) {
            double s = v.data[static_cast<std::size_t>(i)];
            for (Dir d : kAllDirs) {
                if (d == Dir::Center) {
                    continue;
                }
                s += v.data[static_cast<std::size_t>(v.grid.neighbor(i, d))];
            }
            tmp[static_cast<std::size_t>(i)] = s / 7.0;
        }
        v.data.swap(tmp);
    }
    return v;
}

std::array<double, 3> SinusoidWarp::displacement(const std::array<double, 3>& p) const {
    std::array<double, 3> u{0.0, 0.0, 0.0};
    for (const auto& t : terms) {
        for (int d = 0; d < 3; ++d) {
            double w = t.amp[static_cast<std::size_t>(d)];
            for (int a = 0; a < 3; ++a) {
                const double x = p[static_cast<std::size_t>(a)] / extent[static_cast<std::size_t>(a)];
                // sin(pi f x + phase*x(1-x)-shaped window) — the plain
                // sine already vanishes at x=0,1 for integer f.
                w *= std::sin(std::numbers::pi * t.freq[static_cast<std::size_t>(a)] * x +
                              t.phase[static_cast<std::size_t>(a)] * x * (1.0 - x));
            }
            u[static_cast<std::size_t>(d)] += w;
        }
    }
    return u;
}

SinusoidWarp make_sinusoid_warp(const std::array<double, 3>& extent, double max_amp,
                                std::uint64_t seed) {
    SinusoidWarp w;
    w.extent = extent;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp_dist(-1.0, 1.0);
    std::uniform_int_distribution<int> freq_dist(1, 2);
    std::uniform_real_distribution<double> phase_dist(-0.5, 0.5);
    for (int t = 0; t < 3; ++t) {
        SinusoidWarp::Term term{};
        for (int d = 0; d < 3; ++d) {
            term.amp[static_cast<std::size_t>(d)] = amp_dist(rng);
            term.freq[static_cast<std::size_t>(d)] = freq_dist(rng);
            term.phase[static_cast<std::size_t>(d)] = phase_dist(rng);
        }
        w.terms.push_back(term);
    }
    // Bound: per component, sum of |amp| over terms.
    double bound = 0.0;
    for (int d = 0; d < 3; ++d) {
        double s = 0.0;
        for (const auto& t : w.terms) {
            s += std::abs(t.amp[static_cast<std::size_t>(d)]);
        }
        bound = std::max(bound, s);
    }
    const double scale = bound > 0.0 ? max_amp / (bound * std::sqrt(3.0)) : 0.0;
    for (auto& t : w.terms) {
        for (auto& a : t.amp) {
            a *= scale;
        }
    }
    return w;
}

Volume warp_with(const Volume& t, const SinusoidWarp& w) {
    Volume out;
    out.grid = t.grid;
    out.data.resize(static_cast<std::size_t>(out.grid.count()));
    const index_t n = out.grid.count();
    for (index_t i = 0; i < n; ++i) {
        auto p = out.grid.point_coords(i);
        const auto u = w.displacement(p);
        for (int d = 0; d < 3; ++d) {
            p[static_cast<std::size_t>(d)] += u[static_cast<std::size_t>(d)];
        }
        out.data[static_cast<std::size_t>(i)] = interpolate(t, p).value;
    }
    return out;
}

std::vector<double> warp_field(const SinusoidWarp& w, const GridDesc& nodal) {
    const index_t n = nodal.count();
    std::vector<double> y(static_cast<std::size_t>(3 * n));
    for (index_t i = 0; i < n; ++i) {
        const auto p = nodal.point_coords(i);
        const auto u = w.displacement(p);
        for (int d = 0; d < 3; ++d) {
            y[static_cast<std::size_t>(d * n + i)] =
                p[static_cast<std::size_t>(d)] + u[static_cast<std::size_t>(d)];
        }
    }
    return y;
}

} // namespace mfreg::synthetic
