#include "mfreg/volume.hpp"

#include <cmath>
#include <stdexcept>

#include "mfreg/parallel.hpp"

namespace mfreg {

Volume make_volume(std::array<index_t, 3> m, std::array<double, 3> h, double fill) {
    Volume v;
    v.grid = make_image_grid(m, h);
    v.data.assign(static_cast<std::size_t>(v.grid.count()), fill);
    return v;
}

namespace {

inline double sample_or_zero(const Volume& t, index_t i, index_t j, index_t k) {
    const auto& m = t.grid.m;
    if (i < 0 || j < 0 || k < 0 || i >= m[0] || j >= m[1] || k >= m[2]) {
        return 0.0;
    }
    return t.data[static_cast<std::size_t>(t.grid.linear(i, j, k))];
}

} // namespace

InterpResult interpolate(const Volume& t, const std::array<double, 3>& p) {
    // Sample-space coordinate; sample s lives at physical (s + 0.5) * h.
    std::array<double, 3> s{};
    std::array<index_t, 3> base{};
    std::array<double, 3> f{};
    for (int a = 0; a < 3; ++a) {
        s[a] = p[static_cast<std::size_t>(a)] / t.grid.h[static_cast<std::size_t>(a)] - 0.5;
        // Containing cell with ties toward the lower cell: frac in (0, 1].
        const double c = std::ceil(s[a]);
        base[a] = static_cast<index_t>(c) - 1;
        f[a] = s[a] - static_cast<double>(base[a]);
    }

    double v[2][2][2];
    for (int g = 0; g < 2; ++g) {
        for (int b = 0; b < 2; ++b) {
            for (int a = 0; a < 2; ++a) {
                v[g][b][a] = sample_or_zero(t, base[0] + a, base[1] + b, base[2] + g);
            }
        }
    }

    const double fx = f[0], fy = f[1], fz = f[2];
    // Collapse x, then y, then z; keep the pieces needed for the gradient.
    double cx[2][2]; // value after x-interp
    double dx[2][2]; // d/dx (in sample space)
    for (int g = 0; g < 2; ++g) {
        for (int b = 0; b < 2; ++b) {
            cx[g][b] = v[g][b][0] * (1.0 - fx) + v[g][b][1] * fx;
            dx[g][b] = v[g][b][1] - v[g][b][0];
        }
    }
    double cy[2], dyv[2], dxv[2];
    for (int g = 0; g < 2; ++g) {
        cy[g] = cx[g][0] * (1.0 - fy) + cx[g][1] * fy;
        dyv[g] = cx[g][1] - cx[g][0];
        dxv[g] = dx[g][0] * (1.0 - fy) + dx[g][1] * fy;
    }
    InterpResult r;
    r.value = cy[0] * (1.0 - fz) + cy[1] * fz;
    const double gx = dxv[0] * (1.0 - fz) + dxv[1] * fz;
    const double gy = dyv[0] * (1.0 - fz) + dyv[1] * fz;
    const double gz = cy[1] - cy[0];
    r.grad = {gx / t.grid.h[0], gy / t.grid.h[1], gz / t.grid.h[2]};
    return r;
}

void sample_deformed(const Volume& t, std::span<const double> points, SampledTemplate& out) {
    if (points.size() % 3 != 0) {
        throw std::invalid_argument("sample_deformed: points length must be a multiple of 3");
    }
    const index_t n = static_cast<index_t>(points.size() / 3);
    out.resize(n);
    const double* px = points.data();
    const double* py = px + n;
    const double* pz = py + n;
    parallel_for(n, [&](index_t lo, index_t hi) {
        for (index_t i = lo; i < hi; ++i) {
            const auto r = interpolate(t, {px[i], py[i], pz[i]});
            out.values[static_cast<std::size_t>(i)] = r.value;
            out.partials[0][static_cast<std::size_t>(i)] = r.grad[0];
            out.partials[1][static_cast<std::size_t>(i)] = r.grad[1];
            out.partials[2][static_cast<std::size_t>(i)] = r.grad[2];
        }
    });
}

std::array<double, 6> discrete_gradient(std::span<const double> data, const GridDesc& g, index_t i) {
    std::array<double, 6> r{};
    const double vi = data[static_cast<std::size_t>(i)];
    static constexpr Dir neg[3] = {Dir::NegX, Dir::NegY, Dir::NegZ};
    static constexpr Dir pos[3] = {Dir::PosX, Dir::PosY, Dir::PosZ};
    for (int a = 0; a < 3; ++a) {
        const double h = g.h[static_cast<std::size_t>(a)];
        r[static_cast<std::size_t>(a)] =
            (vi - data[static_cast<std::size_t>(g.neighbor(i, neg[a]))]) / h;
        r[static_cast<std::size_t>(a + 3)] =
            (data[static_cast<std::size_t>(g.neighbor(i, pos[a]))] - vi) / h;
    }
    return r;
}

std::array<double, 6> discrete_gradient(const Volume& v, index_t i) {
    return discrete_gradient(v.data, v.grid, i);
}

double eps_norm(const std::array<double, 6>& g, double eps) {
    double s = 0.0;
    for (double x : g) {
        s += x * x;
    }
    return std::sqrt(0.5 * s + eps * eps);
}

Volume downsample(const Volume& v) {
    for (int a = 0; a < 3; ++a) {
        if (v.grid.m[static_cast<std::size_t>(a)] < 2) {
            throw std::invalid_argument("downsample: all axes must have m >= 2");
        }
    }
    Volume c;
    c.grid.kind = GridKind::CellCentered;
    for (int a = 0; a < 3; ++a) {
        c.grid.m[static_cast<std::size_t>(a)] = (v.grid.m[static_cast<std::size_t>(a)] + 1) / 2;
        c.grid.h[static_cast<std::size_t>(a)] = 2.0 * v.grid.h[static_cast<std::size_t>(a)];
    }
    c.data.assign(static_cast<std::size_t>(c.grid.count()), 0.0);
    const auto& fm = v.grid.m;
    for (index_t k = 0; k < c.grid.m[2]; ++k) {
        for (index_t j = 0; j < c.grid.m[1]; ++j) {
            for (index_t i = 0; i < c.grid.m[0]; ++i) {
                double sum = 0.0;
                int cnt = 0;
                for (index_t dz = 0; dz < 2; ++dz) {
                    for (index_t dy = 0; dy < 2; ++dy) {
                        for (index_t dx = 0; dx < 2; ++dx) {
                            const index_t fi = 2 * i + dx;
                            const index_t fj = 2 * j + dy;
                            const index_t fk = 2 * k + dz;
                            if (fi < fm[0] && fj < fm[1] && fk < fm[2]) {
                                sum += v.data[static_cast<std::size_t>(v.grid.linear(fi, fj, fk))];
                                ++cnt;
                            }
                        }
                    }
                }
                c.data[static_cast<std::size_t>(c.grid.linear(i, j, k))] = sum / cnt;
            }
        }
    }
    return c;
}

} // namespace mfreg
