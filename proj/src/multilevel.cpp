#include "mfreg/multilevel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfreg {

std::vector<LevelImages> build_pyramid(const Volume& reference, const Volume& tpl, int levels) {
    if (levels < 1) {
        throw std::invalid_argument("build_pyramid: levels must be >= 1");
    }
    for (int a = 0; a < 3; ++a) {
        if (reference.grid.m[static_cast<std::size_t>(a)] !=
            tpl.grid.m[static_cast<std::size_t>(a)]) {
            throw std::invalid_argument("build_pyramid: image sizes differ");
        }
        // Each halving step needs at least two cells per axis to act on.
        index_t m = reference.grid.m[static_cast<std::size_t>(a)];
        for (int l = 1; l < levels; ++l) {
            if (m < 2) {
                throw std::invalid_argument("build_pyramid: too many levels for this size");
            }
            m = (m + 1) / 2;
        }
        if (m < 2) {
            throw std::invalid_argument("build_pyramid: too many levels for this size");
        }
    }
    std::vector<LevelImages> out;
    out.reserve(static_cast<std::size_t>(levels));
    out.push_back({reference, tpl});
    for (int l = 1; l < levels; ++l) {
        out.push_back({downsample(out.back().reference), downsample(out.back().tpl)});
    }
    return out;
}

GridDesc deformation_grid_for(const GridDesc& image, index_t ratio) {
    if (ratio < 1) {
        throw std::invalid_argument("deformation_grid_for: ratio must be >= 1");
    }
    std::array<index_t, 3> points{};
    for (int a = 0; a < 3; ++a) {
        const index_t m = image.m[static_cast<std::size_t>(a)];
        points[static_cast<std::size_t>(a)] = std::max<index_t>(2, (m + ratio - 1) / ratio + 1);
    }
    return make_deform_grid(image, points);
}

double nodal_interpolate(std::span<const double> comp, const GridDesc& g,
                         const std::array<double, 3>& p) {
    index_t b[3];
    double w[3];
    for (int a = 0; a < 3; ++a) {
        const index_t ma = g.m[static_cast<std::size_t>(a)];
        double s = p[static_cast<std::size_t>(a)] / g.h[static_cast<std::size_t>(a)];
        s = std::clamp(s, 0.0, static_cast<double>(ma - 1));
        index_t base = static_cast<index_t>(std::floor(s));
        base = std::clamp<index_t>(base, 0, ma - 2);
        b[a] = base;
        w[a] = s - static_cast<double>(base);
    }
    double v = 0.0;
    for (int c = 0; c < 2; ++c) {
        for (int bb = 0; bb < 2; ++bb) {
            for (int aa = 0; aa < 2; ++aa) {
                const double weight = (aa ? w[0] : 1.0 - w[0]) * (bb ? w[1] : 1.0 - w[1]) *
                                      (c ? w[2] : 1.0 - w[2]);
                const index_t idx = g.linear(b[0] + aa, b[1] + bb, b[2] + c);
                v += weight * comp[static_cast<std::size_t>(idx)];
            }
        }
    }
    return v;
}

std::vector<double> prolong(std::span<const double> y_coarse, const GridDesc& coarse,
                            const GridDesc& fine) {
    coarse.validate();
    fine.validate();
    const index_t nc = coarse.count();
    if (y_coarse.size() != static_cast<std::size_t>(3 * nc)) {
        throw std::invalid_argument("prolong: field length mismatch");
    }
    for (int a = 0; a < 3; ++a) {
        const double tol = std::max(coarse.h[static_cast<std::size_t>(a)],
                                    fine.h[static_cast<std::size_t>(a)]);
        if (std::abs(coarse.extent(a) - fine.extent(a)) > tol) {
            throw std::invalid_argument("prolong: grid extents differ");
        }
    }

    std::vector<double> u(static_cast<std::size_t>(3 * nc));
    for (index_t i = 0; i < nc; ++i) {
        const auto x = coarse.point_coords(i);
        for (int d = 0; d < 3; ++d) {
            u[static_cast<std::size_t>(d * nc + i)] =
                y_coarse[static_cast<std::size_t>(d * nc + i)] - x[static_cast<std::size_t>(d)];
        }
    }

    const index_t nf = fine.count();
    std::vector<double> y(static_cast<std::size_t>(3 * nf));
    for (index_t i = 0; i < nf; ++i) {
        const auto x = fine.point_coords(i);
        for (int d = 0; d < 3; ++d) {
            const auto comp = std::span<const double>(u).subspan(
                static_cast<std::size_t>(d * nc), static_cast<std::size_t>(nc));
            y[static_cast<std::size_t>(d * nf + i)] =
                x[static_cast<std::size_t>(d)] + nodal_interpolate(comp, coarse, x);
        }
    }
    return y;
}

MultilevelResult register_multilevel(const Volume& reference, const Volume& tpl,
                                     const MultilevelConfig& cfg) {
    const auto pyramid = build_pyramid(reference, tpl, cfg.levels);

    MultilevelResult out;
    std::vector<double> y;
    GridDesc prev_grid;
    bool have_prev = false;

    for (int l = cfg.levels - 1; l >= 0; --l) {
        const auto& lv = pyramid[static_cast<std::size_t>(l)];
        const GridDesc dg = deformation_grid_for(lv.reference.grid, cfg.deform_ratio);
        Objective obj(lv.reference, lv.tpl, dg, cfg.ngf, cfg.alpha);
        if (have_prev) {
            y = prolong(y, prev_grid, dg);
        } else {
            y = obj.identity();
        }
        MinimizeResult res = cfg.method == Method::Lbfgs ? lbfgs_minimize(obj, y, cfg.opt)
                                                         : gauss_newton_minimize(obj, y, cfg.opt);
        y = res.y;
        out.levels.push_back({lv.reference.grid, dg, std::move(res)});
        prev_grid = dg;
        have_prev = true;
    }
    out.y = std::move(y);
    out.deform_grid = prev_grid;
    return out;
}

} // namespace mfreg
