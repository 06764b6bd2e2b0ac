#include "mfreg/curvature.hpp"

#include <stdexcept>

#include "mfreg/parallel.hpp"

namespace mfreg {

double laplacian(std::span<const double> u_comp, const GridDesc& g, index_t i) {
    static constexpr Dir neg[3] = {Dir::NegX, Dir::NegY, Dir::NegZ};
    static constexpr Dir pos[3] = {Dir::PosX, Dir::PosY, Dir::PosZ};
    const double ui = u_comp[static_cast<std::size_t>(i)];
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double h = g.h[static_cast<std::size_t>(a)];
        s += (u_comp[static_cast<std::size_t>(g.neighbor(i, neg[a]))] - 2.0 * ui +
              u_comp[static_cast<std::size_t>(g.neighbor(i, pos[a]))]) /
             (h * h);
    }
    return s;
}

void laplacian_apply(std::span<const double> u_comp, const GridDesc& g, std::span<double> out) {
    const index_t n = g.count();
    if (u_comp.size() != static_cast<std::size_t>(n) || out.size() != static_cast<std::size_t>(n)) {
        throw std::invalid_argument("laplacian_apply: length mismatch");
    }
    parallel_for(n, [&](index_t lo, index_t hi) {
        for (index_t i = lo; i < hi; ++i) {
            out[static_cast<std::size_t>(i)] = laplacian(u_comp, g, i);
        }
    });
}

double curvature_value(std::span<const double> u, const GridDesc& g) {
    const index_t n = g.count();
    if (u.size() != static_cast<std::size_t>(3 * n)) {
        throw std::invalid_argument("curvature_value: length must be 3*m^y");
    }
    double total = 0.0;
    for (int d = 0; d < 3; ++d) {
        const auto comp = u.subspan(static_cast<std::size_t>(d * n), static_cast<std::size_t>(n));
        total += chunked_sum(n, [&](index_t i) {
            const double l = laplacian(comp, g, i);
            return l * l;
        });
    }
    return g.cell_volume() * total;
}

namespace {

void biharmonic(std::span<const double> v, const GridDesc& g, std::span<double> scratch,
                std::span<double> out) {
    const index_t n = g.count();
    if (v.size() != static_cast<std::size_t>(3 * n) || out.size() != v.size() ||
        scratch.size() < static_cast<std::size_t>(n)) {
        throw std::invalid_argument("curvature: buffer length mismatch");
    }
    const double scale = 2.0 * g.cell_volume();
    for (int d = 0; d < 3; ++d) {
        const auto comp = v.subspan(static_cast<std::size_t>(d * n), static_cast<std::size_t>(n));
        auto ocomp = out.subspan(static_cast<std::size_t>(d * n), static_cast<std::size_t>(n));
        laplacian_apply(comp, g, scratch.first(static_cast<std::size_t>(n)));
        parallel_for(n, [&](index_t lo, index_t hi) {
            for (index_t i = lo; i < hi; ++i) {
                ocomp[static_cast<std::size_t>(i)] =
                    scale * laplacian(scratch.first(static_cast<std::size_t>(n)), g, i);
            }
        });
    }
}

} // namespace

void curvature_gradient(std::span<const double> u, const GridDesc& g, std::span<double> scratch,
                        std::span<double> out) {
    biharmonic(u, g, scratch, out);
}

void curvature_hessian_vec(std::span<const double> p, const GridDesc& g, std::span<double> scratch,
                           std::span<double> out) {
    biharmonic(p, g, scratch, out);
}

std::vector<double> curvature_gradient(std::span<const double> u, const GridDesc& g) {
    std::vector<double> scratch(static_cast<std::size_t>(g.count()), 0.0);
    std::vector<double> out(u.size(), 0.0);
    curvature_gradient(u, g, scratch, out);
    return out;
}

std::vector<double> curvature_hessian_vec(std::span<const double> p, const GridDesc& g) {
    std::vector<double> scratch(static_cast<std::size_t>(g.count()), 0.0);
    std::vector<double> out(p.size(), 0.0);
    curvature_hessian_vec(p, g, scratch, out);
    return out;
}

} // namespace mfreg
