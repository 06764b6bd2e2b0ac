#ifndef MFREG_GRID_HPP
#define MFREG_GRID_HPP

#include <array>
#include <cstdint>
#include <stdexcept>

namespace mfreg {

using index_t = std::int64_t;

enum class GridKind { CellCentered, Nodal };

// Axis-direction offsets used by the NGF stencils, ordered as
// {-z, -y, -x, 0, +x, +y, +z}.
enum class Dir : int { NegZ = 0, NegY, NegX, Center, PosX, PosY, PosZ };

inline constexpr std::array<Dir, 7> kAllDirs = {Dir::NegZ, Dir::NegY, Dir::NegX, Dir::Center,
                                                Dir::PosX, Dir::PosY, Dir::PosZ};

inline constexpr int dir_axis(Dir d) {
    switch (d) {
    case Dir::NegX:
    case Dir::PosX: return 0;
    case Dir::NegY:
    case Dir::PosY: return 1;
    case Dir::NegZ:
    case Dir::PosZ: return 2;
    default: return -1;
    }
}

inline constexpr int dir_sign(Dir d) {
    switch (d) {
    case Dir::NegX:
    case Dir::NegY:
    case Dir::NegZ: return -1;
    case Dir::Center: return 0;
    default: return 1;
    }
}

inline constexpr Dir dir_opposite(Dir d) {
    return static_cast<Dir>(6 - static_cast<int>(d));
}

// Grid descriptor for a cell-centered image grid or a nodal deformation
// grid. Both span the domain [0, extent] with extent_k = m_k * h_k for
// cell-centered grids and (m_k - 1) * h_k for nodal grids.
struct GridDesc {
    std::array<index_t, 3> m{1, 1, 1};
    std::array<double, 3> h{1.0, 1.0, 1.0};
    GridKind kind = GridKind::CellCentered;

    index_t count() const { return m[0] * m[1] * m[2]; }
    double cell_volume() const { return h[0] * h[1] * h[2]; }

    double extent(int axis) const {
        return kind == GridKind::CellCentered ? static_cast<double>(m[axis]) * h[axis]
                                              : static_cast<double>(m[axis] - 1) * h[axis];
    }

    index_t linear(index_t i, index_t j, index_t k) const { return i + j * m[0] + k * m[0] * m[1]; }

    std::array<index_t, 3> decompose(index_t idx) const {
        const index_t i = idx % m[0];
        const index_t j = (idx / m[0]) % m[1];
        const index_t k = idx / (m[0] * m[1]);
        return {i, j, k};
    }

    // Axis neighbor with Neumann clamping at the boundary; Dir::Center
    // returns the index unchanged.
    index_t neighbor(index_t idx, Dir d) const {
        if (d == Dir::Center) {
            return idx;
        }
        auto c = decompose(idx);
        const int a = dir_axis(d);
        index_t v = c[static_cast<std::size_t>(a)] + dir_sign(d);
        if (v < 0) {
            v = 0;
        }
        if (v > m[static_cast<std::size_t>(a)] - 1) {
            v = m[static_cast<std::size_t>(a)] - 1;
        }
        c[static_cast<std::size_t>(a)] = v;
        return linear(c[0], c[1], c[2]);
    }

    std::array<double, 3> point_coords(index_t idx) const {
        const auto c = decompose(idx);
        std::array<double, 3> p{};
        for (int a = 0; a < 3; ++a) {
            const double base = static_cast<double>(c[static_cast<std::size_t>(a)]);
            p[static_cast<std::size_t>(a)] =
                kind == GridKind::CellCentered ? (base + 0.5) * h[static_cast<std::size_t>(a)]
                                               : base * h[static_cast<std::size_t>(a)];
        }
        return p;
    }

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (m[static_cast<std::size_t>(a)] < 1) {
                throw std::invalid_argument("GridDesc: all m components must be >= 1");
            }
            if (!(h[static_cast<std::size_t>(a)] > 0.0)) {
                throw std::invalid_argument("GridDesc: all h components must be > 0");
            }
        }
        if (kind == GridKind::Nodal) {
            for (int a = 0; a < 3; ++a) {
                if (m[static_cast<std::size_t>(a)] < 2) {
                    throw std::invalid_argument("GridDesc: nodal grids need >= 2 points per axis");
                }
            }
        }
    }
};

inline GridDesc make_image_grid(std::array<index_t, 3> m, std::array<double, 3> h) {
    GridDesc g{m, h, GridKind::CellCentered};
    g.validate();
    return g;
}

// Nodal deformation grid spanning the same physical extent as the image
// grid, with the given number of points per axis. Enforces
// m^y_k - 1 <= m_k (image grid at least as fine as the deformation grid).
inline GridDesc make_deform_grid(const GridDesc& image, std::array<index_t, 3> points) {
    GridDesc g;
    g.kind = GridKind::Nodal;
    g.m = points;
    for (int a = 0; a < 3; ++a) {
        if (points[static_cast<std::size_t>(a)] < 2) {
            throw std::invalid_argument("deformation grid needs >= 2 points per axis");
        }
        if (points[static_cast<std::size_t>(a)] - 1 > image.m[static_cast<std::size_t>(a)]) {
            throw std::invalid_argument("deformation grid finer than image grid");
        }
        g.h[static_cast<std::size_t>(a)] =
            image.extent(a) / static_cast<double>(points[static_cast<std::size_t>(a)] - 1);
    }
    return g;
}

} // namespace mfreg

#endif
