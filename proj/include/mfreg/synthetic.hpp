#ifndef MFREG_SYNTHETIC_HPP
#define MFREG_SYNTHETIC_HPP

#include <cstdint>
#include <vector>

#include "mfreg/grid.hpp"
#include "mfreg/volume.hpp"

namespace mfreg::synthetic {

// Smooth multi-edge phantom: several soft-edged spheres and a slab on a
// quadratic background, giving image gradients in many directions.
Volume make_phantom(std::array<index_t, 3> m, std::array<double, 3> h);

// Seeded uniform noise, optionally smoothed by box-blur passes.
Volume make_random_volume(std::array<index_t, 3> m, std::array<double, 3> h, std::uint64_t seed,
                          int smooth_passes = 0);

// Sum of low-frequency separable sinusoids per displacement component,
// scaled so the pointwise displacement magnitude never exceeds max_amp
// (physical units). Vanishes smoothly toward the domain boundary.
struct SinusoidWarp {
    struct Term {
        std::array<double, 3> amp;   // per component
        std::array<int, 3> freq;     // half-periods across the extent
        std::array<double, 3> phase;
    };
    std::array<double, 3> extent{};
    std::vector<Term> terms;

    std::array<double, 3> displacement(const std::array<double, 3>& p) const;
};

SinusoidWarp make_sinusoid_warp(const std::array<double, 3>& extent, double max_amp,
                                std::uint64_t seed);

// Resamples t through phi(p) = p + u(p) at each cell center.
Volume warp_with(const Volume& t, const SinusoidWarp& w);

// phi evaluated at the nodal points of a deformation grid,
// component-major (the ground-truth field for recovery tests).
std::vector<double> warp_field(const SinusoidWarp& w, const GridDesc& nodal);

} // namespace mfreg::synthetic

#endif
