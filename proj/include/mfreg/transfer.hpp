#ifndef MFREG_TRANSFER_HPP
#define MFREG_TRANSFER_HPP

#include <span>
#include <vector>

#include "mfreg/grid.hpp"

namespace mfreg {

// Precomputed trilinear transfer from a nodal deformation grid to a
// cell-centered image grid sharing the same physical extent. Every
// image point lies inside a deformation cell, so no extrapolation.
struct TransferPlan {
    GridDesc source; // nodal
    GridDesc target; // cell-centered
    std::array<std::vector<index_t>, 3> base; // floor(c_l(k)), in [0, m^y_l - 2]
    std::array<std::vector<double>, 3> rem;   // c_l(k) - base, in [0, 1)
    std::vector<std::vector<index_t>> slab_planes; // image z-planes per deformation z-slab
};

TransferPlan make_transfer_plan(const GridDesc& source, const GridDesc& target);

// out = P * y, per component; element-parallel over image points.
void transfer_apply(const TransferPlan& plan, std::span<const double> y, std::span<double> out);

// out = P^T * w; slice-wise red-black scatter (odd z-slabs, then even),
// bit-identical for any thread count.
void transfer_apply_transpose(const TransferPlan& plan, std::span<const double> w,
                              std::span<double> out);

} // namespace mfreg

#endif
