#ifndef MFREG_NGF_HPP
#define MFREG_NGF_HPP

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "mfreg/grid.hpp"
#include "mfreg/volume.hpp"

namespace mfreg {

struct NgfParams {
    double tau = 10.0; // template edge parameter
    double rho = 10.0; // reference edge parameter
};

// Per-voxel reference-image data, recomputed whenever the reference
// volume or rho changes.
struct NgfPrecomp {
    std::vector<std::array<double, 6>> ref_grads;
    std::vector<double> ref_norms; // >= rho everywhere
};

NgfPrecomp make_ngf_precomp(const Volume& reference, double rho);

// Per-iterate state shared by value, gradient, and Hessian-vector
// kernels. inv1/inv2 are the two residual-derivative coefficients
// 1/(|dT|_tau |dR|_rho) and num/(|dT|_tau^3 |dR|_rho).
struct NgfWorkspace {
    SampledTemplate sampled;
    std::vector<std::array<double, 6>> tpl_grads;
    std::vector<double> residual;
    std::vector<double> inv1;
    std::vector<double> inv2;
};

// Populates the workspace for the deformation whose image-grid sample
// points are given component-major (length 3*m).
void populate_ngf_workspace(NgfWorkspace& ws, const Volume& tpl, std::span<const double> points,
                            const NgfPrecomp& pre, const NgfParams& params, const GridDesc& g);

double ngf_residual(index_t i, const NgfWorkspace& ws);

// rho-hat_i(k), the per-direction residual-derivative coefficient.
double ngf_rho(index_t i, Dir k, const NgfWorkspace& ws, const NgfPrecomp& pre, const GridDesc& g);

// h_bar * sum_i (1 - r_i^2); deterministic chunked reduction.
double ngf_value(const NgfWorkspace& ws, const GridDesc& g);

// dD/dP, length 3*m, element-parallel.
void ngf_gradient(const NgfWorkspace& ws, const NgfPrecomp& pre, const GridDesc& g,
                  std::span<double> out);
void ngf_gradient_counted(const NgfWorkspace& ws, const NgfPrecomp& pre, const GridDesc& g,
                          std::span<double> out);

// q = H_hat * p on the image grid, with the 2*h_bar scale and inverted
// sign so the operator is symmetric positive semi-definite.
void ngf_hessian_vec(std::span<const double> p, const NgfWorkspace& ws, const NgfPrecomp& pre,
                     const GridDesc& g, std::span<double> out);
void ngf_hessian_vec_counted(std::span<const double> p, const NgfWorkspace& ws,
                             const NgfPrecomp& pre, const GridDesc& g, std::span<double> out);

// Offset table for the Gauss-Newton product dr^T dr: for each column
// offset kappa, the contributing direction pairs (a, b) with
// mu(b) - mu(a) = kappa, where mu maps a direction to its linear-index
// offset in M = {-mx*my, -mx, -1, 0, 1, mx, mx*my}.
struct OffsetTable {
    struct Entry {
        index_t kappa;
        std::vector<std::pair<Dir, Dir>> pairs;
    };
    std::vector<Entry> entries;

    std::size_t pair_count() const {
        std::size_t n = 0;
        for (const auto& e : entries) {
            n += e.pairs.size();
        }
        return n;
    }
};

OffsetTable make_offset_table(const GridDesc& g);

} // namespace mfreg

#endif
