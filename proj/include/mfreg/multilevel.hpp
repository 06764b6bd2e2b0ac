#ifndef MFREG_MULTILEVEL_HPP
#define MFREG_MULTILEVEL_HPP

#include <vector>

#include "mfreg/optimizer.hpp"
#include "mfreg/volume.hpp"

namespace mfreg {

struct LevelImages {
    Volume reference;
    Volume tpl;
};

// Level 0 is the finest; each coarser level is a block-average
// downsample of the previous one. Rejects level counts that would
// shrink any axis below two cells.
std::vector<LevelImages> build_pyramid(const Volume& reference, const Volume& tpl, int levels);

// Nodal deformation grid for one pyramid level:
// m^y_k = max(2, ceil(m_k / ratio) + 1), same physical extent.
GridDesc deformation_grid_for(const GridDesc& image, index_t ratio);

// Trilinear interpolation of one nodal component field at a physical
// point; coordinates are clamped to the grid domain.
double nodal_interpolate(std::span<const double> comp, const GridDesc& g,
                         const std::array<double, 3>& p);

// Trilinear prolongation of the displacement u = y - x^y from a coarse
// nodal grid to a fine one; the returned field is x^y_fine + u_fine.
// Extents may differ by up to one coarse cell per axis (odd pyramids).
std::vector<double> prolong(std::span<const double> y_coarse, const GridDesc& coarse,
                            const GridDesc& fine);

enum class Method { Lbfgs, GaussNewton };

struct MultilevelConfig {
    int levels = 3;
    index_t deform_ratio = 4;
    NgfParams ngf{};
    double alpha = 1.0;
    Method method = Method::Lbfgs;
    OptimizerConfig opt{};
};

struct LevelResult {
    GridDesc image_grid;
    GridDesc deform_grid;
    MinimizeResult result;
};

struct MultilevelResult {
    std::vector<double> y; // finest-level deformation, component-major
    GridDesc deform_grid;  // finest-level nodal grid
    std::vector<LevelResult> levels; // coarsest first
};

MultilevelResult register_multilevel(const Volume& reference, const Volume& tpl,
                                     const MultilevelConfig& cfg);

} // namespace mfreg

#endif
