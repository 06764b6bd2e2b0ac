#ifndef MFREG_VOLUME_HPP
#define MFREG_VOLUME_HPP

#include <array>
#include <span>
#include <vector>

#include "mfreg/grid.hpp"

namespace mfreg {

// Scalar intensity field on a cell-centered grid, 64-bit floats.
struct Volume {
    GridDesc grid;
    std::vector<double> data;
};

Volume make_volume(std::array<index_t, 3> m, std::array<double, 3> h, double fill = 0.0);

struct InterpResult {
    double value = 0.0;
    std::array<double, 3> grad{0.0, 0.0, 0.0};
};

// Trilinear interpolation in cell-centered sample space with Dirichlet
// boundary conditions (implicit zeros outside the volume). The gradient
// is the analytic derivative of the interpolant; at cell faces the
// lower cell's one-sided derivative is used.
InterpResult interpolate(const Volume& t, const std::array<double, 3>& p);

// T(P(y)) samples plus the diagonal entries of dT/dP.
struct SampledTemplate {
    std::vector<double> values;
    std::array<std::vector<double>, 3> partials;

    void resize(index_t n) {
        values.assign(static_cast<std::size_t>(n), 0.0);
        for (auto& p : partials) {
            p.assign(static_cast<std::size_t>(n), 0.0);
        }
    }
};

// points: component-major (all x, all y, all z), length 3*n.
void sample_deformed(const Volume& t, std::span<const double> points, SampledTemplate& out);

// Combined backward/forward difference gradient (Eq. order:
// backward x,y,z then forward x,y,z) with clamped neighbors.
std::array<double, 6> discrete_gradient(const Volume& v, index_t i);
std::array<double, 6> discrete_gradient(std::span<const double> data, const GridDesc& g, index_t i);

double eps_norm(const std::array<double, 6>& g, double eps);

// Block-average downsampling: halves each axis (ceil for odd sizes),
// doubles the spacing. Requires all m_k >= 2.
Volume downsample(const Volume& v);

} // namespace mfreg

#endif
