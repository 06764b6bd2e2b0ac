#ifndef MFREG_CURVATURE_HPP
#define MFREG_CURVATURE_HPP

#include <span>
#include <vector>

#include "mfreg/grid.hpp"

namespace mfreg {

// Discrete Laplacian of one displacement component at node i, with
// clamped (Neumann) neighbors.
double laplacian(std::span<const double> u_comp, const GridDesc& g, index_t i);

// Applies the Laplacian to a full component slice, out may not alias in.
void laplacian_apply(std::span<const double> u_comp, const GridDesc& g, std::span<double> out);

// h_bar^y * sum_i sum_d (Lap u)^2; deterministic reduction.
double curvature_value(std::span<const double> u, const GridDesc& g);

// grad_{i+d*m} = 2 h_bar^y * Lap(Lap u); scratch must hold m^y values.
void curvature_gradient(std::span<const double> u, const GridDesc& g, std::span<double> scratch,
                        std::span<double> out);

// Exact Hessian-vector product 2 h_bar^y * Lap(Lap p); identical stencil.
void curvature_hessian_vec(std::span<const double> p, const GridDesc& g, std::span<double> scratch,
                           std::span<double> out);

// Convenience overloads that allocate the scratch buffer.
std::vector<double> curvature_gradient(std::span<const double> u, const GridDesc& g);
std::vector<double> curvature_hessian_vec(std::span<const double> p, const GridDesc& g);

} // namespace mfreg

#endif
