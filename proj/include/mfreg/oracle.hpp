#ifndef MFREG_ORACLE_HPP
#define MFREG_ORACLE_HPP

#include <span>
#include <vector>

#include "mfreg/grid.hpp"
#include "mfreg/ngf.hpp"
#include "mfreg/transfer.hpp"
#include "mfreg/volume.hpp"

namespace mfreg::oracle {

// Coordinate-format sparse matrix; correctness over speed, single-threaded.
struct SparseMatrix {
    index_t rows = 0;
    index_t cols = 0;
    struct Entry {
        index_t r;
        index_t c;
        double v;
    };
    std::vector<Entry> entries;

    void add(index_t r, index_t c, double v) { entries.push_back({r, c, v}); }
    // Sorts row-major and merges duplicates (clamped boundary entries).
    void finalize();

    std::vector<double> multiply(std::span<const double> x) const;
    std::vector<double> multiply_transpose(std::span<const double> x) const;
    index_t max_row_nnz() const;
    SparseMatrix transposed() const;
    std::int64_t byte_size() const;
};

// dr = dr/dT (m x m), assembled from the quotient rule applied to the
// residual, independent of the matrix-free rho coefficients.
SparseMatrix assemble_dr(const Volume& ref, std::span<const double> tpl_values,
                         const NgfParams& params, const GridDesc& g);

// Residuals r_i computed by the same independent route.
std::vector<double> oracle_residuals(const Volume& ref, std::span<const double> tpl_values,
                                     const NgfParams& params, const GridDesc& g);

// dT/dP (m x 3m): three diagonal blocks of sampled partials.
SparseMatrix assemble_dT(const SampledTemplate& sampled);

// P (3m x 3m^y): eight weights per row, rows sum to one.
SparseMatrix assemble_P(const TransferPlan& plan);

// 7-point Laplacian B (m^y x m^y) with clamp-merged boundary entries.
SparseMatrix assemble_laplacian(const GridDesc& g);

// Fully assembled derivative chain for one iterate. Construction is
// instrumented: element stores and transient bytes are reported to the
// counters module.
class Derivatives {
public:
    Derivatives(const Volume& ref, const SampledTemplate& sampled, const NgfParams& params,
                const GridDesc& image_grid, const TransferPlan& plan, const GridDesc& deform_grid);
    ~Derivatives();
    Derivatives(const Derivatives&) = delete;
    Derivatives& operator=(const Derivatives&) = delete;

    // dD/dP = (dpsi * dr * dT)^T, length 3m.
    std::vector<double> distance_gradient_image() const;
    // H_hat * p on the image grid (2*h_bar, PSD sign), length 3m.
    std::vector<double> distance_hvp_image(std::span<const double> p) const;

    // Full objective gradient / Gauss-Newton product on the deformation
    // grid, including the curvature terms 2*h_bar^y B^T B.
    std::vector<double> objective_gradient(std::span<const double> u, double alpha) const;
    std::vector<double> gn_hvp(std::span<const double> p, double alpha) const;

    const SparseMatrix& dr() const { return dr_; }
    const SparseMatrix& dT() const { return dT_; }
    const SparseMatrix& P() const { return P_; }
    const SparseMatrix& B() const { return B_; }
    const std::vector<double>& residuals() const { return residuals_; }

private:
    GridDesc image_grid_;
    GridDesc deform_grid_;
    SparseMatrix dr_;
    SparseMatrix dT_;
    SparseMatrix P_;
    SparseMatrix B_;
    std::vector<double> residuals_;
    std::int64_t traced_bytes_ = 0;
};

} // namespace mfreg::oracle

#endif
