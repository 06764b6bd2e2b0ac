#include "mfreg/oracle.hpp"

#include <algorithm>
#include <stdexcept>

#include "mfreg/counters.hpp"

namespace mfreg::oracle {

void SparseMatrix::finalize() {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.r != b.r ? a.r < b.r : a.c < b.c;
    });
    std::vector<Entry> merged;
    merged.reserve(entries.size());
    for (const auto& e : entries) {
        if (!merged.empty() && merged.back().r == e.r && merged.back().c == e.c) {
            merged.back().v += e.v;
        } else {
            merged.push_back(e);
        }
    }
    entries = std::move(merged);
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(cols)) {
        throw std::invalid_argument("sparse multiply: dimension mismatch");
    }
    std::vector<double> y(static_cast<std::size_t>(rows), 0.0);
    for (const auto& e : entries) {
        y[static_cast<std::size_t>(e.r)] += e.v * x[static_cast<std::size_t>(e.c)];
    }
    return y;
}

std::vector<double> SparseMatrix::multiply_transpose(std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(rows)) {
        throw std::invalid_argument("sparse multiply_transpose: dimension mismatch");
    }
    std::vector<double> y(static_cast<std::size_t>(cols), 0.0);
    for (const auto& e : entries) {
        y[static_cast<std::size_t>(e.c)] += e.v * x[static_cast<std::size_t>(e.r)];
    }
    return y;
}

index_t SparseMatrix::max_row_nnz() const {
    index_t best = 0;
    index_t run = 0;
    index_t row = -1;
    for (const auto& e : entries) {
        if (e.r != row) {
            row = e.r;
            run = 0;
        }
        ++run;
        best = std::max(best, run);
    }
    return best;
}

SparseMatrix SparseMatrix::transposed() const {
    SparseMatrix t;
    t.rows = cols;
    t.cols = rows;
    t.entries.reserve(entries.size());
    for (const auto& e : entries) {
        t.entries.push_back({e.c, e.r, e.v});
    }
    t.finalize();
    return t;
}

std::int64_t SparseMatrix::byte_size() const {
    return static_cast<std::int64_t>(entries.capacity() * sizeof(Entry));
}

namespace {

struct RowCoeffs {
    std::array<double, 6> c; // 0.5 * (a * gradR - b * gradT), per difference row
};

RowCoeffs row_coeffs(const Volume& ref, std::span<const double> tpl_values,
                     const NgfParams& params, const GridDesc& g, index_t i, double* r_out) {
    const auto gR = discrete_gradient(ref, i);
    const auto gT = discrete_gradient(tpl_values, g, i);
    const double rn = eps_norm(gR, params.rho);
    const double tn = eps_norm(gT, params.tau);
    double num = params.tau * params.rho;
    for (int c = 0; c < 6; ++c) {
        num += 0.5 * gT[static_cast<std::size_t>(c)] * gR[static_cast<std::size_t>(c)];
    }
    const double a = 1.0 / (tn * rn);
    const double b = num / (tn * tn * tn * rn);
    if (r_out != nullptr) {
        *r_out = num * a;
    }
    RowCoeffs rc{};
    for (int c = 0; c < 6; ++c) {
        rc.c[static_cast<std::size_t>(c)] = 0.5 * (a * gR[static_cast<std::size_t>(c)] -
                                                   b * gT[static_cast<std::size_t>(c)]);
    }
    return rc;
}

} // namespace

SparseMatrix assemble_dr(const Volume& ref, std::span<const double> tpl_values,
                         const NgfParams& params, const GridDesc& g) {
    const index_t n = g.count();
    SparseMatrix m;
    m.rows = n;
    m.cols = n;
    static constexpr Dir neg[3] = {Dir::NegX, Dir::NegY, Dir::NegZ};
    static constexpr Dir pos[3] = {Dir::PosX, Dir::PosY, Dir::PosZ};
    for (index_t i = 0; i < n; ++i) {
        const RowCoeffs rc = row_coeffs(ref, tpl_values, params, g, i, nullptr);
        for (int a = 0; a < 3; ++a) {
            const double inv_h = 1.0 / g.h[static_cast<std::size_t>(a)];
            // Backward difference row: +1/h at i, -1/h at clamped i-k.
            m.add(i, i, rc.c[static_cast<std::size_t>(a)] * inv_h);
            m.add(i, g.neighbor(i, neg[a]), -rc.c[static_cast<std::size_t>(a)] * inv_h);
            // Forward difference row: +1/h at clamped i+k, -1/h at i.
            m.add(i, g.neighbor(i, pos[a]), rc.c[static_cast<std::size_t>(a + 3)] * inv_h);
            m.add(i, i, -rc.c[static_cast<std::size_t>(a + 3)] * inv_h);
        }
    }
    m.finalize();
    m.entries.erase(std::remove_if(m.entries.begin(), m.entries.end(),
                                   [](const SparseMatrix::Entry& e) { return e.v == 0.0; }),
                    m.entries.end());
    counters::ops().oracle_stores += static_cast<std::int64_t>(m.entries.size());
    return m;
}

std::vector<double> oracle_residuals(const Volume& ref, std::span<const double> tpl_values,
                                     const NgfParams& params, const GridDesc& g) {
    const index_t n = g.count();
    std::vector<double> r(static_cast<std::size_t>(n), 0.0);
    for (index_t i = 0; i < n; ++i) {
        row_coeffs(ref, tpl_values, params, g, i, &r[static_cast<std::size_t>(i)]);
    }
    counters::ops().oracle_stores += static_cast<std::int64_t>(n);
    return r;
}

SparseMatrix assemble_dT(const SampledTemplate& sampled) {
    const index_t n = static_cast<index_t>(sampled.values.size());
    SparseMatrix m;
    m.rows = n;
    m.cols = 3 * n;
    for (index_t i = 0; i < n; ++i) {
        for (int d = 0; d < 3; ++d) {
            const double v = sampled.partials[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)];
            if (v != 0.0) {
                m.add(i, d * n + i, v);
            }
        }
    }
    m.finalize();
    counters::ops().oracle_stores += static_cast<std::int64_t>(m.entries.size());
    return m;
}

SparseMatrix assemble_P(const TransferPlan& plan) {
    const index_t nt = plan.target.count();
    const index_t ns = plan.source.count();
    SparseMatrix m;
    m.rows = 3 * nt;
    m.cols = 3 * ns;
    const auto& sm = plan.source.m;
    for (index_t i = 0; i < nt; ++i) {
        const auto c = plan.target.decompose(i);
        const index_t bx = plan.base[0][static_cast<std::size_t>(c[0])];
        const index_t by = plan.base[1][static_cast<std::size_t>(c[1])];
        const index_t bz = plan.base[2][static_cast<std::size_t>(c[2])];
        const double rx = plan.rem[0][static_cast<std::size_t>(c[0])];
        const double ry = plan.rem[1][static_cast<std::size_t>(c[1])];
        const double rz = plan.rem[2][static_cast<std::size_t>(c[2])];
        const double wx[2] = {1.0 - rx, rx};
        const double wy[2] = {1.0 - ry, ry};
        const double wz[2] = {1.0 - rz, rz};
        for (int d = 0; d < 3; ++d) {
            for (int g = 0; g < 2; ++g) {
                for (int b = 0; b < 2; ++b) {
                    for (int a = 0; a < 2; ++a) {
                        const index_t src = (bx + a) + (by + b) * sm[0] + (bz + g) * sm[0] * sm[1];
                        m.add(d * nt + i, d * ns + src, wx[a] * wy[b] * wz[g]);
                    }
                }
            }
        }
    }
    m.finalize();
    // The three component blocks are identical; only one block's
    // coefficients (8 per image point) count as distinct stores.
    counters::ops().oracle_stores += static_cast<std::int64_t>(m.entries.size()) / 3;
    return m;
}

SparseMatrix assemble_laplacian(const GridDesc& g) {
    const index_t n = g.count();
    SparseMatrix m;
    m.rows = n;
    m.cols = n;
    static constexpr Dir neg[3] = {Dir::NegX, Dir::NegY, Dir::NegZ};
    static constexpr Dir pos[3] = {Dir::PosX, Dir::PosY, Dir::PosZ};
    for (index_t i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) {
            const double w = 1.0 / (g.h[static_cast<std::size_t>(a)] * g.h[static_cast<std::size_t>(a)]);
            m.add(i, g.neighbor(i, neg[a]), w);
            m.add(i, i, -2.0 * w);
            m.add(i, g.neighbor(i, pos[a]), w);
        }
    }
    m.finalize();
    counters::ops().oracle_stores += static_cast<std::int64_t>(m.entries.size());
    return m;
}

Derivatives::Derivatives(const Volume& ref, const SampledTemplate& sampled,
                         const NgfParams& params, const GridDesc& image_grid,
                         const TransferPlan& plan, const GridDesc& deform_grid)
    : image_grid_(image_grid), deform_grid_(deform_grid) {
    dr_ = assemble_dr(ref, sampled.values, params, image_grid);
    dT_ = assemble_dT(sampled);
    P_ = assemble_P(plan);
    B_ = assemble_laplacian(deform_grid);
    residuals_ = oracle_residuals(ref, sampled.values, params, image_grid);
    traced_bytes_ = dr_.byte_size() + dT_.byte_size() + P_.byte_size() + B_.byte_size() +
                    static_cast<std::int64_t>(residuals_.capacity() * sizeof(double));
    counters::mem().on_alloc(traced_bytes_);
}

Derivatives::~Derivatives() { counters::mem().on_free(traced_bytes_); }

std::vector<double> Derivatives::distance_gradient_image() const {
    const double hbar = image_grid_.cell_volume();
    std::vector<double> dpsi(residuals_.size());
    for (std::size_t i = 0; i < residuals_.size(); ++i) {
        dpsi[i] = -2.0 * hbar * residuals_[i];
    }
    return dT_.multiply_transpose(dr_.multiply_transpose(dpsi));
}

std::vector<double> Derivatives::distance_hvp_image(std::span<const double> p) const {
    auto v = dr_.multiply(dT_.multiply(p));
    auto q = dT_.multiply_transpose(dr_.multiply_transpose(v));
    const double s = 2.0 * image_grid_.cell_volume();
    for (auto& x : q) {
        x *= s;
    }
    return q;
}

namespace {

std::vector<double> curvature_term(const SparseMatrix& B, const GridDesc& g,
                                   std::span<const double> v, double alpha) {
    const index_t n = g.count();
    std::vector<double> out(static_cast<std::size_t>(3 * n), 0.0);
    const double s = alpha * 2.0 * g.cell_volume();
    for (int d = 0; d < 3; ++d) {
        const auto comp = v.subspan(static_cast<std::size_t>(d * n), static_cast<std::size_t>(n));
        auto bb = B.multiply_transpose(B.multiply(comp));
        for (index_t i = 0; i < n; ++i) {
            out[static_cast<std::size_t>(d * n + i)] = s * bb[static_cast<std::size_t>(i)];
        }
    }
    return out;
}

} // namespace

std::vector<double> Derivatives::objective_gradient(std::span<const double> u, double alpha) const {
    auto g = P_.multiply_transpose(distance_gradient_image());
    const auto reg = curvature_term(B_, deform_grid_, u, alpha);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += reg[i];
    }
    return g;
}

std::vector<double> Derivatives::gn_hvp(std::span<const double> p, double alpha) const {
    auto q = P_.multiply_transpose(distance_hvp_image(P_.multiply(p)));
    const auto reg = curvature_term(B_, deform_grid_, p, alpha);
    for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] += reg[i];
    }
    return q;
}

} // namespace mfreg::oracle
