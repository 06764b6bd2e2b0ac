#include "mfreg/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfreg/parallel.hpp"

namespace mfreg {

TransferPlan make_transfer_plan(const GridDesc& source, const GridDesc& target) {
    if (source.kind != GridKind::Nodal || target.kind != GridKind::CellCentered) {
        throw std::invalid_argument("transfer plan needs nodal source and cell-centered target");
    }
    source.validate();
    target.validate();
    TransferPlan plan;
    plan.source = source;
    plan.target = target;
    for (int a = 0; a < 3; ++a) {
        const index_t mt = target.m[static_cast<std::size_t>(a)];
        const index_t ms = source.m[static_cast<std::size_t>(a)];
        auto& base = plan.base[static_cast<std::size_t>(a)];
        auto& rem = plan.rem[static_cast<std::size_t>(a)];
        base.resize(static_cast<std::size_t>(mt));
        rem.resize(static_cast<std::size_t>(mt));
        for (index_t k = 0; k < mt; ++k) {
            // Index map derived from equal physical extents:
            // c_l(k) = (k + 0.5) * (m^y_l - 1) / m_l.
            const double c = (static_cast<double>(k) + 0.5) * static_cast<double>(ms - 1) /
                             static_cast<double>(mt);
            index_t b = static_cast<index_t>(std::floor(c));
            b = std::clamp<index_t>(b, 0, ms - 2);
            base[static_cast<std::size_t>(k)] = b;
            rem[static_cast<std::size_t>(k)] = c - static_cast<double>(b);
            if (rem[static_cast<std::size_t>(k)] < 0.0 || rem[static_cast<std::size_t>(k)] > 1.0) {
                throw std::invalid_argument("transfer plan: coverage invariant violated");
            }
        }
    }
    plan.slab_planes.assign(static_cast<std::size_t>(source.m[2] - 1), {});
    for (index_t k = 0; k < target.m[2]; ++k) {
        plan.slab_planes[static_cast<std::size_t>(plan.base[2][static_cast<std::size_t>(k)])]
            .push_back(k);
    }
    return plan;
}

void transfer_apply(const TransferPlan& plan, std::span<const double> y, std::span<double> out) {
    const index_t nt = plan.target.count();
    const index_t ns = plan.source.count();
    if (y.size() != static_cast<std::size_t>(3 * ns) || out.size() != static_cast<std::size_t>(3 * nt)) {
        throw std::invalid_argument("transfer_apply: length mismatch");
    }
    const auto& tm = plan.target.m;
    const auto& sm = plan.source.m;
    parallel_for(nt, [&](index_t lo, index_t hi) {
        for (index_t i = lo; i < hi; ++i) {
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
                const double* yd = y.data() + d * ns;
                double acc = 0.0;
                for (int g = 0; g < 2; ++g) {
                    for (int b = 0; b < 2; ++b) {
                        for (int a = 0; a < 2; ++a) {
                            const index_t src =
                                (bx + a) + (by + b) * sm[0] + (bz + g) * sm[0] * sm[1];
                            acc += wx[a] * wy[b] * wz[g] * yd[src];
                        }
                    }
                }
                out[static_cast<std::size_t>(d * nt + i)] = acc;
            }
        }
        (void)tm;
    });
}

namespace {

// Scatter the contribution of all image planes within one deformation
// z-slab. Only nodal planes bz and bz+1 are written.
void scatter_slab(const TransferPlan& plan, std::span<const double> w, std::span<double> out,
                  index_t slab) {
    const index_t nt = plan.target.count();
    const index_t ns = plan.source.count();
    const auto& tm = plan.target.m;
    const auto& sm = plan.source.m;
    for (index_t kz : plan.slab_planes[static_cast<std::size_t>(slab)]) {
        const index_t bz = plan.base[2][static_cast<std::size_t>(kz)];
        const double rz = plan.rem[2][static_cast<std::size_t>(kz)];
        const double wzv[2] = {1.0 - rz, rz};
        for (index_t ky = 0; ky < tm[1]; ++ky) {
            const index_t by = plan.base[1][static_cast<std::size_t>(ky)];
            const double ry = plan.rem[1][static_cast<std::size_t>(ky)];
            const double wyv[2] = {1.0 - ry, ry};
            for (index_t kx = 0; kx < tm[0]; ++kx) {
                const index_t bx = plan.base[0][static_cast<std::size_t>(kx)];
                const double rx = plan.rem[0][static_cast<std::size_t>(kx)];
                const double wxv[2] = {1.0 - rx, rx};
                const index_t ti = kx + ky * tm[0] + kz * tm[0] * tm[1];
                for (int d = 0; d < 3; ++d) {
                    const double v = w[static_cast<std::size_t>(d * nt + ti)];
                    double* od = out.data() + d * ns;
                    for (int g = 0; g < 2; ++g) {
                        for (int b = 0; b < 2; ++b) {
                            for (int a = 0; a < 2; ++a) {
                                const index_t dst =
                                    (bx + a) + (by + b) * sm[0] + (bz + g) * sm[0] * sm[1];
                                od[dst] += wxv[a] * wyv[b] * wzv[g] * v;
                            }
                        }
                    }
                }
            }
        }
    }
}

} // namespace

void transfer_apply_transpose(const TransferPlan& plan, std::span<const double> w,
                              std::span<double> out) {
    const index_t nt = plan.target.count();
    const index_t ns = plan.source.count();
    if (w.size() != static_cast<std::size_t>(3 * nt) || out.size() != static_cast<std::size_t>(3 * ns)) {
        throw std::invalid_argument("transfer_apply_transpose: length mismatch");
    }
    std::fill(out.begin(), out.end(), 0.0);
    const index_t nslabs = static_cast<index_t>(plan.slab_planes.size());
    // Odd slabs first, then even: concurrent writers never share a node.
    for (int phase = 0; phase < 2; ++phase) {
        const index_t first = (phase == 0) ? 1 : 0;
        const index_t count = (nslabs - first + 1) / 2;
        parallel_for(count, [&](index_t lo, index_t hi) {
            for (index_t s = lo; s < hi; ++s) {
                scatter_slab(plan, w, out, first + 2 * s);
            }
        });
    }
}

} // namespace mfreg
