#include "mfreg/ngf.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mfreg/counters.hpp"
#include "mfreg/parallel.hpp"

namespace mfreg {

namespace {

// Linear-index offset of a direction: M = {-mx*my, -mx, -1, 0, 1, mx, mx*my}.
inline index_t dir_offset(Dir d, const GridDesc& g) {
    switch (d) {
    case Dir::NegZ: return -g.m[0] * g.m[1];
    case Dir::NegY: return -g.m[0];
    case Dir::NegX: return -1;
    case Dir::Center: return 0;
    case Dir::PosX: return 1;
    case Dir::PosY: return g.m[0];
    case Dir::PosZ: return g.m[0] * g.m[1];
    }
    return 0;
}

struct HHat {
    std::array<double, 3> v;
    explicit HHat(const GridDesc& g)
        : v{1.0 / (2.0 * g.h[0] * g.h[0]), 1.0 / (2.0 * g.h[1] * g.h[1]),
            1.0 / (2.0 * g.h[2] * g.h[2])} {}
};

// rho_i(k) for k != 0. The image differences are recovered from the
// stored forward/backward gradients, so clamped boundary terms are
// exactly zero.
inline double rho_dir(index_t i, Dir k, const NgfWorkspace& ws, const NgfPrecomp& pre,
                      const GridDesc& g) {
    const int a = dir_axis(k);
    const int sgn = dir_sign(k);
    const std::size_t comp = static_cast<std::size_t>(sgn > 0 ? a + 3 : a);
    const double h = g.h[static_cast<std::size_t>(a)];
    const std::size_t ii = static_cast<std::size_t>(i);
    const double dR = sgn * h * pre.ref_grads[ii][comp];
    const double dT = sgn * h * ws.tpl_grads[ii][comp];
    return dR * ws.inv1[ii] - dT * ws.inv2[ii];
}

inline double rho_hat(index_t i, Dir k, const NgfWorkspace& ws, const NgfPrecomp& pre,
                      const GridDesc& g, const HHat& hh) {
    if (k == Dir::Center) {
        double s = 0.0;
        for (Dir d : kAllDirs) {
            if (d == Dir::Center) {
                continue;
            }
            s -= hh.v[static_cast<std::size_t>(dir_axis(d))] * rho_dir(i, d, ws, pre, g);
        }
        return s;
    }
    return hh.v[static_cast<std::size_t>(dir_axis(k))] * rho_dir(i, k, ws, pre, g);
}

template <bool Counted>
void gradient_impl(const NgfWorkspace& ws, const NgfPrecomp& pre, const GridDesc& g,
                   std::span<double> out) {
    const index_t n = g.count();
    if (out.size() != static_cast<std::size_t>(3 * n)) {
        throw std::invalid_argument("ngf_gradient: output length must be 3*m");
    }
    const HHat hh(g);
    const double scale = -2.0 * g.cell_volume();
    double* ox = out.data();
    double* oy = ox + n;
    double* oz = oy + n;
    parallel_for(n, [&](index_t lo, index_t hi) {
        std::int64_t deriv_loads = 0;
        for (index_t i = lo; i < hi; ++i) {
            double acc = 0.0;
            for (Dir k : kAllDirs) {
                const index_t j = i + dir_offset(k, g);
                if (j < 0 || j >= n) {
                    continue;
                }
                acc += ws.residual[static_cast<std::size_t>(j)] *
                       rho_hat(j, dir_opposite(k), ws, pre, g, hh);
            }
            const double s = scale * acc;
            const std::size_t ii = static_cast<std::size_t>(i);
            ox[i] = s * ws.sampled.partials[0][ii];
            oy[i] = s * ws.sampled.partials[1][ii];
            oz[i] = s * ws.sampled.partials[2][ii];
            if constexpr (Counted) {
                ++deriv_loads;
            }
        }
        if constexpr (Counted) {
            counters::ops().image_deriv_loads += deriv_loads;
        }
    });
}

template <bool Counted>
void hessian_vec_impl(std::span<const double> p, const NgfWorkspace& ws, const NgfPrecomp& pre,
                      const GridDesc& g, const OffsetTable& table, std::span<double> out) {
    const index_t n = g.count();
    if (p.size() != static_cast<std::size_t>(3 * n) || out.size() != p.size()) {
        throw std::invalid_argument("ngf_hessian_vec: vector length must be 3*m");
    }
    const HHat hh(g);
    const double scale = 2.0 * g.cell_volume(); // sign inverted: PSD operator
    const double* px = p.data();
    const double* py = px + n;
    const double* pz = py + n;
    double* ox = out.data();
    double* oy = ox + n;
    double* oz = oy + n;
    parallel_for(n, [&](index_t lo, index_t hi) {
        std::int64_t rho_evals = 0;
        std::int64_t deriv_loads = 0;
        for (index_t i = lo; i < hi; ++i) {
            double qx = 0.0, qy = 0.0, qz = 0.0;
            for (const auto& entry : table.entries) {
                const index_t ti = i + entry.kappa;
                if constexpr (Counted) {
                    ++deriv_loads;
                    rho_evals += 2 * static_cast<std::int64_t>(entry.pairs.size());
                }
                if (ti < 0 || ti >= n) {
                    continue;
                }
                // (dr^T dr)_{i, i+kappa}: inner products over shared rows
                // t = i + mu(b) = ti + mu(a).
                double drdr = 0.0;
                for (const auto& [da, db] : entry.pairs) {
                    const index_t t = i + dir_offset(db, g);
                    if (t < 0 || t >= n) {
                        continue;
                    }
                    drdr += rho_hat(t, dir_opposite(da), ws, pre, g, hh) *
                            rho_hat(t, dir_opposite(db), ws, pre, g, hh);
                }
                const std::size_t tt = static_cast<std::size_t>(ti);
                const double s = ws.sampled.partials[0][tt] * px[ti] +
                                 ws.sampled.partials[1][tt] * py[ti] +
                                 ws.sampled.partials[2][tt] * pz[ti];
                const double c = drdr * s;
                qx += c * ws.sampled.partials[0][static_cast<std::size_t>(i)];
                qy += c * ws.sampled.partials[1][static_cast<std::size_t>(i)];
                qz += c * ws.sampled.partials[2][static_cast<std::size_t>(i)];
            }
            ox[i] = scale * qx;
            oy[i] = scale * qy;
            oz[i] = scale * qz;
        }
        if constexpr (Counted) {
            counters::ops().rho_evals += rho_evals;
            counters::ops().image_deriv_loads += deriv_loads;
        }
    });
}

} // namespace

NgfPrecomp make_ngf_precomp(const Volume& reference, double rho) {
    if (!(rho > 0.0)) {
        throw std::invalid_argument("NGF: rho must be > 0");
    }
    const index_t n = reference.grid.count();
    NgfPrecomp pre;
    pre.ref_grads.resize(static_cast<std::size_t>(n));
    pre.ref_norms.resize(static_cast<std::size_t>(n));
    parallel_for(n, [&](index_t lo, index_t hi) {
        for (index_t i = lo; i < hi; ++i) {
            const auto gr = discrete_gradient(reference, i);
            pre.ref_grads[static_cast<std::size_t>(i)] = gr;
            pre.ref_norms[static_cast<std::size_t>(i)] = eps_norm(gr, rho);
        }
    });
    return pre;
}

void populate_ngf_workspace(NgfWorkspace& ws, const Volume& tpl, std::span<const double> points,
                            const NgfPrecomp& pre, const NgfParams& params, const GridDesc& g) {
    if (!(params.tau > 0.0) || !(params.rho > 0.0)) {
        throw std::invalid_argument("NGF: tau and rho must be > 0");
    }
    const index_t n = g.count();
    sample_deformed(tpl, points, ws.sampled);
    ws.tpl_grads.resize(static_cast<std::size_t>(n));
    ws.residual.resize(static_cast<std::size_t>(n));
    ws.inv1.resize(static_cast<std::size_t>(n));
    ws.inv2.resize(static_cast<std::size_t>(n));
    const double taurho = params.tau * params.rho;
    parallel_for(n, [&](index_t lo, index_t hi) {
        for (index_t i = lo; i < hi; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            const auto gt = discrete_gradient(ws.sampled.values, g, i);
            ws.tpl_grads[ii] = gt;
            const double tn = eps_norm(gt, params.tau);
            const double rn = pre.ref_norms[ii];
            double num = taurho;
            for (int c = 0; c < 6; ++c) {
                num += 0.5 * gt[static_cast<std::size_t>(c)] *
                       pre.ref_grads[ii][static_cast<std::size_t>(c)];
            }
            ws.inv1[ii] = 1.0 / (tn * rn);
            ws.inv2[ii] = num / (tn * tn * tn * rn);
            ws.residual[ii] = num * ws.inv1[ii];
        }
    });
}

double ngf_residual(index_t i, const NgfWorkspace& ws) {
    return ws.residual[static_cast<std::size_t>(i)];
}

double ngf_rho(index_t i, Dir k, const NgfWorkspace& ws, const NgfPrecomp& pre, const GridDesc& g) {
    const HHat hh(g);
    return rho_hat(i, k, ws, pre, g, hh);
}

double ngf_value(const NgfWorkspace& ws, const GridDesc& g) {
    const double hbar = g.cell_volume();
    return hbar * chunked_sum(g.count(), [&](index_t i) {
               const double r = ws.residual[static_cast<std::size_t>(i)];
               return 1.0 - r * r;
           });
}

void ngf_gradient(const NgfWorkspace& ws, const NgfPrecomp& pre, const GridDesc& g,
                  std::span<double> out) {
    gradient_impl<false>(ws, pre, g, out);
}

void ngf_gradient_counted(const NgfWorkspace& ws, const NgfPrecomp& pre, const GridDesc& g,
                          std::span<double> out) {
    gradient_impl<true>(ws, pre, g, out);
}

namespace {
std::int64_t table_bytes(const OffsetTable& t) {
    std::int64_t b = static_cast<std::int64_t>(t.entries.capacity() * sizeof(OffsetTable::Entry));
    for (const auto& e : t.entries) {
        b += static_cast<std::int64_t>(e.pairs.capacity() * sizeof(std::pair<Dir, Dir>));
    }
    return b;
}
} // namespace

void ngf_hessian_vec(std::span<const double> p, const NgfWorkspace& ws, const NgfPrecomp& pre,
                     const GridDesc& g, std::span<double> out) {
    const OffsetTable table = make_offset_table(g);
    counters::ScratchNote note(table_bytes(table));
    hessian_vec_impl<false>(p, ws, pre, g, table, out);
}

void ngf_hessian_vec_counted(std::span<const double> p, const NgfWorkspace& ws,
                             const NgfPrecomp& pre, const GridDesc& g, std::span<double> out) {
    const OffsetTable table = make_offset_table(g);
    counters::ScratchNote note(table_bytes(table));
    hessian_vec_impl<true>(p, ws, pre, g, table, out);
}

OffsetTable make_offset_table(const GridDesc& g) {
    // Brute-force pairwise differences of M; collisions for degenerate
    // grid sizes merge naturally.
    std::map<index_t, std::vector<std::pair<Dir, Dir>>> groups;
    for (Dir da : kAllDirs) {
        for (Dir db : kAllDirs) {
            const index_t kappa = dir_offset(db, g) - dir_offset(da, g);
            groups[kappa].emplace_back(da, db);
        }
    }
    OffsetTable table;
    for (auto& [kappa, pairs] : groups) {
        table.entries.push_back({kappa, std::move(pairs)});
    }
    if (table.entries.size() == 25) {
        // Cross-check against the closed-form offset list.
        const index_t m1 = g.m[0];
        const index_t m12 = g.m[0] * g.m[1];
        const index_t expected[25] = {-2 * m12,     -m12 - m1, -m12 - 1, -m12,     -m12 + 1,
                                      -m12 + m1,    -2 * m1,   -m1 - 1,  -m1,      -m1 + 1,
                                      -2,           -1,        0,        1,        2,
                                      m1 - 1,       m1,        m1 + 1,   2 * m1,   m12 - m1,
                                      m12 - 1,      m12,       m12 + 1,  m12 + m1, 2 * m12};
        std::array<index_t, 25> sorted{};
        std::copy(expected, expected + 25, sorted.begin());
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < 25; ++i) {
            if (table.entries[i].kappa != sorted[i]) {
                throw std::logic_error("offset table mismatch against closed-form list");
            }
        }
    }
    return table;
}

} // namespace mfreg
