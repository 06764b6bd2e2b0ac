#include "mfreg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "mfreg/parallel.hpp"

namespace mfreg {

double vec_dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("vec_dot: length mismatch");
    }
    return chunked_sum(static_cast<index_t>(a.size()), [&](index_t i) {
        return a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
    });
}

double vec_norm(std::span<const double> a) { return std::sqrt(vec_dot(a, a)); }

double vec_inf_norm(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

Objective::Objective(const Volume& reference, const Volume& tpl, const GridDesc& deform_grid,
                     const NgfParams& params, double alpha)
    : ref_(reference),
      tpl_(tpl),
      image_grid_(reference.grid),
      deform_grid_(deform_grid),
      params_(params),
      alpha_(alpha),
      pre_(make_ngf_precomp(reference, params.rho)),
      plan_(make_transfer_plan(deform_grid, reference.grid)) {
    const std::size_t n3 = static_cast<std::size_t>(3 * image_grid_.count());
    const std::size_t ny = static_cast<std::size_t>(deform_grid_.count());
    yhat_.assign(n3, 0.0);
    dist_grad_.assign(n3, 0.0);
    u_.assign(3 * ny, 0.0);
    reg_grad_.assign(3 * ny, 0.0);
    nodal_scratch_.assign(ny, 0.0);
    php_.assign(n3, 0.0);
    hphp_.assign(n3, 0.0);
}

std::vector<double> Objective::identity() const {
    const index_t n = deform_grid_.count();
    std::vector<double> x(static_cast<std::size_t>(3 * n), 0.0);
    for (index_t i = 0; i < n; ++i) {
        const auto p = deform_grid_.point_coords(i);
        for (int d = 0; d < 3; ++d) {
            x[static_cast<std::size_t>(d * n + i)] = p[static_cast<std::size_t>(d)];
        }
    }
    return x;
}

double Objective::eval(std::span<const double> y, std::span<double> grad) {
    if (y.size() != static_cast<std::size_t>(dof())) {
        throw std::invalid_argument("Objective::eval: y length mismatch");
    }
    transfer_apply(plan_, y, yhat_);
    populate_ngf_workspace(ws_, tpl_, yhat_, pre_, params_, image_grid_);
    last_distance_ = ngf_value(ws_, image_grid_);

    const auto xid = identity();
    for (std::size_t i = 0; i < u_.size(); ++i) {
        u_[i] = y[i] - xid[i];
    }
    last_regularizer_ = alpha_ * curvature_value(u_, deform_grid_);

    if (!grad.empty()) {
        if (grad.size() != y.size()) {
            throw std::invalid_argument("Objective::eval: grad length mismatch");
        }
        ngf_gradient(ws_, pre_, image_grid_, dist_grad_);
        transfer_apply_transpose(plan_, dist_grad_, grad);
        if (alpha_ != 0.0) {
            curvature_gradient(u_, deform_grid_, nodal_scratch_, reg_grad_);
            for (std::size_t i = 0; i < grad.size(); ++i) {
                grad[i] += alpha_ * reg_grad_[i];
            }
        }
    }
    return last_distance_ + last_regularizer_;
}

void Objective::gn_hessian_vec(std::span<const double> p, std::span<double> q) {
    transfer_apply(plan_, p, php_);
    ngf_hessian_vec(php_, ws_, pre_, image_grid_, hphp_);
    transfer_apply_transpose(plan_, hphp_, q);
    if (alpha_ != 0.0) {
        curvature_hessian_vec(p, deform_grid_, nodal_scratch_, reg_grad_);
        for (std::size_t i = 0; i < q.size(); ++i) {
            q[i] += alpha_ * reg_grad_[i];
        }
    }
}

void Objective::seed_hessian_vec(std::span<const double> p, double gamma, std::span<double> q) {
    curvature_hessian_vec(p, deform_grid_, nodal_scratch_, q);
    for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] += gamma * p[i];
    }
}

CgResult cg_solve(const LinearOperator& apply, std::span<const double> b, const CgConfig& cfg) {
    const std::size_t n = b.size();
    CgResult res;
    res.x.assign(n, 0.0);
    const double bnorm = vec_norm(b);
    if (bnorm == 0.0) {
        return res;
    }
    std::vector<double> r(b.begin(), b.end()); // r = b - A*0
    std::vector<double> p(r);
    std::vector<double> ap(n, 0.0);
    double rr = vec_dot(r, r);
    for (int it = 0; it < cfg.max_iters; ++it) {
        apply(p, ap);
        const double pap = vec_dot(p, ap);
        if (!std::isfinite(pap) || pap <= 0.0) {
            res.breakdown = !std::isfinite(pap);
            break;
        }
        const double alpha = rr / pap;
        for (std::size_t i = 0; i < n; ++i) {
            res.x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        ++res.iters;
        const double rr_new = vec_dot(r, r);
        res.relres = std::sqrt(rr_new) / bnorm;
        if (!std::isfinite(rr_new)) {
            res.breakdown = true;
            break;
        }
        if (res.relres <= cfg.rel_tol) {
            break;
        }
        const double beta = rr_new / rr;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    return res;
}

ArmijoResult armijo_search(const std::function<double(double)>& phi, double f0, double gdotd,
                           const ArmijoConfig& cfg, double eta0) {
    ArmijoResult res;
    if (!(gdotd < 0.0)) {
        res.descent = false;
        return res;
    }
    double eta = eta0;
    for (int k = 0; k <= cfg.max_backtracks; ++k) {
        const double f = phi(eta);
        if (std::isfinite(f) && f <= f0 + cfg.c1 * eta * gdotd) {
            res.eta = eta;
            res.accepted = true;
            res.f_new = f;
            return res;
        }
        eta *= cfg.beta;
    }
    return res;
}

namespace {

double effective_gamma(const OptimizerConfig& cfg, double alpha) {
    return cfg.gamma >= 0.0 ? cfg.gamma : 1e-3 * std::max(1.0, alpha);
}

struct StopState {
    double grad0_norm = 0.0;
    double min_hy = 0.0;
};

bool should_stop(const OptimizerConfig& cfg, const StopState& st, double j_prev, double j_cur,
                 double grad_norm, double step_inf) {
    if (grad_norm <= cfg.tol_grad * st.grad0_norm) {
        return true;
    }
    if (std::abs(j_prev - j_cur) <= cfg.tol_rel_j * std::max(1.0, std::abs(j_prev))) {
        return true;
    }
    if (step_inf <= cfg.tol_step * st.min_hy) {
        return true;
    }
    return false;
}

template <typename DirectionFn>
MinimizeResult descent_loop(Problem& obj, std::span<const double> y0, const OptimizerConfig& cfg,
                            DirectionFn&& direction) {
    MinimizeResult out;
    out.y.assign(y0.begin(), y0.end());
    const std::size_t n = out.y.size();
    std::vector<double> grad(n, 0.0);
    std::vector<double> dir(n, 0.0);
    std::vector<double> y_trial(n, 0.0);

    if (cfg.max_iters <= 0) {
        return out;
    }

    double j = obj.eval(out.y, grad);
    StopState st;
    st.grad0_norm = vec_norm(grad);
    st.min_hy = obj.min_spacing();

    for (int it = 0; it < cfg.max_iters; ++it) {
        IterationRecord rec;
        rec.iter = it;
        rec.j = j;
        rec.distance = obj.last_distance();
        rec.regularizer = obj.last_regularizer();
        rec.grad_norm = vec_norm(grad);

        if (rec.grad_norm <= cfg.tol_grad * st.grad0_norm) {
            out.trace.push_back(rec);
            break;
        }

        rec.cg_iters = direction(it, grad, dir);
        const double gdotd = vec_dot(grad, dir);

        const double dinf = vec_inf_norm(dir);
        const double eta0 = dinf > 0.0 ? std::min(1.0, obj.min_spacing() / dinf) : 1.0;
        const auto line = armijo_search(
            [&](double eta) {
                for (std::size_t i = 0; i < n; ++i) {
                    y_trial[i] = out.y[i] + eta * dir[i];
                }
                return obj.eval(y_trial, {});
            },
            j, gdotd, cfg.armijo, eta0);
        if (!line.accepted) {
            out.line_search_failed = true;
            out.trace.push_back(rec);
            break;
        }
        rec.step = line.eta;
        const double j_prev = j;
        for (std::size_t i = 0; i < n; ++i) {
            out.y[i] += line.eta * dir[i];
        }
        double step_inf = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            step_inf = std::max(step_inf, std::abs(line.eta * dir[i]));
        }
        j = obj.eval(out.y, grad);
        out.trace.push_back(rec);
        if (should_stop(cfg, st, j_prev, j, vec_norm(grad), step_inf)) {
            break;
        }
    }
    return out;
}

} // namespace

MinimizeResult lbfgs_minimize(Problem& obj, std::span<const double> y0,
                              const OptimizerConfig& cfg) {
    const std::size_t n = y0.size();
    const double gamma = effective_gamma(cfg, obj.alpha());

    struct Pair {
        std::vector<double> s;
        std::vector<double> yv;
        double rho;
    };
    std::deque<Pair> history;

    // Two-loop recursion with H0 = Hess(S) + gamma I applied via CG.
    auto direction = [&](std::span<const double> grad, std::span<double> dir) -> int {
        std::vector<double> q(grad.begin(), grad.end());
        std::vector<double> alphas(history.size(), 0.0);
        for (std::size_t k = history.size(); k-- > 0;) {
            const auto& p = history[k];
            alphas[k] = p.rho * vec_dot(p.s, q);
            for (std::size_t i = 0; i < n; ++i) {
                q[i] -= alphas[k] * p.yv[i];
            }
        }
        const auto h0 = cg_solve(
            [&](std::span<const double> v, std::span<double> out) {
                obj.seed_hessian_vec(v, gamma, out);
            },
            q, cfg.h0_cg);
        std::vector<double> r = h0.x;
        for (std::size_t k = 0; k < history.size(); ++k) {
            const auto& p = history[k];
            const double beta = p.rho * vec_dot(p.yv, r);
            for (std::size_t i = 0; i < n; ++i) {
                r[i] += (alphas[k] - beta) * p.s[i];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            dir[i] = -r[i];
        }
        return h0.iters;
    };

    // Wrap descent_loop but feed curvature-pair updates by tracking the
    // iterates through the objective gradient evaluations.
    MinimizeResult out;
    out.y.assign(y0.begin(), y0.end());
    std::vector<double> grad(n, 0.0);
    std::vector<double> dir(n, 0.0);
    std::vector<double> y_trial(n, 0.0);

    if (cfg.max_iters <= 0) {
        return out;
    }

    double j = obj.eval(out.y, grad);
    StopState st;
    st.grad0_norm = vec_norm(grad);
    st.min_hy = obj.min_spacing();

    for (int it = 0; it < cfg.max_iters; ++it) {
        IterationRecord rec;
        rec.iter = it;
        rec.j = j;
        rec.distance = obj.last_distance();
        rec.regularizer = obj.last_regularizer();
        rec.grad_norm = vec_norm(grad);
        if (rec.grad_norm <= cfg.tol_grad * st.grad0_norm) {
            out.trace.push_back(rec);
            break;
        }
        rec.cg_iters = direction(grad, dir);
        const double gdotd = vec_dot(grad, dir);
        const double dinf = vec_inf_norm(dir);
        const double eta0 = dinf > 0.0 ? std::min(1.0, obj.min_spacing() / dinf) : 1.0;
        const auto line = armijo_search(
            [&](double eta) {
                for (std::size_t i = 0; i < n; ++i) {
                    y_trial[i] = out.y[i] + eta * dir[i];
                }
                return obj.eval(y_trial, {});
            },
            j, gdotd, cfg.armijo, eta0);
        if (!line.accepted) {
            out.line_search_failed = true;
            out.trace.push_back(rec);
            break;
        }
        rec.step = line.eta;
        const double j_prev = j;
        std::vector<double> s(n, 0.0);
        double step_inf = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = line.eta * dir[i];
            out.y[i] += s[i];
            step_inf = std::max(step_inf, std::abs(s[i]));
        }
        std::vector<double> grad_new(n, 0.0);
        j = obj.eval(out.y, grad_new);
        // Curvature pair (s, grad_new - grad), skipped when nearly
        // orthogonal.
        std::vector<double> yv(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            yv[i] = grad_new[i] - grad[i];
        }
        const double sy = vec_dot(s, yv);
        if (sy > 1e-10 * vec_norm(s) * vec_norm(yv)) {
            history.push_back({std::move(s), std::move(yv), 1.0 / sy});
            while (static_cast<int>(history.size()) > std::max(1, cfg.lbfgs_history)) {
                history.pop_front();
            }
        }
        grad = std::move(grad_new);
        out.trace.push_back(rec);
        if (should_stop(cfg, st, j_prev, j, vec_norm(grad), step_inf)) {
            break;
        }
    }
    return out;
}

MinimizeResult gauss_newton_minimize(Problem& obj, std::span<const double> y0,
                                     const OptimizerConfig& cfg) {
    const std::size_t n = y0.size();
    return descent_loop(obj, y0, cfg, [&](int /*it*/, std::span<const double> grad,
                                          std::span<double> dir) -> int {
        std::vector<double> b(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            b[i] = -grad[i];
        }
        const auto sol = cg_solve(
            [&](std::span<const double> v, std::span<double> out) { obj.gn_hessian_vec(v, out); },
            b, cfg.cg);
        std::copy(sol.x.begin(), sol.x.end(), dir.begin());
        return sol.iters;
    });
}

} // namespace mfreg
