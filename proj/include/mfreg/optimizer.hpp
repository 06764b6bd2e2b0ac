#ifndef MFREG_OPTIMIZER_HPP
#define MFREG_OPTIMIZER_HPP

#include <algorithm>
#include <functional>
#include <span>
#include <vector>

#include "mfreg/curvature.hpp"
#include "mfreg/grid.hpp"
#include "mfreg/ngf.hpp"
#include "mfreg/transfer.hpp"
#include "mfreg/volume.hpp"

namespace mfreg {

// Deterministic (thread-count independent) vector reductions.
double vec_dot(std::span<const double> a, std::span<const double> b);
double vec_norm(std::span<const double> a);
double vec_inf_norm(std::span<const double> a);

struct IterationRecord {
    int iter = 0;
    double j = 0.0;
    double distance = 0.0;
    double regularizer = 0.0; // alpha * S
    double grad_norm = 0.0;
    double step = 0.0;
    int cg_iters = 0;
};
using IterationTrace = std::vector<IterationRecord>;

// Minimal problem surface the minimizers need: smooth objective with
// gradient, a symmetric PSD curvature operator for Gauss-Newton steps,
// and the L-BFGS seed matrix.
class Problem {
public:
    virtual ~Problem() = default;
    virtual double eval(std::span<const double> y, std::span<double> grad) = 0;
    virtual void gn_hessian_vec(std::span<const double> p, std::span<double> q) = 0;
    virtual void seed_hessian_vec(std::span<const double> p, double gamma, std::span<double> q) = 0;
    // Physical scale for the step-norm stopping rule (min deformation
    // grid spacing for registration objectives).
    virtual double min_spacing() const = 0;
    virtual double alpha() const { return 0.0; }
    virtual double last_distance() const { return 0.0; }
    virtual double last_regularizer() const { return 0.0; }
};

// J(y) = D(y) + alpha * S(y) with the NGF distance mapped through the
// grid transfer. Owns the per-iterate workspace and all evaluation
// buffers; evaluation and operator application reuse them.
class Objective : public Problem {
public:
    Objective(const Volume& reference, const Volume& tpl, const GridDesc& deform_grid,
              const NgfParams& params, double alpha);

    index_t dof() const { return 3 * deform_grid_.count(); }
    const GridDesc& image_grid() const { return image_grid_; }
    const GridDesc& deform_grid() const { return deform_grid_; }
    const TransferPlan& plan() const { return plan_; }
    const NgfWorkspace& workspace() const { return ws_; }
    const NgfPrecomp& precomp() const { return pre_; }
    const NgfParams& params() const { return params_; }
    double alpha() const override { return alpha_; }
    double min_spacing() const override {
        return std::min({deform_grid_.h[0], deform_grid_.h[1], deform_grid_.h[2]});
    }

    // Nodal coordinates x^y (the identity deformation), component-major.
    std::vector<double> identity() const;

    // Evaluates J at y; fills grad if non-empty (length 3*m^y).
    double eval(std::span<const double> y, std::span<double> grad) override;

    double last_distance() const override { return last_distance_; }
    double last_regularizer() const override { return last_regularizer_; }

    // Gauss-Newton operator P^T H_hat P + alpha * Hess(S) at the last
    // evaluated iterate; symmetric PSD.
    void gn_hessian_vec(std::span<const double> p, std::span<double> q) override;

    // (Hess(S) + gamma I) p, the L-BFGS seed matrix H0.
    void seed_hessian_vec(std::span<const double> p, double gamma, std::span<double> q) override;

private:
    const Volume& ref_;
    const Volume& tpl_;
    GridDesc image_grid_;
    GridDesc deform_grid_;
    NgfParams params_;
    double alpha_;
    NgfPrecomp pre_;
    TransferPlan plan_;
    NgfWorkspace ws_;
    double last_distance_ = 0.0;
    double last_regularizer_ = 0.0;
    // persistent evaluation buffers
    std::vector<double> yhat_;       // P y, 3m
    std::vector<double> dist_grad_;  // dD/dP, 3m
    std::vector<double> u_;          // displacement, 3m^y
    std::vector<double> reg_grad_;   // 3m^y
    std::vector<double> nodal_scratch_; // m^y
    std::vector<double> php_;        // P p, 3m
    std::vector<double> hphp_;       // H_hat P p, 3m
};

struct CgConfig {
    int max_iters = 50;
    double rel_tol = 1e-2;
};

struct CgResult {
    std::vector<double> x;
    int iters = 0;
    double relres = 0.0;
    bool breakdown = false; // non-finite values encountered
};

using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

// Conjugate gradients for a symmetric PSD operator, x0 = 0.
CgResult cg_solve(const LinearOperator& apply, std::span<const double> b, const CgConfig& cfg);

struct ArmijoConfig {
    double c1 = 1e-4;
    double beta = 0.5;
    int max_backtracks = 10;
};

struct ArmijoResult {
    double eta = 0.0;
    bool accepted = false;
    bool descent = true; // false: rejected before any evaluation
    double f_new = 0.0;
};

// Backtracking line search on phi(eta) = f(x + eta d); f0 = phi(0) and
// gdotd = <grad f(x), d> are supplied by the caller. eta0 caps the
// first trial step (trust-region-style guard for badly scaled
// directions).
ArmijoResult armijo_search(const std::function<double(double)>& phi, double f0, double gdotd,
                           const ArmijoConfig& cfg, double eta0 = 1.0);

struct OptimizerConfig {
    int max_iters = 20;
    ArmijoConfig armijo{};
    CgConfig cg{50, 1e-2};    // Gauss-Newton inner solve
    CgConfig h0_cg{20, 1e-2}; // L-BFGS seed application
    int lbfgs_history = 5;
    double gamma = -1.0; // < 0: 1e-3 * max(1, alpha)
    double tol_rel_j = 1e-4;
    double tol_grad = 1e-4; // relative to the initial gradient norm
    double tol_step = 1e-3; // relative to min(h^y), infinity norm
};

struct MinimizeResult {
    std::vector<double> y;
    IterationTrace trace;
    bool line_search_failed = false;
};

MinimizeResult lbfgs_minimize(Problem& obj, std::span<const double> y0,
                              const OptimizerConfig& cfg);
MinimizeResult gauss_newton_minimize(Problem& obj, std::span<const double> y0,
                                     const OptimizerConfig& cfg);

} // namespace mfreg

#endif
