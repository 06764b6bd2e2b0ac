#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfreg/counters.hpp"
#include "mfreg/io.hpp"
#include "mfreg/multilevel.hpp"
#include "mfreg/optimizer.hpp"
#include "mfreg/oracle.hpp"
#include "mfreg/parallel.hpp"
#include "mfreg/synthetic.hpp"

using namespace mfreg;

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

int cmd_register(const std::string& fixed_path, const std::string& moving_path,
                 const std::string& out_def, const std::string& out_warped, double alpha,
                 double tau, double edge_rho, int levels, index_t ratio,
                 const std::string& optimizer, int max_iters) {
    const Volume fixed = io::read_volume(fixed_path);
    const Volume moving = io::read_volume(moving_path);

    MultilevelConfig cfg;
    cfg.levels = levels;
    cfg.deform_ratio = ratio;
    cfg.ngf = {tau, edge_rho};
    cfg.alpha = alpha;
    cfg.method = optimizer == "gn" ? Method::GaussNewton : Method::Lbfgs;
    cfg.opt.max_iters = max_iters;

    counters::mem().reset();
    const double t0 = now_seconds();
    const auto res = register_multilevel(fixed, moving, cfg);
    const double elapsed = now_seconds() - t0;

    std::printf("command: register\n");
    std::printf("fixed: %s\n", fixed_path.c_str());
    std::printf("moving: %s\n", moving_path.c_str());
    std::printf("alpha: %g\n", alpha);
    std::printf("tau: %g\n", tau);
    std::printf("edge-rho: %g\n", edge_rho);
    std::printf("levels: %d\n", levels);
    std::printf("optimizer: %s\n", cfg.method == Method::Lbfgs ? "lbfgs" : "gn");
    for (std::size_t l = 0; l < res.levels.size(); ++l) {
        const auto& lv = res.levels[l];
        std::printf("level.%zu.image-size: %lld %lld %lld\n", l,
                    static_cast<long long>(lv.image_grid.m[0]),
                    static_cast<long long>(lv.image_grid.m[1]),
                    static_cast<long long>(lv.image_grid.m[2]));
        std::printf("level.%zu.deform-size: %lld %lld %lld\n", l,
                    static_cast<long long>(lv.deform_grid.m[0]),
                    static_cast<long long>(lv.deform_grid.m[1]),
                    static_cast<long long>(lv.deform_grid.m[2]));
        std::printf("level.%zu.iterations: %zu\n", l, lv.result.trace.size());
        for (const auto& it : lv.result.trace) {
            std::printf("level.%zu.iter.%d: J=%.10e D=%.10e aS=%.10e grad=%.4e step=%.3g cg=%d\n",
                        l, it.iter, it.j, it.distance, it.regularizer, it.grad_norm, it.step,
                        it.cg_iters);
        }
    }

    // Final displacement magnitude summary.
    const index_t n = res.deform_grid.count();
    double max_disp = 0.0, mean_disp = 0.0;
    for (index_t i = 0; i < n; ++i) {
        const auto p = res.deform_grid.point_coords(i);
        double d2 = 0.0;
        for (int d = 0; d < 3; ++d) {
            const double u = res.y[static_cast<std::size_t>(d * n + i)] -
                             p[static_cast<std::size_t>(d)];
            d2 += u * u;
        }
        max_disp = std::max(max_disp, std::sqrt(d2));
        mean_disp += std::sqrt(d2);
    }
    mean_disp /= static_cast<double>(n);
    std::printf("final.max-displacement: %.6e\n", max_disp);
    std::printf("final.mean-displacement: %.6e\n", mean_disp);
    std::printf("runtime-seconds: %.3f\n", elapsed);
    std::printf("peak-derivative-buffer-bytes: %lld\n",
                static_cast<long long>(counters::mem().peak.load()));

    io::write_deformation(out_def, res.y, res.deform_grid);
    std::printf("wrote-deformation: %s\n", out_def.c_str());

    if (!out_warped.empty()) {
        const auto plan = make_transfer_plan(res.deform_grid, fixed.grid);
        std::vector<double> pts(static_cast<std::size_t>(3 * fixed.grid.count()));
        transfer_apply(plan, res.y, pts);
        SampledTemplate st;
        sample_deformed(moving, pts, st);
        Volume warped;
        warped.grid = fixed.grid;
        warped.data = std::move(st.values);
        io::write_volume(out_warped, warped);
        std::printf("wrote-warped: %s\n", out_warped.c_str());
    }
    return 0;
}

int cmd_warp(const std::string& input_path, const std::string& def_path,
             const std::string& out_path) {
    const Volume input = io::read_volume(input_path);
    const GridDesc dg = io::read_deformation_grid(def_path);
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dg.extent(a) - input.grid.extent(a)) > 1e-9 * input.grid.extent(a)) {
            throw std::runtime_error("deformation extent does not match the input volume");
        }
    }
    const auto y = io::read_deformation(def_path, dg);
    const auto plan = make_transfer_plan(dg, input.grid);
    std::vector<double> pts(static_cast<std::size_t>(3 * input.grid.count()));
    transfer_apply(plan, y, pts);
    SampledTemplate st;
    sample_deformed(input, pts, st);
    Volume out;
    out.grid = input.grid;
    out.data = std::move(st.values);
    io::write_volume(out_path, out);
    std::printf("command: warp\nwrote: %s\n", out_path.c_str());
    return 0;
}

int cmd_eval_landmarks(const std::string& fixed_lm, const std::string& moving_lm,
                       const std::string& def_path, const std::vector<double>& spacing) {
    const std::array<double, 3> sp{spacing[0], spacing[1], spacing[2]};
    const auto fixed = io::read_landmarks(fixed_lm, sp);
    const auto moving = io::read_landmarks(moving_lm, sp);
    const GridDesc dg = io::read_deformation_grid(def_path);
    const auto y = io::read_deformation(def_path, dg);

    std::vector<double> identity(y.size());
    const index_t n = dg.count();
    for (index_t i = 0; i < n; ++i) {
        const auto p = dg.point_coords(i);
        for (int d = 0; d < 3; ++d) {
            identity[static_cast<std::size_t>(d * n + i)] = p[static_cast<std::size_t>(d)];
        }
    }
    const auto before = io::landmark_error(fixed, moving, identity, dg);
    const auto after = io::landmark_error(fixed, moving, y, dg);
    std::printf("command: eval-landmarks\n");
    std::printf("landmarks: %zu\n", before.count);
    std::printf("error-before: %.6f +- %.6f\n", before.mean, before.stddev);
    std::printf("error-after: %.6f +- %.6f\n", after.mean, after.stddev);
    return 0;
}

struct SelftestState {
    int failures = 0;

    void check(const char* name, bool ok) {
        std::printf("selftest.%s: %s\n", name, ok ? "pass" : "FAIL");
        if (!ok) {
            ++failures;
        }
    }
};

int cmd_selftest(std::uint64_t seed, bool quick) {
    SelftestState st;
    const std::array<index_t, 3> m{6, 6, 6};
    const std::array<index_t, 3> my{4, 4, 4};
    const Volume ref = synthetic::make_random_volume(m, {1.0, 1.0, 1.0}, seed, 1);
    const Volume tpl = synthetic::make_random_volume(m, {1.0, 1.0, 1.0}, seed + 1, 1);
    const GridDesc dg = make_deform_grid(ref.grid, my);
    const NgfParams params{1.0, 1.0};
    const double alpha = 1.0;

    Objective obj(ref, tpl, dg, params, alpha);
    std::mt19937_64 rng(seed + 2);
    std::uniform_real_distribution<double> d(-0.3, 0.3);
    auto y = obj.identity();
    for (auto& x : y) {
        x += d(rng);
    }
    std::vector<double> grad(y.size());
    obj.eval(y, grad);

    // Oracle equivalence of the full derivative chain.
    const auto plan = make_transfer_plan(dg, ref.grid);
    std::vector<double> yhat(static_cast<std::size_t>(3 * ref.grid.count()));
    transfer_apply(plan, y, yhat);
    SampledTemplate sampled;
    sample_deformed(tpl, yhat, sampled);
    oracle::Derivatives der(ref, sampled, params, ref.grid, plan, dg);

    const auto xid = obj.identity();
    std::vector<double> u(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        u[i] = y[i] - xid[i];
    }
    const auto grad_o = der.objective_gradient(u, alpha);
    double scale = 1.0, md = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        scale = std::max(scale, std::abs(grad_o[i]));
        md = std::max(md, std::abs(grad[i] - grad_o[i]));
    }
    st.check("oracle-gradient", md <= 1e-12 * scale);

    std::vector<double> p(y.size()), q(y.size()), hq(y.size());
    for (auto& x : p) {
        x = d(rng);
    }
    obj.gn_hessian_vec(p, q);
    const auto q_o = der.gn_hvp(p, alpha);
    scale = 1.0;
    md = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        scale = std::max(scale, std::abs(q_o[i]));
        md = std::max(md, std::abs(q[i] - q_o[i]));
    }
    st.check("oracle-hvp", md <= 1e-12 * scale);

    // Adjointness of the grid transfer.
    {
        std::vector<double> w(yhat.size());
        for (auto& x : w) {
            x = d(rng);
        }
        std::vector<double> py(w.size()), ptw(y.size());
        transfer_apply(plan, y, py);
        transfer_apply_transpose(plan, w, ptw);
        const double a = vec_dot(py, w);
        const double b = vec_dot(y, ptw);
        st.check("transfer-adjoint", std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }

    // PSD and symmetry of the Gauss-Newton operator.
    {
        bool sym = true, psd = true;
        const int reps = quick ? 3 : 10;
        std::vector<double> r(y.size());
        for (int t = 0; t < reps; ++t) {
            for (auto& x : p) {
                x = d(rng);
            }
            for (auto& x : r) {
                x = d(rng);
            }
            obj.gn_hessian_vec(p, q);
            obj.gn_hessian_vec(r, hq);
            const double a = vec_dot(q, r);
            const double b = vec_dot(p, hq);
            sym = sym && std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
            psd = psd && vec_dot(q, p) >= -1e-10 * vec_dot(p, p);
        }
        st.check("gn-symmetry", sym);
        st.check("gn-psd", psd);
    }

    // Finite-difference consistency of the objective gradient.
    if (!quick) {
        obj.eval(y, grad);
        bool ok = true;
        auto yt = y;
        for (int t = 0; t < 5; ++t) {
            std::vector<double> v(y.size());
            for (auto& x : v) {
                x = d(rng);
            }
            const double gv = vec_dot(grad, v);
            double best = 1e9;
            for (double eps : {1e-4, 1e-5, 1e-6}) {
                for (std::size_t i = 0; i < v.size(); ++i) {
                    yt[i] = y[i] + eps * v[i];
                }
                const double fp = obj.eval(yt, {});
                for (std::size_t i = 0; i < v.size(); ++i) {
                    yt[i] = y[i] - eps * v[i];
                }
                const double fm = obj.eval(yt, {});
                best = std::min(best,
                                std::abs((fp - fm) / (2.0 * eps) - gv) /
                                    std::max(1e-12, std::abs(gv)));
            }
            ok = ok && best <= 1e-6;
        }
        st.check("gradient-fd", ok);
    }

    std::printf("selftest.failures: %d\n", st.failures);
    return st.failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deformable 3D image registration (NGF + curvature, matrix-free kernels)"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "worker thread cap (0 = hardware)");

    auto* reg = app.add_subcommand("register", "register a moving volume onto a fixed volume");
    std::string fixed_path, moving_path, out_def, out_warped;
    double alpha = 1.0, tau = 10.0, edge_rho = 10.0;
    int levels = 3, max_iters = 20;
    index_t ratio = 4;
    std::string optimizer = "lbfgs";
    reg->add_option("--fixed", fixed_path, "fixed (reference) volume")->required();
    reg->add_option("--moving", moving_path, "moving (template) volume")->required();
    reg->add_option("--out-deformation", out_def, "output deformation field")->required();
    reg->add_option("--out-warped", out_warped, "optional warped moving volume");
    reg->add_option("--alpha", alpha, "regularizer weight");
    reg->add_option("--tau", tau, "template edge parameter");
    reg->add_option("--edge-rho", edge_rho, "reference edge parameter");
    reg->add_option("--levels", levels, "pyramid levels");
    reg->add_option("--deform-ratio", ratio, "deformation grid coarsening ratio");
    reg->add_option("--optimizer", optimizer, "lbfgs or gn")
        ->check(CLI::IsMember({"lbfgs", "gn"}));
    reg->add_option("--max-iters", max_iters, "iterations per level");

    auto* warp = app.add_subcommand("warp", "apply a stored deformation to a volume");
    std::string warp_in, warp_def, warp_out;
    warp->add_option("--input", warp_in, "input volume")->required();
    warp->add_option("--deformation", warp_def, "deformation field")->required();
    warp->add_option("--out", warp_out, "output volume")->required();

    auto* ev = app.add_subcommand("eval-landmarks", "landmark error before/after registration");
    std::string lm_fixed, lm_moving, lm_def;
    std::vector<double> lm_spacing{1.0, 1.0, 1.0};
    ev->add_option("--fixed-landmarks", lm_fixed, "fixed landmark file")->required();
    ev->add_option("--moving-landmarks", lm_moving, "moving landmark file")->required();
    ev->add_option("--deformation", lm_def, "deformation field")->required();
    ev->add_option("--spacing", lm_spacing, "voxel spacing for landmark files")->expected(3);

    auto* self = app.add_subcommand("selftest", "run built-in derivative verification suites");
    std::uint64_t seed = 1234;
    bool quick = false;
    self->add_option("--seed", seed, "synthetic data seed");
    self->add_flag("--quick", quick, "subset of suites");

    CLI11_PARSE(app, argc, argv);
    set_thread_count(threads);

    try {
        if (app.got_subcommand(reg)) {
            return cmd_register(fixed_path, moving_path, out_def, out_warped, alpha, tau,
                                edge_rho, levels, ratio, optimizer, max_iters);
        }
        if (app.got_subcommand(warp)) {
            return cmd_warp(warp_in, warp_def, warp_out);
        }
        if (app.got_subcommand(ev)) {
            return cmd_eval_landmarks(lm_fixed, lm_moving, lm_def, lm_spacing);
        }
        if (app.got_subcommand(self)) {
            return cmd_selftest(seed, quick);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
