#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfreg/counters.hpp"
#include "mfreg/multilevel.hpp"
#include "mfreg/ngf.hpp"
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

template <typename Fn>
double median_time(int repeats, Fn&& fn) {
    std::vector<double> t;
    t.reserve(static_cast<std::size_t>(repeats));
    for (int i = 0; i < repeats; ++i) {
        const double t0 = now_seconds();
        fn();
        t.push_back(now_seconds() - t0);
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
}

struct BenchCase {
    Volume ref;
    Volume tpl;
    GridDesc dg;
    TransferPlan plan;
    NgfParams params{10.0, 10.0};
    NgfPrecomp pre;
    NgfWorkspace ws;
    std::vector<double> y;
    std::vector<double> yhat;
};

BenchCase make_case(index_t size, index_t ratio, std::uint64_t seed) {
    BenchCase c;
    const std::array<index_t, 3> m{size, size, size};
    c.ref = synthetic::make_phantom(m, {1.0, 1.0, 1.0});
    const auto w = synthetic::make_sinusoid_warp(
        {static_cast<double>(size), static_cast<double>(size), static_cast<double>(size)}, 2.0,
        seed);
    c.tpl = synthetic::warp_with(c.ref, w);
    c.dg = deformation_grid_for(c.ref.grid, ratio);
    c.plan = make_transfer_plan(c.dg, c.ref.grid);
    c.pre = make_ngf_precomp(c.ref, c.params.rho);

    const index_t ny = c.dg.count();
    c.y.resize(static_cast<std::size_t>(3 * ny));
    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> d(-0.3, 0.3);
    for (index_t i = 0; i < ny; ++i) {
        const auto p = c.dg.point_coords(i);
        for (int a = 0; a < 3; ++a) {
            c.y[static_cast<std::size_t>(a * ny + i)] = p[static_cast<std::size_t>(a)] + d(rng);
        }
    }
    c.yhat.resize(static_cast<std::size_t>(3 * c.ref.grid.count()));
    transfer_apply(c.plan, c.y, c.yhat);
    populate_ngf_workspace(c.ws, c.tpl, c.yhat, c.pre, c.params, c.ref.grid);
    return c;
}

// Rough oracle assembly footprint: entry triplets for dr, dT, P, B.
std::int64_t oracle_bytes_estimate(index_t m3, index_t my3) {
    const std::int64_t entry = static_cast<std::int64_t>(sizeof(oracle::SparseMatrix::Entry));
    return (7 * m3 + 3 * m3 + 24 * m3 + 7 * my3) * entry;
}

void bench_kernels(const std::vector<index_t>& sizes, index_t ratio, int repeats,
                   std::int64_t budget) {
    std::printf("# kernels (median of %d, seconds)\n", repeats);
    std::printf("size\tdeform\tvalue\tgradient\thvp\tcurv_grad\tcurv_hvp\tapply\tapply_t\t"
                "oracle_grad\toracle_hvp\n");
    for (index_t size : sizes) {
        BenchCase c = make_case(size, ratio, 7);
        const index_t n3 = 3 * c.ref.grid.count();
        const index_t ny3 = 3 * c.dg.count();
        std::vector<double> img_buf(static_cast<std::size_t>(n3));
        std::vector<double> img_p(static_cast<std::size_t>(n3), 0.5);
        std::vector<double> nod_buf(static_cast<std::size_t>(ny3));
        std::vector<double> nod_scratch(static_cast<std::size_t>(c.dg.count()));
        std::vector<double> u(static_cast<std::size_t>(ny3), 0.1);

        const double t_value = median_time(repeats, [&] { ngf_value(c.ws, c.ref.grid); });
        const double t_grad =
            median_time(repeats, [&] { ngf_gradient(c.ws, c.pre, c.ref.grid, img_buf); });
        const double t_hvp = median_time(
            repeats, [&] { ngf_hessian_vec(img_p, c.ws, c.pre, c.ref.grid, img_buf); });
        const double t_cgrad = median_time(
            repeats, [&] { curvature_gradient(u, c.dg, nod_scratch, nod_buf); });
        const double t_chvp = median_time(
            repeats, [&] { curvature_hessian_vec(u, c.dg, nod_scratch, nod_buf); });
        const double t_apply =
            median_time(repeats, [&] { transfer_apply(c.plan, c.y, img_buf); });
        const double t_applyt =
            median_time(repeats, [&] { transfer_apply_transpose(c.plan, img_p, nod_buf); });

        std::string o_grad = "*", o_hvp = "*";
        if (oracle_bytes_estimate(c.ref.grid.count(), c.dg.count()) <= budget) {
            const double t_og = median_time(repeats, [&] {
                oracle::Derivatives der(c.ref, c.ws.sampled, c.params, c.ref.grid, c.plan, c.dg);
                (void)der.distance_gradient_image();
            });
            oracle::Derivatives der(c.ref, c.ws.sampled, c.params, c.ref.grid, c.plan, c.dg);
            const double t_oh =
                median_time(repeats, [&] { (void)der.distance_hvp_image(img_p); });
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f", t_og);
            o_grad = buf;
            std::snprintf(buf, sizeof buf, "%.6f", t_oh);
            o_hvp = buf;
        }
        std::printf("%lld\t%lld\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%s\t%s\n",
                    static_cast<long long>(size), static_cast<long long>(c.dg.m[0]), t_value,
                    t_grad, t_hvp, t_cgrad, t_chvp, t_apply, t_applyt, o_grad.c_str(),
                    o_hvp.c_str());
    }
}

void bench_scaling(const std::vector<int>& threads, index_t size, index_t ratio, int repeats) {
    std::printf("# scaling at %lld^3 (median of %d)\n", static_cast<long long>(size), repeats);
    std::printf("threads\tgradient\thvp\tcurv_hvp\tgrad_speedup\thvp_speedup\n");
    BenchCase c = make_case(size, ratio, 11);
    const index_t n3 = 3 * c.ref.grid.count();
    std::vector<double> img_buf(static_cast<std::size_t>(n3));
    std::vector<double> img_p(static_cast<std::size_t>(n3), 0.5);
    std::vector<double> nod_buf(static_cast<std::size_t>(3 * c.dg.count()));
    std::vector<double> nod_scratch(static_cast<std::size_t>(c.dg.count()));
    std::vector<double> u(nod_buf.size(), 0.1);

    double grad1 = 0.0, hvp1 = 0.0;
    for (int nt : threads) {
        set_thread_count(nt);
        const double tg =
            median_time(repeats, [&] { ngf_gradient(c.ws, c.pre, c.ref.grid, img_buf); });
        const double th = median_time(
            repeats, [&] { ngf_hessian_vec(img_p, c.ws, c.pre, c.ref.grid, img_buf); });
        const double tc = median_time(
            repeats, [&] { curvature_hessian_vec(u, c.dg, nod_scratch, nod_buf); });
        if (nt == threads.front()) {
            grad1 = tg;
            hvp1 = th;
        }
        std::printf("%d\t%.6f\t%.6f\t%.6f\t%.2f\t%.2f\n", nt, tg, th, tc, grad1 / tg, hvp1 / th);
    }
    set_thread_count(0);
}

void bench_memory(index_t size, index_t ratio) {
    BenchCase c = make_case(size, ratio, 13);
    const index_t n3 = 3 * c.ref.grid.count();
    std::vector<double> img_buf(static_cast<std::size_t>(n3));
    std::vector<double> img_p(static_cast<std::size_t>(n3), 0.5);

    counters::mem().reset();
    ngf_gradient(c.ws, c.pre, c.ref.grid, img_buf);
    ngf_hessian_vec(img_p, c.ws, c.pre, c.ref.grid, img_buf);
    const std::int64_t mf_peak = counters::mem().peak.load();

    counters::mem().reset();
    {
        oracle::Derivatives der(c.ref, c.ws.sampled, c.params, c.ref.grid, c.plan, c.dg);
        (void)der.distance_gradient_image();
        (void)der.distance_hvp_image(img_p);
    }
    const std::int64_t oracle_peak = counters::mem().peak.load();
    counters::mem().reset();

    std::printf("memory.size: %lld\n", static_cast<long long>(size));
    std::printf("memory.matrix-free-aux-bytes: %lld\n", static_cast<long long>(mf_peak));
    std::printf("memory.oracle-aux-bytes: %lld\n", static_cast<long long>(oracle_peak));
}

void bench_counts(index_t size, index_t ratio) {
    BenchCase c = make_case(size, ratio, 17);
    const index_t m3 = c.ref.grid.count();
    const index_t my3 = c.dg.count();
    const index_t n3 = 3 * m3;
    std::vector<double> img_buf(static_cast<std::size_t>(n3));
    std::vector<double> img_p(static_cast<std::size_t>(n3), 0.5);

    counters::ops().reset();
    ngf_hessian_vec_counted(img_p, c.ws, c.pre, c.ref.grid, img_buf);
    std::printf("counts.hvp.rho-evals: %lld (expect %lld)\n",
                static_cast<long long>(counters::ops().rho_evals.load()),
                static_cast<long long>(98 * m3));
    std::printf("counts.hvp.image-deriv-loads: %lld (expect %lld)\n",
                static_cast<long long>(counters::ops().image_deriv_loads.load()),
                static_cast<long long>(25 * m3));

    counters::ops().reset();
    ngf_gradient_counted(c.ws, c.pre, c.ref.grid, img_buf);
    std::printf("counts.gradient.image-deriv-loads: %lld (expect %lld)\n",
                static_cast<long long>(counters::ops().image_deriv_loads.load()),
                static_cast<long long>(m3));

    counters::ops().reset();
    {
        oracle::Derivatives der(c.ref, c.ws.sampled, c.params, c.ref.grid, c.plan, c.dg);
    }
    std::printf("counts.oracle.stores: %lld (budget %lld)\n",
                static_cast<long long>(counters::ops().oracle_stores.load()),
                static_cast<long long>(19 * m3 + 25 * my3));
    counters::ops().reset();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"benchmark harness for the registration kernels"};

    std::vector<index_t> sizes{32, 64};
    index_t ratio = 4;
    int repeats = 5;
    std::vector<int> threads{1, 2, 4, 8};
    index_t scaling_size = 64;
    index_t mem_size = 64;
    double budget_gib = 4.0;
    bool run_kernels = false, run_scaling = false, run_memory = false, run_counts = false;

    app.add_option("--sizes", sizes, "cubic image sizes for kernel timings");
    app.add_option("--ratio", ratio, "deformation grid coarsening ratio");
    app.add_option("--repeats", repeats, "repeats per timing (median reported)");
    app.add_option("--threads", threads, "thread counts for the scaling table");
    app.add_option("--scaling-size", scaling_size, "image size for the scaling table");
    app.add_option("--memory-size", mem_size, "image size for the memory report");
    app.add_option("--budget-gib", budget_gib, "oracle assembly memory budget");
    app.add_flag("--kernels", run_kernels, "kernel timing table");
    app.add_flag("--scaling", run_scaling, "thread scaling table");
    app.add_flag("--memory", run_memory, "transient allocation report");
    app.add_flag("--counts", run_counts, "operation-count identities");

    CLI11_PARSE(app, argc, argv);
    if (!run_kernels && !run_scaling && !run_memory && !run_counts) {
        run_kernels = run_scaling = run_memory = run_counts = true;
    }
    const auto budget = static_cast<std::int64_t>(budget_gib * 1024.0 * 1024.0 * 1024.0);

    if (run_kernels) {
        bench_kernels(sizes, ratio, repeats, budget);
    }
    if (run_scaling) {
        bench_scaling(threads, scaling_size, ratio, repeats);
    }
    if (run_memory) {
        bench_memory(mem_size, ratio);
    }
    if (run_counts) {
        bench_counts(mem_size, ratio);
    }
    return 0;
}
