#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>

#include "mfreg/oracle.hpp"
#include "mfreg/parallel.hpp"
#include "mfreg/transfer.hpp"

using namespace mfreg;

namespace {

struct Grids {
    GridDesc img;
    GridDesc dg;
    TransferPlan plan;
};

Grids make_grids(std::array<index_t, 3> m, std::array<index_t, 3> my,
                 std::array<double, 3> h = {1.0, 1.0, 1.0}) {
    Grids g;
    g.img = make_image_grid(m, h);
    g.dg = make_deform_grid(g.img, my);
    g.plan = make_transfer_plan(g.dg, g.img);
    return g;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    std::vector<double> v(n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (auto& x : v) {
        x = d(rng);
    }
    return v;
}

} // namespace

TEST_CASE("partition of unity") {
    const Grids g = make_grids({5, 6, 7}, {3, 4, 4});
    std::vector<double> y(static_cast<std::size_t>(3 * g.dg.count()));
    const index_t ny = g.dg.count();
    for (index_t i = 0; i < ny; ++i) {
        y[static_cast<std::size_t>(i)] = 2.5;
        y[static_cast<std::size_t>(ny + i)] = -1.0;
        y[static_cast<std::size_t>(2 * ny + i)] = 0.125;
    }
    std::vector<double> out(static_cast<std::size_t>(3 * g.img.count()));
    transfer_apply(g.plan, y, out);
    const index_t n = g.img.count();
    for (index_t i = 0; i < n; ++i) {
        CHECK(out[static_cast<std::size_t>(i)] == doctest::Approx(2.5).epsilon(1e-14));
        CHECK(out[static_cast<std::size_t>(n + i)] == doctest::Approx(-1.0).epsilon(1e-14));
        CHECK(out[static_cast<std::size_t>(2 * n + i)] == doctest::Approx(0.125).epsilon(1e-14));
    }
}

TEST_CASE("2^3 image over 3^3 nodes averages all eight corners") {
    // c(k) = (k+0.5)*(3-1)/2 = 0.5, 1.5: every weight is 1/8.
    const Grids g = make_grids({2, 2, 2}, {3, 3, 3});
    const auto y = random_vec(static_cast<std::size_t>(3 * g.dg.count()), 5);
    std::vector<double> out(static_cast<std::size_t>(3 * g.img.count()));
    transfer_apply(g.plan, y, out);
    const index_t ny = g.dg.count();
    const index_t n = g.img.count();
    for (int d = 0; d < 3; ++d) {
        for (index_t i = 0; i < n; ++i) {
            const auto c = g.img.decompose(i);
            double mean = 0.0;
            for (int cz = 0; cz < 2; ++cz) {
                for (int cy = 0; cy < 2; ++cy) {
                    for (int cx = 0; cx < 2; ++cx) {
                        mean += y[static_cast<std::size_t>(
                            d * ny + g.dg.linear(c[0] + cx, c[1] + cy, c[2] + cz))];
                    }
                }
            }
            mean /= 8.0;
            CHECK(out[static_cast<std::size_t>(d * n + i)] ==
                  doctest::Approx(mean).epsilon(1e-14));
        }
    }
}

TEST_CASE("linear reproduction: nodal coordinates map to cell centers") {
    const Grids g = make_grids({6, 5, 4}, {4, 3, 3}, {1.0, 2.0, 1.5});
    const index_t ny = g.dg.count();
    std::vector<double> y(static_cast<std::size_t>(3 * ny));
    for (index_t i = 0; i < ny; ++i) {
        const auto p = g.dg.point_coords(i);
        for (int d = 0; d < 3; ++d) {
            y[static_cast<std::size_t>(d * ny + i)] = p[static_cast<std::size_t>(d)];
        }
    }
    std::vector<double> out(static_cast<std::size_t>(3 * g.img.count()));
    transfer_apply(g.plan, y, out);
    const index_t n = g.img.count();
    for (index_t i = 0; i < n; ++i) {
        const auto p = g.img.point_coords(i);
        for (int d = 0; d < 3; ++d) {
            CHECK(out[static_cast<std::size_t>(d * n + i)] ==
                  doctest::Approx(p[static_cast<std::size_t>(d)]).epsilon(1e-13));
        }
    }
}

TEST_CASE("adjointness of apply and apply_transpose") {
    const Grids g = make_grids({7, 6, 5}, {4, 4, 3});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto y = random_vec(static_cast<std::size_t>(3 * g.dg.count()), 100 + seed);
        const auto w = random_vec(static_cast<std::size_t>(3 * g.img.count()), 200 + seed);
        std::vector<double> py(w.size()), ptw(y.size());
        transfer_apply(g.plan, y, py);
        transfer_apply_transpose(g.plan, w, ptw);
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            a += py[i] * w[i];
        }
        for (std::size_t i = 0; i < y.size(); ++i) {
            b += y[i] * ptw[i];
        }
        CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("matches the sparse oracle matrix") {
    const Grids g = make_grids({4, 4, 4}, {3, 3, 3});
    const auto P = oracle::assemble_P(g.plan);
    const auto y = random_vec(static_cast<std::size_t>(3 * g.dg.count()), 7);
    const auto w = random_vec(static_cast<std::size_t>(3 * g.img.count()), 8);

    std::vector<double> py(w.size()), ptw(y.size());
    transfer_apply(g.plan, y, py);
    transfer_apply_transpose(g.plan, w, ptw);
    const auto py_o = P.multiply(y);
    const auto ptw_o = P.multiply_transpose(w);
    for (std::size_t i = 0; i < py.size(); ++i) {
        CHECK(std::abs(py[i] - py_o[i]) <= 1e-12);
    }
    for (std::size_t i = 0; i < ptw.size(); ++i) {
        CHECK(std::abs(ptw[i] - ptw_o[i]) <= 1e-12);
    }
}

TEST_CASE("apply_transpose is bit-identical across thread counts") {
    const Grids g = make_grids({9, 8, 7}, {5, 4, 4});
    const auto w = random_vec(static_cast<std::size_t>(3 * g.img.count()), 9);
    std::vector<double> r1(static_cast<std::size_t>(3 * g.dg.count()));
    std::vector<double> r4(r1.size());
    set_thread_count(1);
    transfer_apply_transpose(g.plan, w, r1);
    set_thread_count(4);
    transfer_apply_transpose(g.plan, w, r4);
    set_thread_count(0);
    CHECK(std::memcmp(r1.data(), r4.data(), r1.size() * sizeof(double)) == 0);
}

TEST_CASE("apply_transpose of zero is zero") {
    const Grids g = make_grids({4, 4, 4}, {3, 3, 3});
    const std::vector<double> w(static_cast<std::size_t>(3 * g.img.count()), 0.0);
    std::vector<double> out(static_cast<std::size_t>(3 * g.dg.count()), 1.0);
    transfer_apply_transpose(g.plan, w, out);
    for (double x : out) {
        CHECK(x == 0.0);
    }
}
