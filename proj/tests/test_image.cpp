#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mfreg/synthetic.hpp"
#include "mfreg/volume.hpp"

using namespace mfreg;

namespace {

Volume ramp_x(std::array<index_t, 3> m, std::array<double, 3> h) {
    Volume v = make_volume(m, h);
    for (index_t i = 0; i < v.grid.count(); ++i) {
        v.data[static_cast<std::size_t>(i)] = v.grid.point_coords(i)[0];
    }
    return v;
}

} // namespace

TEST_CASE("interpolate constants and ramps") {
    const Volume c = make_volume({4, 4, 4}, {1.0, 1.0, 1.0}, 3.25);
    auto r = interpolate(c, {2.1, 1.7, 2.9});
    CHECK(r.value == doctest::Approx(3.25));
    CHECK(r.grad[0] == doctest::Approx(0.0));

    const Volume v = ramp_x({4, 4, 4}, {1.0, 1.0, 1.0});
    r = interpolate(v, {2.0, 1.5, 1.5});
    CHECK(r.value == doctest::Approx(2.0));
    CHECK(r.grad[0] == doctest::Approx(1.0));
    CHECK(r.grad[1] == doctest::Approx(0.0));
    CHECK(r.grad[2] == doctest::Approx(0.0));
}

TEST_CASE("interpolate Dirichlet outside") {
    const Volume v = make_volume({4, 4, 4}, {1.0, 1.0, 1.0}, 7.0);
    const auto r = interpolate(v, {-1e6, -1e6, -1e6});
    CHECK(r.value == 0.0);
    CHECK(r.grad[0] == 0.0);
    CHECK(r.grad[1] == 0.0);
    CHECK(r.grad[2] == 0.0);
}

TEST_CASE("trilinear reproduction on full-support interior") {
    Volume v = make_volume({6, 6, 6}, {1.0, 1.0, 1.0});
    auto f = [](double x, double y, double z) {
        return 1.0 + 2.0 * x - 0.5 * y + 0.25 * z + 0.1 * x * y - 0.2 * y * z + 0.05 * x * z +
               0.01 * x * y * z;
    };
    for (index_t i = 0; i < v.grid.count(); ++i) {
        const auto p = v.grid.point_coords(i);
        v.data[static_cast<std::size_t>(i)] = f(p[0], p[1], p[2]);
    }
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(1.0, 5.0);
    for (int t = 0; t < 50; ++t) {
        const double x = d(rng), y = d(rng), z = d(rng);
        const auto r = interpolate(v, {x, y, z});
        CHECK(r.value == doctest::Approx(f(x, y, z)).epsilon(1e-12));
    }
}

TEST_CASE("interpolate gradient matches finite differences") {
    const Volume v = synthetic::make_random_volume({6, 6, 6}, {1.0, 1.0, 1.0}, 11, 1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(1.3, 4.2);
    const double step = 1e-6;
    for (int t = 0; t < 30; ++t) {
        const std::array<double, 3> p{d(rng), d(rng), d(rng)};
        const auto r = interpolate(v, p);
        for (int a = 0; a < 3; ++a) {
            auto lo = p, hi = p;
            lo[static_cast<std::size_t>(a)] -= step;
            hi[static_cast<std::size_t>(a)] += step;
            const double fd =
                (interpolate(v, hi).value - interpolate(v, lo).value) / (2.0 * step);
            CHECK(r.grad[static_cast<std::size_t>(a)] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("sample_deformed at cell centers reproduces data") {
    const Volume v = synthetic::make_random_volume({5, 4, 3}, {1.0, 2.0, 1.5}, 5);
    const index_t n = v.grid.count();
    std::vector<double> pts(static_cast<std::size_t>(3 * n));
    for (index_t i = 0; i < n; ++i) {
        const auto p = v.grid.point_coords(i);
        for (int d = 0; d < 3; ++d) {
            pts[static_cast<std::size_t>(d * n + i)] = p[static_cast<std::size_t>(d)];
        }
    }
    SampledTemplate st;
    sample_deformed(v, pts, st);
    for (index_t i = 0; i < n; ++i) {
        CHECK(st.values[static_cast<std::size_t>(i)] ==
              doctest::Approx(v.data[static_cast<std::size_t>(i)]).epsilon(1e-14));
    }
}

TEST_CASE("sample_deformed half-cell shift averages x-neighbors") {
    const Volume v = synthetic::make_random_volume({6, 4, 4}, {1.0, 1.0, 1.0}, 17);
    const index_t n = v.grid.count();
    std::vector<double> pts(static_cast<std::size_t>(3 * n));
    for (index_t i = 0; i < n; ++i) {
        const auto p = v.grid.point_coords(i);
        pts[static_cast<std::size_t>(i)] = p[0] + 0.5;
        pts[static_cast<std::size_t>(n + i)] = p[1];
        pts[static_cast<std::size_t>(2 * n + i)] = p[2];
    }
    SampledTemplate st;
    sample_deformed(v, pts, st);
    for (index_t i = 0; i < n; ++i) {
        const auto c = v.grid.decompose(i);
        if (c[0] + 1 >= v.grid.m[0]) {
            continue; // boundary blends with Dirichlet zeros
        }
        const double expect = 0.5 * (v.data[static_cast<std::size_t>(i)] +
                                     v.data[static_cast<std::size_t>(i + 1)]);
        CHECK(st.values[static_cast<std::size_t>(i)] == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("sample_deformed far outside is zero") {
    const Volume v = make_volume({4, 4, 4}, {1.0, 1.0, 1.0}, 2.0);
    const index_t n = v.grid.count();
    std::vector<double> pts(static_cast<std::size_t>(3 * n), -1e6);
    SampledTemplate st;
    sample_deformed(v, pts, st);
    for (index_t i = 0; i < n; ++i) {
        CHECK(st.values[static_cast<std::size_t>(i)] == 0.0);
        for (int d = 0; d < 3; ++d) {
            CHECK(st.partials[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)] == 0.0);
        }
    }
}

TEST_CASE("discrete gradient") {
    SUBCASE("constant volume") {
        const Volume v = make_volume({3, 3, 3}, {1.0, 1.0, 1.0}, 4.0);
        for (index_t i = 0; i < v.grid.count(); ++i) {
            const auto g = discrete_gradient(v, i);
            for (double x : g) {
                CHECK(x == 0.0);
            }
        }
    }
    SUBCASE("x ramp interior") {
        const Volume v = ramp_x({4, 3, 3}, {0.5, 1.0, 1.0});
        const index_t i = v.grid.linear(1, 1, 1);
        const auto g = discrete_gradient(v, i);
        CHECK(g[0] == doctest::Approx(1.0)); // backward x
        CHECK(g[3] == doctest::Approx(1.0)); // forward x
        CHECK(g[1] == doctest::Approx(0.0));
        CHECK(g[4] == doctest::Approx(0.0));
    }
    SUBCASE("clamped boundary") {
        const Volume v = ramp_x({4, 3, 3}, {1.0, 1.0, 1.0});
        const index_t i = v.grid.linear(0, 1, 1);
        const auto g = discrete_gradient(v, i);
        CHECK(g[0] == 0.0); // backward x clamps to self
        CHECK(g[3] == doctest::Approx(1.0));
    }
}

TEST_CASE("eps_norm") {
    CHECK(eps_norm({0, 0, 0, 0, 0, 0}, 10.0) == doctest::Approx(10.0));
    CHECK(eps_norm({2, 0, 0, 2, 0, 0}, 1.0) == doctest::Approx(std::sqrt(5.0)));
    CHECK(eps_norm({1, 1, 1, 1, 1, 1}, 0.001) == doctest::Approx(std::sqrt(3.0 + 1e-6)));
    // Lower bound: never below eps.
    CHECK(eps_norm({1e-8, 0, 0, 0, 0, 0}, 0.5) >= 0.5);
}

TEST_CASE("downsample") {
    SUBCASE("2x2x2 of ones") {
        const Volume v = make_volume({2, 2, 2}, {1.0, 1.0, 1.0}, 1.0);
        const Volume c = downsample(v);
        CHECK(c.grid.m[0] == 1);
        CHECK(c.grid.m[1] == 1);
        CHECK(c.grid.m[2] == 1);
        CHECK(c.data[0] == doctest::Approx(1.0));
        CHECK(c.grid.h[0] == doctest::Approx(2.0));
    }
    SUBCASE("rejects thin volumes") {
        const Volume v = make_volume({4, 1, 1}, {1.0, 1.0, 1.0});
        CHECK_THROWS(downsample(v));
    }
    SUBCASE("4x2x2 block means") {
        Volume v = make_volume({4, 2, 2}, {1.0, 1.0, 1.0});
        for (index_t i = 0; i < 16; ++i) {
            v.data[static_cast<std::size_t>(i)] = static_cast<double>(i);
        }
        const Volume c = downsample(v);
        CHECK(c.grid.m[0] == 2);
        CHECK(c.grid.m[1] == 1);
        CHECK(c.grid.m[2] == 1);
        CHECK(c.data[0] == doctest::Approx((0 + 1 + 4 + 5 + 8 + 9 + 12 + 13) / 8.0));
        CHECK(c.data[1] == doctest::Approx((2 + 3 + 6 + 7 + 10 + 11 + 14 + 15) / 8.0));
    }
    SUBCASE("mean preserved for even sizes") {
        const Volume v = synthetic::make_random_volume({4, 6, 8}, {1.0, 1.0, 1.0}, 23);
        const Volume c = downsample(v);
        double mf = 0.0, mc = 0.0;
        for (double x : v.data) {
            mf += x;
        }
        for (double x : c.data) {
            mc += x;
        }
        CHECK(mf / static_cast<double>(v.data.size()) ==
              doctest::Approx(mc / static_cast<double>(c.data.size())).epsilon(1e-13));
    }
}
