#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfreg/multilevel.hpp"
#include "mfreg/synthetic.hpp"

using namespace mfreg;

TEST_CASE("pyramid shapes") {
    SUBCASE("one level returns the originals") {
        const Volume r = synthetic::make_random_volume({6, 6, 6}, {1.0, 1.0, 1.0}, 1);
        const auto p = build_pyramid(r, r, 1);
        REQUIRE(p.size() == 1);
        CHECK(p[0].reference.data == r.data);
    }
    SUBCASE("64^3 three levels") {
        const Volume r = make_volume({64, 64, 64}, {1.0, 1.0, 1.0}, 1.0);
        const auto p = build_pyramid(r, r, 3);
        REQUIRE(p.size() == 3);
        CHECK(p[0].reference.grid.m[0] == 64);
        CHECK(p[1].reference.grid.m[0] == 32);
        CHECK(p[2].reference.grid.m[0] == 16);
    }
    SUBCASE("anisotropic two levels") {
        const Volume r = make_volume({48, 32, 20}, {1.0, 1.0, 1.0}, 0.0);
        const auto p = build_pyramid(r, r, 2);
        REQUIRE(p.size() == 2);
        CHECK(p[1].reference.grid.m[0] == 24);
        CHECK(p[1].reference.grid.m[1] == 16);
        CHECK(p[1].reference.grid.m[2] == 10);
    }
    SUBCASE("rejects infeasible depth") {
        const Volume r = make_volume({4, 4, 4}, {1.0, 1.0, 1.0}, 0.0);
        CHECK_THROWS(build_pyramid(r, r, 4));
        CHECK_THROWS(build_pyramid(r, r, 0));
    }
    SUBCASE("extents preserved within one fine cell") {
        const Volume r = make_volume({20, 22, 18}, {1.0, 1.25, 0.5}, 0.0);
        const auto p = build_pyramid(r, r, 3);
        for (const auto& lv : p) {
            for (int a = 0; a < 3; ++a) {
                CHECK(std::abs(lv.reference.grid.extent(a) - r.grid.extent(a)) <=
                      lv.reference.grid.h[static_cast<std::size_t>(a)]);
            }
        }
    }
}

TEST_CASE("deformation grid sizing") {
    CHECK(deformation_grid_for(make_image_grid({64, 64, 64}, {1, 1, 1}), 4).m[0] == 17);
    CHECK(deformation_grid_for(make_image_grid({512, 512, 512}, {1, 1, 1}), 4).m[0] == 129);
    CHECK(deformation_grid_for(make_image_grid({2, 2, 2}, {1, 1, 1}), 4).m[0] == 2);
    const auto dg = deformation_grid_for(make_image_grid({64, 64, 64}, {1, 1, 1}), 4);
    CHECK(dg.extent(0) == doctest::Approx(64.0));
}

TEST_CASE("prolongation") {
    const GridDesc img = make_image_grid({8, 8, 8}, {1.0, 1.0, 1.0});
    const GridDesc coarse = make_deform_grid(img, {3, 3, 3});
    const GridDesc fine = make_deform_grid(img, {5, 5, 5});

    SUBCASE("identity maps to identity") {
        const index_t nc = coarse.count();
        std::vector<double> y(static_cast<std::size_t>(3 * nc));
        for (index_t i = 0; i < nc; ++i) {
            const auto p = coarse.point_coords(i);
            for (int d = 0; d < 3; ++d) {
                y[static_cast<std::size_t>(d * nc + i)] = p[static_cast<std::size_t>(d)];
            }
        }
        const auto yf = prolong(y, coarse, fine);
        const index_t nf = fine.count();
        for (index_t i = 0; i < nf; ++i) {
            const auto p = fine.point_coords(i);
            for (int d = 0; d < 3; ++d) {
                CHECK(yf[static_cast<std::size_t>(d * nf + i)] ==
                      doctest::Approx(p[static_cast<std::size_t>(d)]).epsilon(1e-13));
            }
        }
    }
    SUBCASE("constant displacement is preserved") {
        const index_t nc = coarse.count();
        std::vector<double> y(static_cast<std::size_t>(3 * nc));
        for (index_t i = 0; i < nc; ++i) {
            const auto p = coarse.point_coords(i);
            y[static_cast<std::size_t>(i)] = p[0] + 1.0;
            y[static_cast<std::size_t>(nc + i)] = p[1] + 2.0;
            y[static_cast<std::size_t>(2 * nc + i)] = p[2] + 3.0;
        }
        const auto yf = prolong(y, coarse, fine);
        const index_t nf = fine.count();
        for (index_t i = 0; i < nf; ++i) {
            const auto p = fine.point_coords(i);
            CHECK(yf[static_cast<std::size_t>(i)] - p[0] == doctest::Approx(1.0));
            CHECK(yf[static_cast<std::size_t>(nf + i)] - p[1] == doctest::Approx(2.0));
            CHECK(yf[static_cast<std::size_t>(2 * nf + i)] - p[2] == doctest::Approx(3.0));
        }
    }
    SUBCASE("linear displacement reproduced exactly") {
        const index_t nc = coarse.count();
        std::vector<double> y(static_cast<std::size_t>(3 * nc));
        for (index_t i = 0; i < nc; ++i) {
            const auto p = coarse.point_coords(i);
            y[static_cast<std::size_t>(i)] = p[0] + 0.1 * p[0] - 0.05 * p[1];
            y[static_cast<std::size_t>(nc + i)] = p[1] + 0.2 * p[2];
            y[static_cast<std::size_t>(2 * nc + i)] = p[2] - 0.1 * p[0] + 0.02 * p[2];
        }
        const auto yf = prolong(y, coarse, fine);
        const index_t nf = fine.count();
        for (index_t i = 0; i < nf; ++i) {
            const auto p = fine.point_coords(i);
            CHECK(yf[static_cast<std::size_t>(i)] ==
                  doctest::Approx(p[0] + 0.1 * p[0] - 0.05 * p[1]).epsilon(1e-12));
            CHECK(yf[static_cast<std::size_t>(nf + i)] ==
                  doctest::Approx(p[1] + 0.2 * p[2]).epsilon(1e-12));
        }
    }
    SUBCASE("extent mismatch rejected") {
        const GridDesc other = make_deform_grid(make_image_grid({16, 8, 8}, {1, 1, 1}), {5, 5, 5});
        const std::vector<double> y(static_cast<std::size_t>(3 * coarse.count()), 0.0);
        CHECK_THROWS(prolong(y, coarse, other));
    }
}

TEST_CASE("multilevel registration of identical images stays at identity") {
    const Volume r = synthetic::make_phantom({16, 16, 16}, {1.0, 1.0, 1.0});
    MultilevelConfig cfg;
    cfg.levels = 2;
    cfg.deform_ratio = 4;
    cfg.opt.max_iters = 5;
    const auto res = register_multilevel(r, r, cfg);
    REQUIRE(res.levels.size() == 2);

    const index_t n = res.deform_grid.count();
    double max_disp = 0.0;
    for (index_t i = 0; i < n; ++i) {
        const auto p = res.deform_grid.point_coords(i);
        for (int d = 0; d < 3; ++d) {
            max_disp = std::max(max_disp,
                                std::abs(res.y[static_cast<std::size_t>(d * n + i)] -
                                         p[static_cast<std::size_t>(d)]));
        }
    }
    CHECK(max_disp <= 1e-6 * res.deform_grid.h[0]);
}

TEST_CASE("single level equals one optimizer call") {
    const Volume r = synthetic::make_phantom({12, 12, 12}, {1.0, 1.0, 1.0});
    const auto w = synthetic::make_sinusoid_warp({12.0, 12.0, 12.0}, 0.6, 3);
    const Volume t = synthetic::warp_with(r, w);

    MultilevelConfig cfg;
    cfg.levels = 1;
    cfg.opt.max_iters = 3;
    const auto res = register_multilevel(r, t, cfg);

    const GridDesc dg = deformation_grid_for(r.grid, cfg.deform_ratio);
    Objective obj(r, t, dg, cfg.ngf, cfg.alpha);
    const auto direct = lbfgs_minimize(obj, obj.identity(), cfg.opt);
    REQUIRE(res.y.size() == direct.y.size());
    for (std::size_t i = 0; i < res.y.size(); ++i) {
        CHECK(res.y[i] == direct.y[i]);
    }
}
