#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "mtc/errors.hpp"
#include "mtc/groundtruth.hpp"
#include "mtc/kernels.hpp"
#include "mtc/rng.hpp"

using namespace mtc;
using namespace mtc::gt;

namespace {

double map_sum(const Tensor& m) { return kernels::sum(m.data(), m.numel()); }

std::vector<Point> random_points(std::size_t n, std::size_t h, std::size_t w, Rng& rng) {
    std::vector<Point> pts(n);
    for (auto& p : pts) {
        p.x = rng.uniform(0.0, static_cast<double>(w) - 1e-9);
        p.y = rng.uniform(0.0, static_cast<double>(h) - 1e-9);
    }
    return pts;
}

}  // namespace

TEST_CASE("knn mean distances: hand example and edge cases") {
    // collinear points at x = 0, 1, 3
    std::vector<Point> pts = {{0, 0}, {1, 0}, {3, 0}};
    auto d = knn_mean_distances(pts, 2);
    REQUIRE(d.size() == 3);
    CHECK(*d[0] == doctest::Approx(2.0));   // (1 + 3) / 2
    CHECK(*d[1] == doctest::Approx(1.5));   // (1 + 2) / 2
    CHECK(*d[2] == doctest::Approx(2.5));   // (2 + 3) / 2

    auto single = knn_mean_distances({{5, 5}}, 3);
    REQUIRE(single.size() == 1);
    CHECK_FALSE(single[0].has_value());

    CHECK(knn_mean_distances({}, 3).empty());
}

TEST_CASE("knn symmetry: two points both see their mutual distance") {
    std::vector<Point> pts = {{0, 0}, {3, 4}};
    auto d = knn_mean_distances(pts, 1);
    CHECK(*d[0] == doctest::Approx(5.0));
    CHECK(*d[1] == doctest::Approx(5.0));
}

TEST_CASE("knn against an exhaustive pairwise oracle on 50 random points") {
    Rng rng(31);
    auto pts = random_points(50, 200, 300, rng);
    const std::size_t k = 3;
    auto got = knn_mean_distances(pts, k);
    // oracle: full distance matrix, sort each row
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<double> row;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) continue;
            row.push_back(std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y));
        }
        std::sort(row.begin(), row.end());
        const double want = (row[0] + row[1] + row[2]) / 3.0;
        REQUIRE(got[i].has_value());
        CHECK(std::fabs(*got[i] - want) <= 1e-12);
    }
}

TEST_CASE("sigma_for_head: scaling, fallback, clamp, fixed mode") {
    KernelConfig cfg;  // adaptive, beta 0.3, fixed_sigma 3.0
    CHECK(sigma_for_head(10.0, cfg) == doctest::Approx(3.0));
    CHECK(sigma_for_head(std::nullopt, cfg) == doctest::Approx(3.0));
    CHECK(sigma_for_head(0.1, cfg) == 0.5);  // 0.03 clamped up

    KernelConfig fixed = cfg;
    fixed.mode = KernelConfig::Mode::fixed;
    CHECK(sigma_for_head(1000.0, fixed) == doctest::Approx(3.0));

    KernelConfig bad = cfg;
    bad.beta = 0.0;
    CHECK_THROWS_AS(sigma_for_head(1.0, bad), ValueError);
}

TEST_CASE("render_density_map: empty, centered, boundary-clipped") {
    KernelConfig cfg;

    SUBCASE("zero heads give a zero map") {
        HeadAnnotation ann{"", {}, 32, 32};
        Tensor m = render_density_map(ann, cfg);
        CHECK(map_sum(m) == 0.0);
    }

    SUBCASE("one centered head sums to 1 within 1e-9") {
        HeadAnnotation ann{"", {{32.0, 32.0}}, 64, 64};
        Tensor m = render_density_map(ann, cfg);  // fallback sigma 3.0
        CHECK(std::fabs(map_sum(m) - 1.0) <= 1e-9);
        for (double v : m.values()) CHECK(v >= 0.0);
    }

    SUBCASE("five heads including a corner sum to 5 within 5e-6") {
        HeadAnnotation ann{"", {{0.0, 0.0}, {63.0, 0.0}, {10.5, 20.25}, {40.0, 40.0},
                                {63.9, 63.9}},
                           64, 64};
        Tensor m = render_density_map(ann, cfg);
        CHECK(std::fabs(map_sum(m) - 5.0) <= 5e-6);
    }

    SUBCASE("out-of-bounds point rejected at ingestion") {
        HeadAnnotation ann{"", {{64.0, 10.0}}, 64, 64};
        CHECK_THROWS_AS(render_density_map(ann, cfg), ValueError);
        HeadAnnotation neg{"", {{-0.1, 10.0}}, 64, 64};
        CHECK_THROWS_AS(render_density_map(neg, cfg), ValueError);
    }

    SUBCASE("identical annotation and config give bit-identical maps") {
        Rng rng(32);
        HeadAnnotation ann{"", random_points(25, 96, 96, rng), 96, 96};
        Tensor a = render_density_map(ann, cfg);
        Tensor b = render_density_map(ann, cfg);
        CHECK(std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0);
    }
}

TEST_CASE("count conservation across head counts and kernel modes") {
    Rng rng(33);
    for (KernelConfig::Mode mode : {KernelConfig::Mode::adaptive, KernelConfig::Mode::fixed}) {
        KernelConfig cfg;
        cfg.mode = mode;
        for (std::size_t heads : {1u, 2u, 7u, 60u}) {
            HeadAnnotation ann{"", random_points(heads, 128, 128, rng), 128, 128};
            Tensor m = render_density_map(ann, cfg);
            const double tol = 1e-6 * std::max<double>(1.0, (double)heads);
            CHECK(std::fabs(map_sum(m) - (double)heads) <= tol);
            Tensor down = downsample_sum(m, 8);
            CHECK(std::fabs(map_sum(down) - (double)heads) <= tol);
        }
    }
}

TEST_CASE("downsample_sum: block sums, conservation, errors") {
    SUBCASE("8x8 ones collapse to [64]") {
        Tensor ones({8, 8}, 1.0);
        Tensor out = downsample_sum(ones, 8);
        REQUIRE(out.shape() == Shape{1, 1});
        CHECK(out.at(0) == 64.0);
    }
    SUBCASE("random 16x16 against a naive double-loop oracle") {
        Rng rng(34);
        Tensor m({16, 16});
        for (auto& v : m.values()) v = rng.uniform();
        Tensor out = downsample_sum(m, 4);
        REQUIRE(out.shape() == Shape{4, 4});
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                double want = 0.0;
                for (std::size_t r = 4 * i; r < 4 * i + 4; ++r)
                    for (std::size_t c = 4 * j; c < 4 * j + 4; ++c)
                        want += m.at(r * 16 + c);
                CHECK(out.at(i * 4 + j) == want);
            }
    }
    SUBCASE("indivisible dims rejected") {
        Tensor m({10, 16}, 0.0);
        CHECK_THROWS_AS(downsample_sum(m, 8), ValueError);
    }
}

TEST_CASE("count_group_label: bounds, rounding, monotonicity") {
    const CountRange part_a{33, 3139};
    CHECK(count_group_label(33, part_a) == 0);
    CHECK(count_group_label(3139, part_a) == 9);
    CHECK(count_group_label(1586, part_a) == 5);  // lands exactly on 5.0
    CHECK(count_group_label(0, part_a) == 0);     // below-range clamp

    const CountRange part_b{9, 578};
    CHECK(count_group_label(9, part_b) == 0);
    CHECK(count_group_label(578, part_b) == 9);
    CHECK(count_group_label(5000, part_b) == 9);  // above-range clamp

    int prev = 0;
    for (int c = 33; c <= 3139; ++c) {
        const int l = count_group_label(c, part_a);
        CHECK(l >= prev);
        CHECK(l <= 9);
        prev = l;
    }

    CHECK_THROWS_AS(count_group_label(-1.0, part_a), ValueError);
    CHECK_THROWS_AS(count_group_label(5.0, CountRange{7, 7}), ValueError);
}

TEST_CASE("annotation JSON round-trip and malformed input") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mtc_gt_test";
    fs::create_directories(dir);
    const std::string p = (dir / "ann.json").string();

    HeadAnnotation ann;
    ann.image_path = "scene_000.ppm";
    ann.points = {{1.5, 2.25}, {63.0, 0.0}};
    save_annotation(p, ann);
    HeadAnnotation back = load_annotation(p);
    CHECK(back.image_path == ann.image_path);
    REQUIRE(back.points.size() == 2);
    CHECK(back.points[0].x == 1.5);
    CHECK(back.points[0].y == 2.25);
    CHECK(back.points[1].x == 63.0);

    {
        std::ofstream bad(dir / "bad.json");
        bad << "{\"image\": \"x.ppm\"}";
    }
    CHECK_THROWS_AS(load_annotation((dir / "bad.json").string()), FormatError);
    {
        std::ofstream bad(dir / "bad2.json");
        bad << "not json at all";
    }
    CHECK_THROWS_AS(load_annotation((dir / "bad2.json").string()), FormatError);
    CHECK_THROWS_AS(load_annotation((dir / "missing.json").string()), IoError);
    fs::remove_all(dir);
}
