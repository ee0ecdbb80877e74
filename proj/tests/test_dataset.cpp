#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mtc/dataset.hpp"
#include "mtc/errors.hpp"
#include "mtc/groundtruth.hpp"

using namespace mtc;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> bytes_of(const std::string& s) {
    return {s.begin(), s.end()};
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("mtc_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> read_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("PGM parses, replicates gray to RGB, and scales by the max value") {
    // 2x2, maxval 200, all samples at the max -> every value 1.0
    auto b = bytes_of("P5\n2 2\n200\n");
    b.insert(b.end(), {200, 200, 200, 200});
    auto img = data::parse_netpbm(b, "test");
    CHECK(img.height == 2);
    CHECK(img.width == 2);
    REQUIRE(img.rgb.size() == 12);
    for (double v : img.rgb) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("PPM P6 splits interleaved channels") {
    auto b = bytes_of("P6\n1 1\n255\n");
    b.insert(b.end(), {255, 0, 0});  // one red pixel
    auto img = data::parse_netpbm(b, "test");
    CHECK(img.rgb[0] == doctest::Approx(1.0));  // R plane
    CHECK(img.rgb[1] == 0.0);                   // G plane
    CHECK(img.rgb[2] == 0.0);                   // B plane
}

TEST_CASE("netpbm header comments are skipped") {
    auto b = bytes_of("P5 # binary gray\n# size next\n2 1 # w h\n255\n");
    b.insert(b.end(), {0, 128});
    auto img = data::parse_netpbm(b, "test");
    CHECK(img.width == 2);
    CHECK(img.rgb[0] == 0.0);
    CHECK(img.rgb[1] == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("netpbm rejects bad magic, wide samples, and truncation") {
    CHECK_THROWS_AS(data::parse_netpbm(bytes_of("P3\n1 1\n255\n1 2 3"), "t"), FormatError);
    CHECK_THROWS_AS(data::parse_netpbm(bytes_of("BM??"), "t"), FormatError);

    SUBCASE("max value above 255 is unsupported") {
        auto b = bytes_of("P5\n1 1\n65535\n");
        b.insert(b.end(), {0, 0});
        try {
            data::parse_netpbm(b, "t");
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("65535") != std::string::npos);
        }
    }

    SUBCASE("truncated sample data reports the byte offset") {
        auto b = bytes_of("P6\n2 2\n255\n");
        b.insert(b.end(), {1, 2, 3});  // needs 12 bytes, has 3
        try {
            data::parse_netpbm(b, "t");
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("truncated") != std::string::npos);
            CHECK(msg.find("byte " + std::to_string(b.size())) != std::string::npos);
        }
    }

    SUBCASE("header that ends mid-number reports the offset") {
        CHECK_THROWS_AS(data::parse_netpbm(bytes_of("P5\n2"), "t"), FormatError);
    }

    SUBCASE("zero dimensions are malformed") {
        auto b = bytes_of("P5\n0 2\n255\n");
        CHECK_THROWS_AS(data::parse_netpbm(b, "t"), FormatError);
    }
}

TEST_CASE("load_image standardizes then pads with exact zeros") {
    TempDir dir("load_image");
    // 2x2 gray image at full brightness
    auto b = bytes_of("P5\n2 2\n255\n");
    b.insert(b.end(), {255, 255, 255, 255});
    write_bytes(dir.file("a.pgm"), b);

    data::Normalization norm;
    norm.mean = {0.5, 0.25, 0.0};
    norm.std = {0.5, 1.0, 2.0};
    auto img = data::load_image(dir.file("a.pgm"), norm);

    CHECK(img.orig_height == 2);
    CHECK(img.orig_width == 2);
    REQUIRE(img.tensor.shape() == Shape{1, 3, 8, 8});
    // channel 0: (1 - 0.5) / 0.5 = 1.0 ; channel 1: 0.75 ; channel 2: 0.5
    CHECK(img.tensor.at(0) == doctest::Approx(1.0));
    CHECK(img.tensor.at(64 + 0) == doctest::Approx(0.75));
    CHECK(img.tensor.at(128 + 0) == doctest::Approx(0.5));
    // padding is untouched zero even though standardization would map 0 elsewhere
    CHECK(img.tensor.at(7) == 0.0);
    CHECK(img.tensor.at(63) == 0.0);

    data::Normalization bad;
    bad.std = {1.0, 0.0, 1.0};
    CHECK_THROWS_AS(data::load_image(dir.file("a.pgm"), bad), ValueError);
    CHECK_THROWS_AS(data::load_image(dir.file("missing.pgm"), norm), IoError);
}

TEST_CASE("synthetic scenes are deterministic and honor the head count range") {
    data::SynthSceneSpec spec;
    spec.size = 64;
    spec.min_heads = 5;
    spec.max_heads = 5;
    spec.seed = 31;

    auto a = data::generate_synthetic(spec);
    auto b = data::generate_synthetic(spec);
    CHECK(a.rgb == b.rgb);
    REQUIRE(a.annotation.points.size() == 5);
    REQUIRE(b.annotation.points.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(a.annotation.points[i].x == b.annotation.points[i].x);
        CHECK(a.annotation.points[i].y == b.annotation.points[i].y);
        CHECK(a.annotation.points[i].x >= 0.0);
        CHECK(a.annotation.points[i].x < 64.0);
        CHECK(a.annotation.points[i].y >= 0.0);
        CHECK(a.annotation.points[i].y < 64.0);
    }

    SUBCASE("different seeds differ") {
        spec.seed = 32;
        auto c = data::generate_synthetic(spec);
        CHECK(a.rgb != c.rgb);
    }

    SUBCASE("zero heads means pure background") {
        spec.min_heads = spec.max_heads = 0;
        spec.noise_level = 0.2;
        auto c = data::generate_synthetic(spec);
        CHECK(c.annotation.points.empty());
        for (unsigned char v : c.rgb) CHECK(v <= 51);  // 255 * 0.2, rounded
    }

    SUBCASE("spec validation") {
        auto bad = spec;
        bad.size = 60;
        CHECK_THROWS_AS(data::generate_synthetic(bad), ValueError);
        bad = spec;
        bad.min_heads = 9;
        bad.max_heads = 3;
        CHECK_THROWS_AS(data::generate_synthetic(bad), ValueError);
        bad = spec;
        bad.noise_level = 1.5;
        CHECK_THROWS_AS(data::generate_synthetic(bad), ValueError);
    }
}

TEST_CASE("write_ppm round-trips through the parser byte-deterministically") {
    TempDir dir("ppm_rt");
    data::SynthSceneSpec spec;
    spec.size = 32;
    spec.min_heads = spec.max_heads = 3;
    spec.seed = 4;
    auto scene = data::generate_synthetic(spec);

    data::write_ppm(dir.file("s.ppm"), scene.height, scene.width, scene.rgb);
    data::write_ppm(dir.file("s2.ppm"), scene.height, scene.width, scene.rgb);
    CHECK(read_bytes(dir.file("s.ppm")) == read_bytes(dir.file("s2.ppm")));

    auto img = data::read_netpbm(dir.file("s.ppm"));
    CHECK(img.height == 32);
    CHECK(img.width == 32);
    // spot-check a bright disc pixel survives the trip at full scale
    const auto& p = scene.annotation.points[0];
    const auto cx = static_cast<std::size_t>(p.x), cy = static_cast<std::size_t>(p.y);
    CHECK(img.rgb[cy * 32 + cx] == doctest::Approx(1.0));

    CHECK_THROWS_AS(data::write_ppm(dir.file("bad.ppm"), 4, 4, {0, 0, 0}), ShapeError);
}

TEST_CASE("count range comes from training counts alone") {
    std::vector<double> a = {33, 100, 250, 3139};
    auto ra = data::count_range_from_counts(a);
    CHECK(ra.c_min == 33.0);
    CHECK(ra.c_max == 3139.0);

    std::vector<double> b = {578, 9, 40};
    auto rb = data::count_range_from_counts(b);
    CHECK(rb.c_min == 9.0);
    CHECK(rb.c_max == 578.0);

    CHECK_THROWS_AS(data::count_range_from_counts({}), ValueError);
    CHECK_THROWS_AS(data::count_range_from_counts({7, 7, 7}), ValueError);

    SUBCASE("manifest-level range ignores a poisoned test count") {
        TempDir dir("range");
        auto save_ann = [&](const std::string& name, std::size_t heads) {
            gt::HeadAnnotation ann;
            ann.image_path = name + ".ppm";
            for (std::size_t i = 0; i < heads; ++i)
                ann.points.push_back({1.0 + i, 2.0});
            gt::save_annotation(dir.file(name), ann);
        };
        save_ann("t1.json", 2);
        save_ann("t2.json", 6);
        save_ann("poison.json", 5000);

        data::Manifest m;
        m.base_dir = dir.path.string();
        m.train = {{"a.ppm", "t1.json"}, {"b.ppm", "t2.json"}};
        m.test = {{"c.ppm", "poison.json"}};
        auto r = data::compute_count_range(m);
        CHECK(r.c_min == 2.0);
        CHECK(r.c_max == 6.0);
    }
}

TEST_CASE("manifest JSON round-trips and rejects unknown keys") {
    TempDir dir("manifest");
    data::Manifest m;
    m.train = {{"img/a.ppm", "ann/a.json"}, {"img/b.ppm", "ann/b.json"}};
    m.test = {{"img/c.ppm", "ann/c.json"}};
    m.norm.mean = {0.4, 0.45, 0.5};
    m.norm.std = {0.2, 0.25, 0.3};
    m.save(dir.file("m.json"));

    auto back = data::Manifest::load(dir.file("m.json"));
    REQUIRE(back.train.size() == 2);
    REQUIRE(back.test.size() == 1);
    CHECK(back.train[1].image == "img/b.ppm");
    CHECK(back.test[0].annotation == "ann/c.json");
    CHECK(back.norm.mean == m.norm.mean);
    CHECK(back.norm.std == m.norm.std);
    CHECK(back.base_dir == dir.path.string());
    CHECK(back.resolve("img/a.ppm") == (dir.path / "img/a.ppm").string());
    CHECK(back.resolve("/abs/x.ppm") == "/abs/x.ppm");

    SUBCASE("bad manifests fail with typed errors") {
        std::ofstream(dir.file("unknown.json")) << R"({"train": [], "bogus": 1})";
        CHECK_THROWS_AS(data::Manifest::load(dir.file("unknown.json")), FormatError);
        std::ofstream(dir.file("notrain.json")) << R"({"test": []})";
        CHECK_THROWS_AS(data::Manifest::load(dir.file("notrain.json")), FormatError);
        std::ofstream(dir.file("badstats.json")) << R"({"train": [], "mean": [1, 2]})";
        CHECK_THROWS_AS(data::Manifest::load(dir.file("badstats.json")), FormatError);
        CHECK_THROWS_AS(data::Manifest::load(dir.file("nope.json")), IoError);
    }
}

TEST_CASE("build_example runs the full image + annotation pipeline") {
    TempDir dir("pipeline");
    data::SynthSceneSpec spec;
    spec.size = 64;
    spec.min_heads = spec.max_heads = 9;
    spec.seed = 77;
    auto scene = data::generate_synthetic(spec);
    data::write_ppm(dir.file("s.ppm"), scene.height, scene.width, scene.rgb);
    scene.annotation.image_path = "s.ppm";
    gt::save_annotation(dir.file("s.json"), scene.annotation);

    data::Normalization norm;
    gt::KernelConfig kcfg;
    gt::CountRange range{1.0, 21.0};
    auto ex = data::build_example(dir.file("s.ppm"), dir.file("s.json"), norm, kcfg, range);

    CHECK(ex.image.shape() == Shape{1, 3, 64, 64});
    CHECK(ex.gt_map.shape() == Shape{1, 1, 8, 8});
    CHECK(ex.gt_count == 9.0);
    CHECK(ex.label == gt::count_group_label(9.0, range));
    double mass = 0.0;
    for (std::size_t i = 0; i < ex.gt_map.numel(); ++i) mass += ex.gt_map.at(i);
    CHECK(std::fabs(mass - 9.0) <= 1e-6 * 9.0);  // conservation through the pipeline

    SUBCASE("build_dataset mirrors the manifest split, in order") {
        data::SynthSceneSpec s2 = spec;
        s2.seed = 78;
        s2.min_heads = s2.max_heads = 4;
        auto scene2 = data::generate_synthetic(s2);
        data::write_ppm(dir.file("s2.ppm"), scene2.height, scene2.width, scene2.rgb);
        scene2.annotation.image_path = "s2.ppm";
        gt::save_annotation(dir.file("s2.json"), scene2.annotation);

        data::Manifest m;
        m.base_dir = dir.path.string();
        m.train = {{"s.ppm", "s.json"}, {"s2.ppm", "s2.json"}};
        auto ds = data::build_dataset(m, true, kcfg, range);
        REQUIRE(ds.size() == 2);
        CHECK(ds[0].gt_count == 9.0);
        CHECK(ds[1].gt_count == 4.0);
        auto empty = data::build_dataset(m, false, kcfg, range);
        CHECK(empty.empty());
    }
}

TEST_CASE("padded frames keep annotation mass: non-multiple-of-8 image") {
    TempDir dir("padmass");
    // 10x6 gray image: pads to 16x8
    std::vector<unsigned char> b = bytes_of("P5\n10 6\n255\n");
    for (int i = 0; i < 60; ++i) b.push_back(40);
    write_bytes(dir.file("odd.pgm"), b);
    gt::HeadAnnotation ann;
    ann.image_path = "odd.pgm";
    ann.points = {{9.5, 5.5}, {0.0, 0.0}};  // corner heads in the original frame
    gt::save_annotation(dir.file("odd.json"), ann);

    auto ex = data::build_example(dir.file("odd.pgm"), dir.file("odd.json"),
                                  data::Normalization{}, gt::KernelConfig{},
                                  gt::CountRange{1.0, 10.0});
    CHECK(ex.image.shape() == Shape{1, 3, 8, 16});
    CHECK(ex.gt_map.shape() == Shape{1, 1, 1, 2});
    double mass = 0.0;
    for (std::size_t i = 0; i < ex.gt_map.numel(); ++i) mass += ex.gt_map.at(i);
    CHECK(std::fabs(mass - 2.0) <= 2e-6);

    SUBCASE("a head outside the original frame is rejected") {
        gt::HeadAnnotation out = ann;
        out.points.push_back({11.0, 3.0});  // inside the padding, outside the image
        gt::save_annotation(dir.file("out.json"), out);
        CHECK_THROWS_AS(data::build_example(dir.file("odd.pgm"), dir.file("out.json"),
                                            data::Normalization{}, gt::KernelConfig{},
                                            gt::CountRange{1.0, 10.0}),
                        ValueError);
    }
}
