#include "mtc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "mtc/errors.hpp"
#include "mtc/kernels.hpp"
#include "mtc/rng.hpp"

namespace mtc::data {

namespace {

using nlohmann::json;

std::vector<unsigned char> read_all(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

bool is_ws(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

struct Cursor {
    const std::vector<unsigned char>& bytes;
    const std::string& origin;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& why) const {
        throw FormatError(origin + ": " + why + " at byte " + std::to_string(pos));
    }

    void skip_ws_and_comments() {
        while (pos < bytes.size()) {
            if (is_ws(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                return;
            }
        }
    }

    unsigned long next_uint() {
        skip_ws_and_comments();
        if (pos >= bytes.size()) fail("malformed header: file ends");
        if (bytes[pos] < '0' || bytes[pos] > '9') fail("malformed header: expected a number");
        unsigned long v = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1000000000ul) fail("malformed header: number too large");
            ++pos;
        }
        return v;
    }
};

}  // namespace

RawImage parse_netpbm(const std::vector<unsigned char>& bytes, const std::string& origin) {
    Cursor cur{bytes, origin};
    if (bytes.size() < 2) cur.fail("not a binary PPM/PGM: file too short");
    const char m0 = static_cast<char>(bytes[0]), m1 = static_cast<char>(bytes[1]);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw FormatError(origin + ": not a binary PPM/PGM (magic '" +
                          std::string{m0, m1} + "'; only P5/P6 supported)");
    const bool color = m1 == '6';
    cur.pos = 2;

    const unsigned long width = cur.next_uint();
    const unsigned long height = cur.next_uint();
    const unsigned long maxval = cur.next_uint();
    if (width == 0 || height == 0) cur.fail("zero image dimension");
    if (maxval == 0 || maxval > 255)
        throw FormatError(origin + ": unsupported max value " + std::to_string(maxval) +
                          " (only 8-bit samples, 1..255, are supported)");
    if (cur.pos >= bytes.size() || !is_ws(bytes[cur.pos]))
        cur.fail("malformed header: expected whitespace after max value");
    ++cur.pos;  // exactly one separator byte before the sample data

    const std::size_t channels = color ? 3 : 1;
    const std::size_t need = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() - cur.pos < need)
        throw FormatError(origin + ": truncated at byte " + std::to_string(bytes.size()) +
                          ": header promises " + std::to_string(need) +
                          " sample bytes starting at byte " + std::to_string(cur.pos));

    RawImage img;
    img.height = height;
    img.width = width;
    img.rgb.resize(3 * img.height * img.width);
    const double inv = 1.0 / static_cast<double>(maxval);
    const unsigned char* samples = bytes.data() + cur.pos;
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            const std::size_t p = y * img.width + x;
            for (std::size_t c = 0; c < 3; ++c) {
                const unsigned char s = color ? samples[p * 3 + c] : samples[p];
                img.rgb[(c * img.height + y) * img.width + x] = s * inv;
            }
        }
    }
    return img;
}

RawImage read_netpbm(const std::string& path) {
    return parse_netpbm(read_all(path), "'" + path + "'");
}

void write_ppm(const std::string& path, std::size_t height, std::size_t width,
               const std::vector<unsigned char>& rgb) {
    if (rgb.size() != 3 * height * width)
        throw ShapeError("write_ppm: got " + std::to_string(rgb.size()) +
                         " bytes for a " + std::to_string(width) + "x" +
                         std::to_string(height) + " image");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "P6\n" << width << " " << height << "\n255\n";
    os.write(reinterpret_cast<const char*>(rgb.data()),
             static_cast<std::streamsize>(rgb.size()));
    if (!os) throw IoError("failed writing '" + path + "'");
}

void Normalization::validate() const {
    for (double s : std)
        if (!(s > 0.0)) throw ValueError("normalization std must be positive");
}

LoadedImage load_image(const std::string& path, const Normalization& norm) {
    norm.validate();
    RawImage raw = read_netpbm(path);
    const std::size_t ph = (raw.height + 7) / 8 * 8;
    const std::size_t pw = (raw.width + 7) / 8 * 8;

    LoadedImage out;
    out.orig_height = raw.height;
    out.orig_width = raw.width;
    out.tensor = Tensor({1, 3, ph, pw});  // zero-filled: the padding stays 0
    double* dst = out.tensor.data();
    for (std::size_t c = 0; c < 3; ++c) {
        const double inv_std = 1.0 / norm.std[c];
        for (std::size_t y = 0; y < raw.height; ++y)
            for (std::size_t x = 0; x < raw.width; ++x)
                dst[(c * ph + y) * pw + x] =
                    (raw.rgb[(c * raw.height + y) * raw.width + x] - norm.mean[c]) * inv_std;
    }
    return out;
}

void SynthSceneSpec::validate() const {
    if (size == 0 || size % 8 != 0)
        throw ValueError("synthetic scene size must be a positive multiple of 8");
    if (max_heads < min_heads) throw ValueError("head count range is inverted");
    if (!(blob_radius > 0.0)) throw ValueError("blob radius must be positive");
    if (noise_level < 0.0 || noise_level > 1.0)
        throw ValueError("noise level must lie in [0, 1]");
}

SynthScene generate_synthetic(const SynthSceneSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t s = spec.size;

    SynthScene scene;
    scene.height = scene.width = s;
    scene.rgb.resize(3 * s * s);
    for (std::size_t p = 0; p < s * s; ++p) {
        const auto v = static_cast<unsigned char>(
            std::lround(255.0 * spec.noise_level * rng.uniform()));
        scene.rgb[p * 3] = scene.rgb[p * 3 + 1] = scene.rgb[p * 3 + 2] = v;
    }

    const std::size_t span = spec.max_heads - spec.min_heads + 1;
    const std::size_t count = spec.min_heads + (span > 1 ? rng.below(span) : 0);
    const double r = spec.blob_radius;
    for (std::size_t h = 0; h < count; ++h) {
        const double cx = rng.uniform(0.0, static_cast<double>(s));
        const double cy = rng.uniform(0.0, static_cast<double>(s));
        scene.annotation.points.push_back({cx, cy});
        const auto y0 = static_cast<std::size_t>(std::max(0.0, std::ceil(cy - r)));
        const auto x0 = static_cast<std::size_t>(std::max(0.0, std::ceil(cx - r)));
        for (std::size_t y = y0; y < s && y <= static_cast<std::size_t>(cy + r); ++y)
            for (std::size_t x = x0; x < s && x <= static_cast<std::size_t>(cx + r); ++x) {
                const double dx = x - cx, dy = y - cy;
                if (dx * dx + dy * dy <= r * r) {
                    const std::size_t p = y * s + x;
                    scene.rgb[p * 3] = scene.rgb[p * 3 + 1] = scene.rgb[p * 3 + 2] = 255;
                }
            }
    }
    scene.annotation.height = s;
    scene.annotation.width = s;
    scene.annotation.validate();
    return scene;
}

Manifest Manifest::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest '" + path + "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw FormatError("manifest '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw FormatError("manifest '" + path + "' must be a JSON object");

    Manifest m;
    m.base_dir = std::filesystem::path(path).parent_path().string();
    bool saw_train = false;
    auto parse_entries = [&](const json& arr, std::vector<ManifestEntry>& out) {
        if (!arr.is_array())
            throw FormatError("manifest '" + path + "': splits must be arrays");
        for (const auto& e : arr) {
            if (!e.is_object() || !e.contains("image") || !e.contains("annotation"))
                throw FormatError("manifest '" + path +
                                  "': each entry needs \"image\" and \"annotation\"");
            out.push_back({e["image"].get<std::string>(),
                           e["annotation"].get<std::string>()});
        }
    };
    auto parse_stats = [&](const json& arr, std::array<double, 3>& out) {
        if (!arr.is_array() || arr.size() != 3)
            throw FormatError("manifest '" + path + "': mean/std must hold 3 numbers");
        for (std::size_t i = 0; i < 3; ++i) out[i] = arr[i].get<double>();
    };
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "train") {
                parse_entries(value, m.train);
                saw_train = true;
            } else if (key == "test") {
                parse_entries(value, m.test);
            } else if (key == "mean") {
                parse_stats(value, m.norm.mean);
            } else if (key == "std") {
                parse_stats(value, m.norm.std);
            } else {
                throw FormatError("manifest '" + path + "': unknown key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw FormatError("manifest '" + path + "': " + e.what());
    }
    if (!saw_train) throw FormatError("manifest '" + path + "': missing \"train\" split");
    m.norm.validate();
    return m;
}

void Manifest::save(const std::string& path) const {
    norm.validate();
    json j;
    auto dump_entries = [](const std::vector<ManifestEntry>& entries) {
        json arr = json::array();
        for (const auto& e : entries)
            arr.push_back({{"image", e.image}, {"annotation", e.annotation}});
        return arr;
    };
    j["train"] = dump_entries(train);
    j["test"] = dump_entries(test);
    j["mean"] = norm.mean;
    j["std"] = norm.std;
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << j.dump(2) << '\n';
    if (!os) throw IoError("failed writing '" + path + "'");
}

std::string Manifest::resolve(const std::string& path) const {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).string();
}

gt::CountRange count_range_from_counts(const std::vector<double>& counts) {
    if (counts.empty()) throw ValueError("count range needs a nonempty train split");
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    if (*lo == *hi)
        throw ValueError("count range is degenerate: every training image has " +
                         std::to_string(*lo) +
                         " heads; the ten-group label divides by (max - min), so the "
                         "train split must contain differing counts");
    return {*lo, *hi};
}

gt::CountRange compute_count_range(const Manifest& m) {
    std::vector<double> counts;
    for (const ManifestEntry& e : m.train) {
        gt::HeadAnnotation ann = gt::load_annotation(m.resolve(e.annotation));
        counts.push_back(static_cast<double>(ann.points.size()));
    }
    return count_range_from_counts(counts);
}

train::Example build_example(const std::string& image_path, const std::string& ann_path,
                             const Normalization& norm, const gt::KernelConfig& kcfg,
                             const gt::CountRange& range) {
    LoadedImage img = load_image(image_path, norm);
    gt::HeadAnnotation ann = gt::load_annotation(ann_path);
    ann.height = img.orig_height;
    ann.width = img.orig_width;
    ann.validate();  // heads must sit inside the original frame
    ann.height = img.tensor.extent(2);  // render over the padded frame so the
    ann.width = img.tensor.extent(3);   // map aligns with the network output

    Tensor dm = gt::render_density_map(ann, kcfg);
    Tensor small = gt::downsample_sum(dm, 8);

    train::Example e;
    e.image = img.tensor;
    e.gt_map = Tensor::from_data({1, 1, small.extent(0), small.extent(1)}, small.values());
    e.gt_count = static_cast<double>(ann.points.size());
    e.label = gt::count_group_label(e.gt_count, range);
    return e;
}

train::Dataset build_dataset(const Manifest& m, bool train_split,
                             const gt::KernelConfig& kcfg, const gt::CountRange& range) {
    const std::vector<ManifestEntry>& entries = train_split ? m.train : m.test;
    train::Dataset out(entries.size());
    kernels::parallel_for(0, entries.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            out[i] = build_example(m.resolve(entries[i].image),
                                   m.resolve(entries[i].annotation), m.norm, kcfg, range);
    });
    return out;
}

}  // namespace mtc::data
