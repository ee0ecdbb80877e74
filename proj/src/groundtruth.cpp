#include "mtc/groundtruth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mtc/errors.hpp"

namespace mtc::gt {

void HeadAnnotation::validate() const {
    if (height == 0 || width == 0)
        throw ValueError("annotation has no image size; set height/width before use");
    for (const Point& p : points) {
        if (!(p.x >= 0.0 && p.x < static_cast<double>(width)) ||
            !(p.y >= 0.0 && p.y < static_cast<double>(height)))
            throw ValueError("head point (" + std::to_string(p.x) + ", " +
                             std::to_string(p.y) + ") outside image " +
                             std::to_string(width) + "x" + std::to_string(height));
    }
}

void KernelConfig::validate() const {
    if (!(beta > 0.0)) throw ValueError("kernel beta must be > 0");
    if (k_neighbors < 1) throw ValueError("kernel k_neighbors must be >= 1");
    if (!(fixed_sigma > 0.0)) throw ValueError("kernel fixed_sigma must be > 0");
    if (!(truncation_radius_sigmas > 0.0))
        throw ValueError("kernel truncation radius must be > 0");
}

void CountRange::validate() const {
    if (!(c_max > c_min))
        throw ValueError("count range must satisfy c_max > c_min, got [" +
                         std::to_string(c_min) + ", " + std::to_string(c_max) + "]");
}

std::vector<std::optional<double>> knn_mean_distances(const std::vector<Point>& points,
                                                      std::size_t k) {
    if (k < 1) throw ValueError("knn_mean_distances: k must be >= 1");
    const std::size_t n = points.size();
    std::vector<std::optional<double>> out(n);
    std::vector<double> dists;
    dists.reserve(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (n - 1 < k) continue;  // fallback marker stays nullopt
        dists.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = points[i].x - points[j].x;
            const double dy = points[i].y - points[j].y;
            dists.push_back(std::sqrt(dx * dx + dy * dy));
        }
        std::sort(dists.begin(), dists.end());
        double acc = 0.0;
        for (std::size_t m = 0; m < k; ++m) acc += dists[m];
        out[i] = acc / static_cast<double>(k);
    }
    return out;
}

double sigma_for_head(const std::optional<double>& mean_dist, const KernelConfig& cfg) {
    cfg.validate();
    double sigma;
    if (cfg.mode == KernelConfig::Mode::fixed)
        sigma = cfg.fixed_sigma;
    else
        sigma = mean_dist ? cfg.beta * *mean_dist : cfg.fixed_sigma;
    return std::max(sigma, 0.5);
}

Tensor render_density_map(const HeadAnnotation& ann, const KernelConfig& cfg) {
    cfg.validate();
    ann.validate();
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(ann.height);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(ann.width);
    Tensor map({ann.height, ann.width}, 0.0);
    if (ann.points.empty()) return map;

    const auto mean_dists = knn_mean_distances(ann.points, cfg.k_neighbors);
    double* mv = map.data();
    std::vector<double> stamp;
    for (std::size_t i = 0; i < ann.points.size(); ++i) {
        const Point& p = ann.points[i];
        const double sigma = sigma_for_head(mean_dists[i], cfg);
        const std::ptrdiff_t R =
            static_cast<std::ptrdiff_t>(std::ceil(cfg.truncation_radius_sigmas * sigma));
        const std::ptrdiff_t cr = static_cast<std::ptrdiff_t>(std::floor(p.y));
        const std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(std::floor(p.x));
        const std::ptrdiff_t r0 = std::max<std::ptrdiff_t>(0, cr - R);
        const std::ptrdiff_t r1 = std::min<std::ptrdiff_t>(H - 1, cr + R);
        const std::ptrdiff_t c0 = std::max<std::ptrdiff_t>(0, cc - R);
        const std::ptrdiff_t c1 = std::min<std::ptrdiff_t>(W - 1, cc + R);
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

        stamp.assign(static_cast<std::size_t>((r1 - r0 + 1) * (c1 - c0 + 1)), 0.0);
        double mass = 0.0;
        std::size_t idx = 0;
        for (std::ptrdiff_t r = r0; r <= r1; ++r)
            for (std::ptrdiff_t c = c0; c <= c1; ++c, ++idx) {
                const double dr = static_cast<double>(r) - p.y;
                const double dc = static_cast<double>(c) - p.x;
                const double g = std::exp(-(dr * dr + dc * dc) * inv2s2);
                stamp[idx] = g;
                mass += g;
            }
        // renormalize so this head contributes exactly 1 even when the
        // window is clipped at the image border
        const double inv_mass = 1.0 / mass;
        idx = 0;
        for (std::ptrdiff_t r = r0; r <= r1; ++r)
            for (std::ptrdiff_t c = c0; c <= c1; ++c, ++idx)
                mv[r * W + c] += stamp[idx] * inv_mass;
    }
    return map;
}

Tensor downsample_sum(const Tensor& map, std::size_t factor) {
    if (map.rank() != 2)
        throw ShapeError("downsample_sum expects a rank-2 map, got " +
                         shape_str(map.shape()));
    if (factor == 0) throw ValueError("downsample_sum: factor must be >= 1");
    const std::size_t H = map.extent(0), W = map.extent(1);
    if (H % factor != 0 || W % factor != 0)
        throw ValueError("downsample_sum: dims " + std::to_string(H) + "x" +
                         std::to_string(W) + " not divisible by " + std::to_string(factor));
    const std::size_t oh = H / factor, ow = W / factor;
    Tensor out({oh, ow}, 0.0);
    const double* src = map.data();
    double* dst = out.data();
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (std::size_t r = i * factor; r < (i + 1) * factor; ++r)
                for (std::size_t c = j * factor; c < (j + 1) * factor; ++c)
                    acc += src[r * W + c];
            dst[i * ow + j] = acc;
        }
    return out;
}

int count_group_label(double count, const CountRange& range) {
    range.validate();
    if (count < 0.0) throw ValueError("count_group_label: count must be >= 0");
    const double scaled = (count - range.c_min) / (range.c_max - range.c_min) * 10.0;
    const double rounded = std::round(scaled);  // half away from zero
    int label = rounded > 9.0 ? 9 : static_cast<int>(rounded);
    if (label < 0) label = 0;
    return label;
}

HeadAnnotation load_annotation(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open annotation '" + path + "'");
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("annotation '" + path + "': " + e.what());
    }
    if (!j.is_object() || !j.contains("image") || !j.contains("points"))
        throw FormatError("annotation '" + path + "' must be {\"image\", \"points\"}");
    HeadAnnotation ann;
    try {
        ann.image_path = j.at("image").get<std::string>();
        for (const auto& pt : j.at("points")) {
            if (!pt.is_array() || pt.size() != 2)
                throw FormatError("annotation '" + path + "': points must be [x, y] pairs");
            ann.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("annotation '" + path + "': " + e.what());
    }
    return ann;
}

void save_annotation(const std::string& path, const HeadAnnotation& ann) {
    nlohmann::json j;
    j["image"] = ann.image_path;
    auto pts = nlohmann::json::array();
    for (const Point& p : ann.points) pts.push_back({p.x, p.y});
    j["points"] = std::move(pts);
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << j.dump(2) << '\n';
    if (!os) throw IoError("failed writing '" + path + "'");
}

}  // namespace mtc::gt
