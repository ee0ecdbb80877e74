#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mtc/tensor.hpp"

namespace mtc::gt {

struct Point {
    double x = 0.0;  // column, pixels, origin top-left
    double y = 0.0;  // row
};

// Head positions for one image. height/width come from the image the
// annotation refers to and must be set before rendering.
struct HeadAnnotation {
    std::string image_path;
    std::vector<Point> points;
    std::size_t height = 0;
    std::size_t width = 0;

    // every point must lie in [0, W) x [0, H)
    void validate() const;
};

struct KernelConfig {
    enum class Mode { adaptive, fixed };
    Mode mode = Mode::adaptive;
    double beta = 0.3;
    std::size_t k_neighbors = 3;
    double fixed_sigma = 3.0;
    double truncation_radius_sigmas = 4.0;

    void validate() const;  // beta > 0, k_neighbors >= 1, fixed_sigma > 0
};

struct CountRange {
    double c_min = 0.0;
    double c_max = 0.0;

    void validate() const;  // c_max > c_min
};

// Mean Euclidean distance from each point to its k nearest OTHER points
// (exact O(n^2) scan). nullopt marks points with fewer than k neighbors.
std::vector<std::optional<double>> knn_mean_distances(const std::vector<Point>& points,
                                                      std::size_t k);

// adaptive: beta * mean distance (fixed_sigma on fallback); fixed: fixed_sigma.
// Result clamped to >= 0.5 px so the kernel keeps at least pixel-scale support.
double sigma_for_head(const std::optional<double>& mean_dist, const KernelConfig& cfg);

// Stamps one truncated discrete Gaussian per head, each renormalized so its
// in-image mass is exactly 1, and accumulates into an H x W map. The map sum
// therefore equals the head count up to rounding.
Tensor render_density_map(const HeadAnnotation& ann, const KernelConfig& cfg);

// Block-sum pooling: each output cell is the sum of a factor x factor block.
// Total mass is preserved (same additions, reassociated per block).
Tensor downsample_sum(const Tensor& map, std::size_t factor);

// min(round((C - Cmin) / (Cmax - Cmin) * 10), 9) with round-half-away-from-
// zero, clamped below at 0 (inference-time counts can undershoot Cmin).
int count_group_label(double count, const CountRange& range);

// Annotation JSON: {"image": "<path>", "points": [[x, y], ...]}.
// height/width are left 0; callers fill them in from the referenced image.
HeadAnnotation load_annotation(const std::string& path);
void save_annotation(const std::string& path, const HeadAnnotation& ann);

}  // namespace mtc::gt
