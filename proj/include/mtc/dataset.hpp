#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mtc/groundtruth.hpp"
#include "mtc/tensor.hpp"
#include "mtc/train.hpp"

namespace mtc::data {

// Decoded 8-bit netpbm image, planar RGB, every sample scaled to [0, 1].
struct RawImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> rgb;  // [3, H, W]
};

// Binary PPM (P6) or PGM (P5; the gray channel is replicated to RGB).
// Header comments are honored; max values above 255 are rejected; truncated
// files report the byte offset where parsing stopped.
RawImage parse_netpbm(const std::vector<unsigned char>& bytes, const std::string& origin);
RawImage read_netpbm(const std::string& path);

// P6 writer, interleaved RGB bytes, max value 255. Output is byte-identical
// for identical input.
void write_ppm(const std::string& path, std::size_t height, std::size_t width,
               const std::vector<unsigned char>& rgb);

// Per-channel statistics applied after the [0, 1] scaling.
struct Normalization {
    std::array<double, 3> mean = {0.0, 0.0, 0.0};
    std::array<double, 3> std = {1.0, 1.0, 1.0};

    void validate() const;  // every std component > 0
};

struct LoadedImage {
    Tensor tensor;  // [1, 3, H8, W8] with H8, W8 the padded dims
    std::size_t orig_height = 0;
    std::size_t orig_width = 0;
};

// Decode, scale to [0, 1], standardize per channel, then zero-pad height and
// width up to the next multiple of 8 (the padding stays exactly zero).
LoadedImage load_image(const std::string& path, const Normalization& norm);

// Synthetic crowd scene: bright discs on a noisy background, with exact
// head centers carried in the annotation. Deterministic per seed.
struct SynthSceneSpec {
    std::size_t size = 128;      // square image, multiple of 8
    std::size_t min_heads = 8;
    std::size_t max_heads = 16;
    double blob_radius = 3.0;    // px
    double noise_level = 0.2;    // background amplitude in [0, 1]
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthScene {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<unsigned char> rgb;  // interleaved, row-major
    gt::HeadAnnotation annotation;   // height/width filled, image_path empty
};

SynthScene generate_synthetic(const SynthSceneSpec& spec);

// Dataset manifest: image/annotation path pairs split into train and test,
// plus the normalization statistics. JSON layout:
//   {"train": [{"image": ..., "annotation": ...}, ...],
//    "test":  [...], "mean": [r,g,b], "std": [r,g,b]}
struct ManifestEntry {
    std::string image;
    std::string annotation;
};

struct Manifest {
    std::vector<ManifestEntry> train;
    std::vector<ManifestEntry> test;
    Normalization norm;
    std::string base_dir;  // set by load(); relative entries resolve against it

    static Manifest load(const std::string& path);
    void save(const std::string& path) const;

    std::string resolve(const std::string& path) const;
};

// (min, max) over a nonempty set of training counts; equal min and max is an
// error because the ten-group label divides by their difference.
gt::CountRange count_range_from_counts(const std::vector<double>& counts);

// Head counts are taken from the TRAIN annotations only; test entries never
// influence the range.
gt::CountRange compute_count_range(const Manifest& m);

// Full per-image pipeline: load + standardize + pad the image, validate the
// annotation against the original frame, render the density map over the
// padded frame, downsample by 8, and derive the count-group label.
train::Example build_example(const std::string& image_path, const std::string& ann_path,
                             const Normalization& norm, const gt::KernelConfig& kcfg,
                             const gt::CountRange& range);

train::Dataset build_dataset(const Manifest& m, bool train_split,
                             const gt::KernelConfig& kcfg, const gt::CountRange& range);

}  // namespace mtc::data
