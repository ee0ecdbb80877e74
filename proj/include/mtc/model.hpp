#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mtc/tensor.hpp"

namespace mtc::model {

// Architecture family: a shared conv frontend (three 2x2 max-pools inside, so
// features land at 1/8 resolution), two branch stacks X1 and X2, a dilation-2
// conv backend fed by concat(X1, X2) that regresses the density map through a
// final 1x1 conv, and a classifier head on X2 alone (adaptive max-pool,
// flatten, three dense layers to 10 logits).
//
// "paper" is the full-size network; "desk" divides every channel/dense width
// by 8 and shrinks the pool target to 8x8 with identical topology, keeping
// experiments tractable on a workstation.
struct ArchPreset {
    std::string name;
    std::vector<std::size_t> frontend_channels;  // 10 convs; pools after #2, #4, #7
    std::size_t x1_mid = 0, x1_out = 0;
    std::size_t x2_mid = 0, x2_out = 0;
    std::vector<std::size_t> backend_channels;   // all dilation 2
    std::size_t pool_th = 0, pool_tw = 0;
    std::size_t dense1 = 0, dense2 = 0;          // third dense is always 10
    static constexpr std::size_t kClasses = 10;
    static constexpr std::size_t kStride = 8;    // three 2x2 pools

    static ArchPreset paper();
    static ArchPreset desk();
    static ArchPreset by_name(const std::string& name);
};

// One entry per learnable layer, in forward order.
struct LayerDef {
    enum class Kind { conv, maxpool, branch_point, dense };
    Kind kind;
    std::string name;           // parameter base name for conv/dense
    std::size_t in_dim = 0;     // channels or dense width
    std::size_t out_dim = 0;
    std::size_t kernel = 3;
    std::size_t dilation = 1;
    bool relu_after = true;
};

class Model {
public:
    struct Output {
        Tensor density;  // [N, 1, H/8, W/8]
        Tensor logits;   // [N, 10]
    };

    // Weights ~ Normal(0, 0.01^2) from the seeded stream, biases zero.
    // Gradient buffers are pre-allocated so optimizer steps and gradient
    // inspection are uniform even for parameters a run never touches.
    static Model build(const ArchPreset& preset, std::uint64_t seed);

    const ArchPreset& preset() const { return preset_; }

    Output forward(const Tensor& image) const;

    std::vector<std::pair<std::string, Tensor>>& params() { return params_; }
    const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
    Tensor param(const std::string& name) const;
    bool has_param(const std::string& name) const;

    std::size_t parameter_count() const;
    void zero_grads();

    void save_weights(const std::string& path) const;
    // Full load requires the file and model to carry exactly the same names
    // and shapes; the error lists every difference. With partial = true,
    // parameters missing from the file keep their current values (unknown
    // names and shape mismatches still fail).
    void load_weights(const std::string& path, bool partial = false);

    // Pure shape/size arithmetic; never allocates parameters. This is how the
    // full-size preset is validated: its classifier alone holds ~268M weights,
    // too large to instantiate casually.
    struct ShapeReport {
        Shape density;
        Shape logits;
        std::size_t parameter_count = 0;
    };
    static ShapeReport infer_shapes(const ArchPreset& preset, std::size_t batch,
                                    std::size_t height, std::size_t width);

private:
    ArchPreset preset_;
    std::vector<std::pair<std::string, Tensor>> params_;
    std::unordered_map<std::string, std::size_t> index_;

    void register_param(const std::string& name, Tensor t);
};

}  // namespace mtc::model
