#include "mtc/model.hpp"

#include <algorithm>

#include "mtc/errors.hpp"
#include "mtc/ops.hpp"
#include "mtc/rng.hpp"
#include "mtc/serialize.hpp"

namespace mtc::model {

ArchPreset ArchPreset::paper() {
    ArchPreset p;
    p.name = "paper";
    p.frontend_channels = {64, 64, 128, 128, 256, 256, 256, 512, 512, 512};
    p.x1_mid = 512;
    p.x1_out = 512;
    p.x2_mid = 512;
    p.x2_out = 128;
    p.backend_channels = {512, 512, 512, 256, 128, 64};
    p.pool_th = 64;
    p.pool_tw = 64;
    p.dense1 = 512;
    p.dense2 = 256;
    return p;
}

ArchPreset ArchPreset::desk() {
    ArchPreset p = paper();
    p.name = "desk";
    for (auto& c : p.frontend_channels) c /= 8;
    p.x1_mid /= 8;
    p.x1_out /= 8;
    p.x2_mid /= 8;
    p.x2_out /= 8;
    for (auto& c : p.backend_channels) c /= 8;
    p.pool_th = 8;
    p.pool_tw = 8;
    p.dense1 /= 8;
    p.dense2 /= 8;
    return p;
}

ArchPreset ArchPreset::by_name(const std::string& name) {
    if (name == "paper") return paper();
    if (name == "desk") return desk();
    throw ValueError("unknown preset '" + name + "' (expected paper|desk)");
}

namespace {

// Pools sit after the 2nd, 4th and 7th frontend conv (1/8 resolution total).
bool pool_after_frontend(std::size_t conv_idx) {
    return conv_idx == 1 || conv_idx == 3 || conv_idx == 6;
}

struct ConvDef {
    std::string name;
    std::size_t in, out, k, dil;
    bool relu;
};
struct DenseDef {
    std::string name;
    std::size_t in, out;
    bool relu;
};

struct Plan {
    std::vector<ConvDef> frontend;
    ConvDef x1a, x1b, x2a, x2b;
    std::vector<ConvDef> backend;
    ConvDef out_conv;
    std::vector<DenseDef> dense;
    std::size_t flatten = 0;
};

Plan make_plan(const ArchPreset& p) {
    if (p.frontend_channels.size() != 10)
        throw ValueError("preset must have 10 frontend convs, got " +
                         std::to_string(p.frontend_channels.size()));
    if (p.backend_channels.size() != 6)
        throw ValueError("preset must have 6 backend convs, got " +
                         std::to_string(p.backend_channels.size()));
    Plan plan;
    std::size_t in = 3;
    for (std::size_t i = 0; i < p.frontend_channels.size(); ++i) {
        plan.frontend.push_back({"frontend.conv" + std::to_string(i), in,
                                 p.frontend_channels[i], 3, 1, true});
        in = p.frontend_channels[i];
    }
    plan.x1a = {"branch1.conv0", in, p.x1_mid, 3, 1, true};
    plan.x1b = {"branch1.conv1", p.x1_mid, p.x1_out, 3, 1, true};
    plan.x2a = {"branch2.conv0", in, p.x2_mid, 3, 1, true};
    plan.x2b = {"branch2.conv1", p.x2_mid, p.x2_out, 3, 1, true};
    std::size_t bin = p.x1_out + p.x2_out;
    for (std::size_t i = 0; i < p.backend_channels.size(); ++i) {
        plan.backend.push_back({"backend.conv" + std::to_string(i), bin,
                                p.backend_channels[i], 3, 2, true});
        bin = p.backend_channels[i];
    }
    plan.out_conv = {"backend.out", bin, 1, 1, 1, false};
    plan.flatten = p.x2_out * p.pool_th * p.pool_tw;
    plan.dense.push_back({"classifier.dense0", plan.flatten, p.dense1, true});
    plan.dense.push_back({"classifier.dense1", p.dense1, p.dense2, true});
    plan.dense.push_back({"classifier.dense2", p.dense2, ArchPreset::kClasses, false});
    return plan;
}

}  // namespace

void Model::register_param(const std::string& name, Tensor t) {
    t.set_requires_grad(true);
    t.grad();  // pre-allocate so every parameter always has a gradient buffer
    index_[name] = params_.size();
    params_.emplace_back(name, std::move(t));
}

Model Model::build(const ArchPreset& preset, std::uint64_t seed) {
    Model m;
    m.preset_ = preset;
    const Plan plan = make_plan(preset);
    Rng rng(seed);

    auto add_conv = [&](const ConvDef& c) {
        Tensor w({c.out, c.in, c.k, c.k});
        for (auto& v : w.values()) v = rng.normal(0.0, 0.01);
        m.register_param(c.name + ".weight", std::move(w));
        m.register_param(c.name + ".bias", Tensor({c.out}, 0.0));
    };
    auto add_dense = [&](const DenseDef& d) {
        Tensor w({d.out, d.in});
        for (auto& v : w.values()) v = rng.normal(0.0, 0.01);
        m.register_param(d.name + ".weight", std::move(w));
        m.register_param(d.name + ".bias", Tensor({d.out}, 0.0));
    };

    for (const auto& c : plan.frontend) add_conv(c);
    add_conv(plan.x1a);
    add_conv(plan.x1b);
    add_conv(plan.x2a);
    add_conv(plan.x2b);
    for (const auto& c : plan.backend) add_conv(c);
    add_conv(plan.out_conv);
    for (const auto& d : plan.dense) add_dense(d);
    return m;
}

Tensor Model::param(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("no parameter named '" + name + "'");
    return params_[it->second].second;
}

bool Model::has_param(const std::string& name) const {
    return index_.find(name) != index_.end();
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

void Model::zero_grads() {
    for (auto& [name, t] : params_) t.zero_grad();
}

Model::Output Model::forward(const Tensor& image) const {
    if (image.rank() != 4)
        throw ShapeError("model input must be [N, 3, H, W], got " + shape_str(image.shape()));
    if (image.extent(1) != 3)
        throw ShapeError("model input needs 3 channels, got " +
                         std::to_string(image.extent(1)));
    const std::size_t H = image.extent(2), W = image.extent(3);
    if (H % ArchPreset::kStride != 0 || W % ArchPreset::kStride != 0)
        throw ShapeError("input spatial dims must be multiples of 8, got " +
                         std::to_string(H) + "x" + std::to_string(W));
    if (H / ArchPreset::kStride < preset_.pool_th || W / ArchPreset::kStride < preset_.pool_tw)
        throw ShapeError("input " + std::to_string(H) + "x" + std::to_string(W) +
                         " too small for the " + std::to_string(preset_.pool_th) + "x" +
                         std::to_string(preset_.pool_tw) +
                         " classifier pool; increase input size or shrink pool target");

    const Plan plan = make_plan(preset_);
    auto conv = [&](const Tensor& h, const ConvDef& c) {
        Tensor y = ops::conv2d(h, param(c.name + ".weight"), param(c.name + ".bias"), c.dil);
        return c.relu ? ops::relu(y) : y;
    };

    Tensor h = image;
    for (std::size_t i = 0; i < plan.frontend.size(); ++i) {
        h = conv(h, plan.frontend[i]);
        if (pool_after_frontend(i)) h = ops::maxpool2d(h);
    }

    Tensor x1 = conv(conv(h, plan.x1a), plan.x1b);
    Tensor x2 = conv(conv(h, plan.x2a), plan.x2b);

    Tensor cat = ops::concat_channels(x1, x2);
    for (const auto& c : plan.backend) cat = conv(cat, c);
    Tensor density = conv(cat, plan.out_conv);

    Tensor pooled = ops::adaptive_maxpool2d(x2, preset_.pool_th, preset_.pool_tw);
    Tensor flat = ops::flatten2d(pooled);
    for (const auto& d : plan.dense) {
        flat = ops::dense(flat, param(d.name + ".weight"), param(d.name + ".bias"));
        if (d.relu) flat = ops::relu(flat);
    }

    return {density, flat};
}

void Model::save_weights(const std::string& path) const {
    io::save_weights(path, params_);
}

void Model::load_weights(const std::string& path, bool partial) {
    io::NamedTensors file = io::load_weights(path);
    std::unordered_map<std::string, Tensor> by_name;
    for (auto& [name, t] : file) {
        if (!by_name.emplace(name, t).second)
            throw FormatError("weight file '" + path + "' repeats entry '" + name + "'");
    }

    std::string missing, unexpected, mismatched;
    for (const auto& [name, t] : params_) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            if (!partial) missing += "\n  missing: " + name + " " + shape_str(t.shape());
            continue;
        }
        if (it->second.shape() != t.shape())
            mismatched += "\n  shape mismatch: " + name + " model " + shape_str(t.shape()) +
                          " vs file " + shape_str(it->second.shape());
    }
    for (const auto& [name, t] : file)
        if (index_.find(name) == index_.end())
            unexpected += "\n  unexpected: " + name + " " + shape_str(t.shape());

    if (!missing.empty() || !unexpected.empty() || !mismatched.empty())
        throw ValueError("weight file '" + path + "' does not match the model:" + missing +
                         unexpected + mismatched);

    for (auto& [name, t] : params_) {
        auto it = by_name.find(name);
        if (it == by_name.end()) continue;  // partial load keeps current values
        std::copy(it->second.data(), it->second.data() + t.numel(), t.data());
    }
}

Model::ShapeReport Model::infer_shapes(const ArchPreset& preset, std::size_t batch,
                                       std::size_t height, std::size_t width) {
    if (batch == 0) throw ValueError("batch must be >= 1");
    if (height % ArchPreset::kStride != 0 || width % ArchPreset::kStride != 0)
        throw ShapeError("input spatial dims must be multiples of 8, got " +
                         std::to_string(height) + "x" + std::to_string(width));
    const std::size_t oh = height / ArchPreset::kStride;
    const std::size_t ow = width / ArchPreset::kStride;
    if (oh < preset.pool_th || ow < preset.pool_tw)
        throw ShapeError("input too small for the classifier pool target; "
                         "increase input size or shrink pool target");

    const Plan plan = make_plan(preset);
    ShapeReport r;
    r.density = {batch, 1, oh, ow};
    r.logits = {batch, ArchPreset::kClasses};
    auto conv_params = [](const ConvDef& c) { return c.out * c.in * c.k * c.k + c.out; };
    auto dense_params = [](const DenseDef& d) { return d.out * d.in + d.out; };
    for (const auto& c : plan.frontend) r.parameter_count += conv_params(c);
    r.parameter_count += conv_params(plan.x1a) + conv_params(plan.x1b) +
                         conv_params(plan.x2a) + conv_params(plan.x2b);
    for (const auto& c : plan.backend) r.parameter_count += conv_params(c);
    r.parameter_count += conv_params(plan.out_conv);
    for (const auto& d : plan.dense) r.parameter_count += dense_params(d);
    return r;
}

}  // namespace mtc::model
