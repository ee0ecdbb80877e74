#include "mtc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mtc/errors.hpp"
#include "mtc/kernels.hpp"
#include "mtc/ops.hpp"
#include "mtc/rng.hpp"

namespace mtc::train {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValueError("learning_rate must be > 0");
    if (lambda < 0.0) throw ValueError("lambda must be >= 0");
    if (batch_size < 1) throw ValueError("batch_size must be >= 1");
    if (epochs < 1) throw ValueError("epochs must be >= 1");
    model::ArchPreset::by_name(preset);  // throws on unknown names
}

namespace {

using nlohmann::json;

TrainConfig config_from_json(const json& j, const std::string& origin) {
    if (!j.is_object()) throw FormatError(origin + ": config must be a JSON object");
    TrainConfig cfg;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "learning_rate") cfg.learning_rate = value.get<double>();
            else if (key == "lambda") cfg.lambda = value.get<double>();
            else if (key == "epochs") cfg.epochs = value.get<std::size_t>();
            else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "preset") cfg.preset = value.get<std::string>();
            else if (key == "ce_batch_mean") cfg.ce_batch_mean = value.get<bool>();
            else throw FormatError(origin + ": unknown config key '" + key + "'");
        } catch (const json::exception& e) {
            throw FormatError(origin + ": bad value for '" + key + "': " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

}  // namespace

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config '" + path + "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw FormatError("config '" + path + "': " + e.what());
    }
    return config_from_json(j, "config '" + path + "'");
}

TrainConfig TrainConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config text: ") + e.what());
    }
    return config_from_json(j, "config text");
}

std::string TrainConfig::to_json_text() const {
    json j;
    j["learning_rate"] = learning_rate;
    j["lambda"] = lambda;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    j["preset"] = preset;
    j["ce_batch_mean"] = ce_batch_mean;
    return j.dump(2);
}

double count_from_density(const Tensor& map) {
    return kernels::sum(map.data(), map.numel());
}

double mae(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.empty()) throw ValueError("mae: empty pair set");
    double acc = 0.0;
    for (const auto& [est, gt] : pairs) acc += std::fabs(est - gt);
    return acc / static_cast<double>(pairs.size());
}

double mse_metric(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.empty()) throw ValueError("mse_metric: empty pair set");
    double acc = 0.0;
    for (const auto& [est, gt] : pairs) {
        const double d = std::fabs(est - gt);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pairs.size()));
}

void sgd_step(model::Model& m, double lr) {
    if (lr < 0.0) throw ValueError("sgd_step: negative learning rate");
    for (auto& [name, t] : m.params()) {
        if (!t.has_grad())
            throw ValueError("sgd_step: parameter '" + name + "' has no gradient");
        kernels::axpy(-lr, t.grad(), t.data(), t.numel());
    }
    m.zero_grads();
}

namespace {

void validate_dataset(const Dataset& data) {
    if (data.empty()) throw ValueError("dataset is empty");
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Example& e = data[i];
        if (!e.image.defined() || e.image.rank() != 4 || e.image.extent(0) != 1)
            throw ShapeError("example " + std::to_string(i) + ": image must be [1,3,H,W]");
        if (!e.gt_map.defined() || e.gt_map.rank() != 4 || e.gt_map.extent(0) != 1)
            throw ShapeError("example " + std::to_string(i) + ": gt map must be [1,1,h,w]");
        if (e.image.extent(2) % 8 != 0 || e.image.extent(3) % 8 != 0)
            throw ShapeError("example " + std::to_string(i) +
                             ": image dims must be multiples of 8");
        if (e.gt_map.extent(2) != e.image.extent(2) / 8 ||
            e.gt_map.extent(3) != e.image.extent(3) / 8)
            throw ShapeError("example " + std::to_string(i) +
                             ": gt map must be the image at 1/8 resolution");
        if (e.label < 0 || e.label > 9)
            throw ValueError("example " + std::to_string(i) + ": label out of [0,9]");
    }
}

// Stacks examples (all shapes already validated as equal) into one batch.
void assemble_batch(const Dataset& data, const std::vector<std::size_t>& idx,
                    std::size_t begin, std::size_t count, Tensor& images, Tensor& maps,
                    std::vector<int>& labels) {
    const Example& first = data[idx[begin]];
    const std::size_t img_n = first.image.numel();
    const std::size_t map_n = first.gt_map.numel();
    images = Tensor({count, 3, first.image.extent(2), first.image.extent(3)});
    maps = Tensor({count, 1, first.gt_map.extent(2), first.gt_map.extent(3)});
    labels.resize(count);
    for (std::size_t b = 0; b < count; ++b) {
        const Example& e = data[idx[begin + b]];
        if (e.image.shape() != first.image.shape())
            throw ShapeError("batched training needs equal image sizes; got " +
                             shape_str(e.image.shape()) + " and " +
                             shape_str(first.image.shape()));
        std::memcpy(images.data() + b * img_n, e.image.data(), img_n * sizeof(double));
        std::memcpy(maps.data() + b * map_n, e.gt_map.data(), map_n * sizeof(double));
        labels[b] = e.label;
    }
}

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& cfg, LossArm arm) {
    cfg.validate();
    validate_dataset(data);

    TrainResult result{model::Model::build(model::ArchPreset::by_name(cfg.preset), cfg.seed),
                       {}, {}};
    model::Model& m = result.model;

    Rng order_rng(cfg.seed);
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(idx);
        for (std::size_t begin = 0; begin < idx.size(); begin += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, idx.size() - begin);
            Tensor images, maps;
            std::vector<int> labels;
            assemble_batch(data, idx, begin, count, images, maps, labels);

            Tape tape;
            StepRecord rec;
            rec.step = step;
            {
                Tape::Scope scope(tape);
                auto out = m.forward(images);
                Tensor l1 = ops::mse_density_loss(out.density, maps);
                Tensor l2 = ops::softmax_cross_entropy(out.logits, labels, cfg.ce_batch_mean);
                rec.l1 = l1.item();
                rec.l2 = l2.item();
                Tensor total = arm == LossArm::aux_only
                                   ? l2
                                   : ops::combined_loss(l1, l2, cfg.lambda);
                rec.total = total.item();
                if (!std::isfinite(rec.total))
                    throw TrainError("non-finite loss " + std::to_string(rec.total) +
                                         " at step " + std::to_string(step),
                                     step);
                tape.backward(total);
            }
            sgd_step(m, cfg.learning_rate);
            result.history.push_back(rec);
            ++step;
        }
    }

    result.report = evaluate(m, data);
    return result;
}

EvalReport evaluate(const model::Model& m, const Dataset& data) {
    validate_dataset(data);
    EvalReport report;
    std::size_t correct = 0;
    for (const Example& e : data) {
        auto out = m.forward(e.image);  // no tape active: pure inference
        const double est = count_from_density(out.density);
        report.pairs.emplace_back(est, e.gt_count);
        std::size_t arg = 0;
        for (std::size_t c = 1; c < model::ArchPreset::kClasses; ++c)
            if (out.logits.at(c) > out.logits.at(arg)) arg = c;
        if (static_cast<int>(arg) == e.label) ++correct;
    }
    report.mae = mae(report.pairs);
    report.mse = mse_metric(report.pairs);
    report.aux_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return report;
}

std::vector<SweepRow> lambda_sweep(const Dataset& data, const TrainConfig& cfg,
                                   const std::vector<double>& lambdas) {
    if (lambdas.size() < 2) throw ValueError("lambda_sweep needs at least 2 lambdas");
    std::vector<SweepRow> rows;
    for (double lam : lambdas) {
        TrainConfig c = cfg;
        c.lambda = lam;
        TrainResult r = train(data, c);
        rows.push_back({lam, r.report.mae, r.report.mse});
    }
    return rows;
}

AblationReport ablation(const Dataset& data, const TrainConfig& cfg) {
    AblationReport report;

    TrainConfig main_cfg = cfg;
    main_cfg.lambda = 0.0;
    TrainResult main_run = train(data, main_cfg);
    report.main_standalone = {"main_standalone", main_run.report.mae, main_run.report.mse,
                              *main_run.report.aux_accuracy};

    TrainResult aux_run = train(data, cfg, LossArm::aux_only);
    report.aux_standalone = {"aux_standalone", aux_run.report.mae, aux_run.report.mse,
                             *aux_run.report.aux_accuracy};

    TrainResult mtl_run = train(data, cfg);
    report.mtl = {"mtl", mtl_run.report.mae, mtl_run.report.mse,
                  *mtl_run.report.aux_accuracy};
    return report;
}

std::vector<FoldSplit> kfold_splits(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ValueError("kfold_splits: k must be >= 2");
    if (n < k) throw ValueError("kfold_splits: need at least k items");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    std::vector<FoldSplit> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t lo = f * n / k, hi = (f + 1) * n / k;
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= lo && i < hi)
                folds[f].test_idx.push_back(idx[i]);
            else
                folds[f].train_idx.push_back(idx[i]);
        }
    }
    return folds;
}

std::vector<EvalReport> cross_validate(const Dataset& data, const TrainConfig& cfg,
                                       std::size_t folds) {
    auto splits = kfold_splits(data.size(), folds, cfg.seed);
    std::vector<EvalReport> reports;
    for (const FoldSplit& split : splits) {
        Dataset train_set, test_set;
        for (std::size_t i : split.train_idx) train_set.push_back(data[i]);
        for (std::size_t i : split.test_idx) test_set.push_back(data[i]);
        TrainResult r = train(train_set, cfg);
        reports.push_back(evaluate(r.model, test_set));
    }
    return reports;
}

void write_loss_csv(const std::string& path, const std::vector<StepRecord>& history) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "step,L1,L2,L_total\n";
    os.precision(17);
    for (const StepRecord& r : history)
        os << r.step << ',' << r.l1 << ',' << r.l2 << ',' << r.total << '\n';
    if (!os) throw IoError("failed writing '" + path + "'");
}

std::string sweep_to_json(const std::vector<SweepRow>& rows) {
    json j;
    j["rows"] = json::array();
    for (const SweepRow& r : rows)
        j["rows"].push_back({{"lambda", r.lambda}, {"mae", r.mae}, {"mse", r.mse}});
    j["reference_full_scale"] = {{"best_lambda", kFullScaleReference.best_lambda},
                                 {"best_mae", kFullScaleReference.best_mae}};
    return j.dump(2);
}

std::string sweep_to_text(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "lambda        MAE          MSE\n";
    os.precision(6);
    for (const SweepRow& r : rows) {
        os.width(10);
        os << std::left << r.lambda << "  ";
        os.width(11);
        os << r.mae << "  ";
        os.width(11);
        os << r.mse << '\n';
    }
    os << "(full-scale reference: best MAE " << kFullScaleReference.best_mae
       << " at lambda " << kFullScaleReference.best_lambda << ")\n";
    return os.str();
}

namespace {

json arm_to_json(const AblationArm& a) {
    return {{"name", a.name}, {"mae", a.mae}, {"mse", a.mse},
            {"aux_accuracy", a.aux_accuracy}};
}

}  // namespace

std::string ablation_to_json(const AblationReport& r) {
    json j;
    j["main_standalone"] = arm_to_json(r.main_standalone);
    j["aux_standalone"] = arm_to_json(r.aux_standalone);
    j["mtl"] = arm_to_json(r.mtl);
    j["reference_full_scale"] = {
        {"mae_standalone", kFullScaleReference.mae_standalone},
        {"mae_mtl", kFullScaleReference.mae_mtl},
        {"accuracy_standalone", kFullScaleReference.accuracy_standalone},
        {"accuracy_mtl", kFullScaleReference.accuracy_mtl}};
    return j.dump(2);
}

std::string ablation_to_text(const AblationReport& r) {
    std::ostringstream os;
    os << "arm               MAE          MSE          aux accuracy\n";
    os.precision(6);
    for (const AblationArm* a : {&r.main_standalone, &r.aux_standalone, &r.mtl}) {
        os.width(16);
        os << std::left << a->name << "  ";
        os.width(11);
        os << a->mae << "  ";
        os.width(11);
        os << a->mse << "  ";
        os << a->aux_accuracy << '\n';
    }
    os << "(full-scale reference: accuracy " << kFullScaleReference.accuracy_standalone * 100
       << "% -> " << kFullScaleReference.accuracy_mtl * 100 << "%, MAE "
       << kFullScaleReference.mae_standalone << " -> " << kFullScaleReference.mae_mtl << ")\n";
    return os.str();
}

}  // namespace mtc::train
