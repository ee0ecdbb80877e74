#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mtc/model.hpp"
#include "mtc/tensor.hpp"

namespace mtc::train {

struct TrainConfig {
    double learning_rate = 1e-5;  // desk default; 1e-7 is the full-scale value
    double lambda = 1e-3;
    std::size_t epochs = 1;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;
    std::string preset = "desk";
    bool ce_batch_mean = false;  // default: CE sums over the batch

    void validate() const;

    // JSON object mirroring the fields above; unknown keys are rejected.
    static TrainConfig from_json_file(const std::string& path);
    static TrainConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

// One training example: standardized image, 1/8-resolution target map, count
// class, and the raw head count for evaluation.
struct Example {
    Tensor image;    // [1, 3, H, W]
    Tensor gt_map;   // [1, 1, H/8, W/8]
    int label = 0;   // 0..9
    double gt_count = 0.0;
};

using Dataset = std::vector<Example>;

struct StepRecord {
    std::size_t step = 0;
    double l1 = 0.0;
    double l2 = 0.0;
    double total = 0.0;
};

struct EvalReport {
    double mae = 0.0;
    double mse = 0.0;  // root-mean-square count error
    std::vector<std::pair<double, double>> pairs;  // (estimated, ground truth)
    std::optional<double> aux_accuracy;
};

// ---- metrics ---------------------------------------------------------------

double count_from_density(const Tensor& map);  // plain sum of all entries

double mae(const std::vector<std::pair<double, double>>& pairs);
double mse_metric(const std::vector<std::pair<double, double>>& pairs);

// ---- optimizer -------------------------------------------------------------

// theta <- theta - lr * grad for every parameter, then zeroes the grads.
void sgd_step(model::Model& m, double lr);

// ---- training and harnesses -------------------------------------------------

// Which loss terms drive the updates. Combined uses L1 + lambda * L2;
// aux_only backs up through L2 alone (density-path parameters keep their
// initial values because no gradient reaches them).
enum class LossArm { combined, aux_only };

struct TrainResult {
    model::Model model;
    std::vector<StepRecord> history;
    EvalReport report;  // final evaluation over the training dataset
};

TrainResult train(const Dataset& data, const TrainConfig& cfg,
                  LossArm arm = LossArm::combined);

EvalReport evaluate(const model::Model& m, const Dataset& data);

struct SweepRow {
    double lambda = 0.0;
    double mae = 0.0;
    double mse = 0.0;
};

inline const std::vector<double>& default_sweep_lambdas() {
    static const std::vector<double> v = {1.0, 1e-1, 1e-2, 1e-3, 1e-4};
    return v;
}

// One full training run per lambda, identical seed and data order.
std::vector<SweepRow> lambda_sweep(const Dataset& data, const TrainConfig& cfg,
                                   const std::vector<double>& lambdas = default_sweep_lambdas());

struct AblationArm {
    std::string name;  // "main_standalone" | "aux_standalone" | "mtl"
    double mae = 0.0;
    double mse = 0.0;
    double aux_accuracy = 0.0;
};

struct AblationReport {
    AblationArm main_standalone;  // lambda = 0: classifier receives no gradient
    AblationArm aux_standalone;   // CE only: density path receives no gradient
    AblationArm mtl;              // combined loss at cfg.lambda
};

AblationReport ablation(const Dataset& data, const TrainConfig& cfg);

// Published full-scale results for this architecture, carried in reports as
// reference metadata; desk-scale runs are not expected to approach them.
struct FullScaleReference {
    double best_lambda = 1e-3;
    double best_mae = 63.7;
    double mae_standalone = 68.2;
    double mae_mtl = 63.7;
    double accuracy_standalone = 0.566;
    double accuracy_mtl = 0.797;
};
inline constexpr FullScaleReference kFullScaleReference{};

// ---- k-fold driver ----------------------------------------------------------

struct FoldSplit {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
};

std::vector<FoldSplit> kfold_splits(std::size_t n, std::size_t k, std::uint64_t seed);

// Trains on each fold's train slice, evaluates on its test slice.
std::vector<EvalReport> cross_validate(const Dataset& data, const TrainConfig& cfg,
                                       std::size_t folds);

// ---- report output -----------------------------------------------------------

void write_loss_csv(const std::string& path, const std::vector<StepRecord>& history);

std::string sweep_to_json(const std::vector<SweepRow>& rows);
std::string sweep_to_text(const std::vector<SweepRow>& rows);
std::string ablation_to_json(const AblationReport& r);
std::string ablation_to_text(const AblationReport& r);

}  // namespace mtc::train
