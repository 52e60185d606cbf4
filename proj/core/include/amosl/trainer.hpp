#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amosl/config.hpp"
#include "amosl/dataset.hpp"
#include "amosl/metrics.hpp"
#include "amosl/model.hpp"

namespace amosl {

/// Algorithm 1 momentum state. reg stays in [0,1] for P-hat values in [0,1].
struct RegState {
    double reg = 0.0;
    double gamma = 0.9;
    std::size_t t = 0;
};

/// Algorithm 1: the first observation initializes reg = 1 - p_mean, later ones
/// apply reg <- gamma*reg + (1-gamma)*(1-p_mean). p_mean must lie in [0,1].
void update_reg(RegState& state, double p_mean);

/// Eq. 5 with the adaptive coefficient: L = L0 + lambda * reg * ot.
double total_loss(double l0, double reg, double ot, double lambda);

struct AdamState {
    std::vector<Matrix> m, v;  // moments, shaped like the parameters
    std::size_t t = 0;
};

AdamState make_adam_state(const std::vector<ParamRef>& params);

/// Standard Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias correction).
/// Non-finite gradients abort the step with a diagnostic naming the parameter.
void adam_step(std::vector<ParamRef>& params, const std::vector<Matrix>& grads,
               AdamState& state, double lr);

/// One sample's forward pass. The loss is assembled later (Algorithm 1 updates
/// reg from the observed P-hat before the step's loss uses it), so the result
/// carries the tape nodes of both loss pieces instead of a combined root.
struct ForwardOut {
    ValueId l0;         // cross-entropy node
    ValueId structure;  // OT / row-aligned distance node (constant when reg is off)
    Matrix probs;       // 1 x C softmax row
    double l0_value = 0.0;
    double structure_value = 0.0;
    double p_true = 0.0;
    std::size_t predicted = 0;
    bool correct = false;
};

/// Towers on both modalities -> structure term (per config.distance) ->
/// fuse -> compatibility + readout -> classifier -> cross-entropy. Eval-mode
/// tapes make dropout the identity, so the same call serves inference; the
/// structure term is always computed (logged even when reg_mode is off).
ForwardOut forward_sample(Tape& tape, const GraphSample& sample, const ModalityOperators& ops,
                          const ModelIds& ids, const TrainConfig& config);

/// Total-loss root for one sample given the effective coefficient
/// lambda * reg; with reg_mode off the root is the bare cross-entropy node and
/// the structure term stays outside the gradient path.
ValueId loss_root(Tape& tape, const ForwardOut& out, const TrainConfig& config, double reg);

RegUpdate reg_update_from(const std::string& s);

/// Optional knobs shared by train_fold / cross_validate / run_ablation.
struct TrainHooks {
    MetricsWriter* metrics = nullptr;  // per-epoch records, when enabled
    std::string run_id;                // stamped into records
    RegUpdate reg_update = RegUpdate::Batch;
    bool timing = false;               // wall_ms stays 0 unless set (stable streams)
    std::ostream* progress = nullptr;  // one line per epoch
};

struct FoldResult {
    std::size_t fold = 0;
    double test_accuracy = 0.0;   // final epoch
    double train_accuracy = 0.0;  // final epoch
    double final_train_ot = 0.0;  // final-epoch mean structure distance, train split
    double final_test_ot = 0.0;
    std::vector<MetricsRecord> records;  // two per epoch (train, test)
    ModelParams params;
};

/// Trains on the out-of-fold graphs for config.epochs epochs of shuffled
/// mini-batches (reg updated per batch by default), evaluating both splits
/// each epoch. Fold seed = config.seed XOR fold_id.
FoldResult train_fold(const PreparedDataset& dataset, const FoldSplit& split,
                      std::size_t fold_id, const TrainConfig& config,
                      const TrainHooks& hooks = {});

struct Report {
    std::string run_id;
    std::size_t folds = 0;
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // population std over folds
    double mean_final_train_ot = 0.0;
    double mean_final_test_ot = 0.0;
};

/// Mean/std aggregation of per-fold final accuracies.
Report summarize(const std::string& run_id, const std::vector<FoldResult>& folds);

/// Stratified k-fold cross-validation; every graph is tested exactly once.
/// `out_folds`, when given, receives the per-fold results (with parameters).
Report cross_validate(const PreparedDataset& dataset, const TrainConfig& config, std::size_t k,
                      const TrainHooks& hooks = {}, std::vector<FoldResult>* out_folds = nullptr);

enum class AblationAxis { Distance, Adaptive, Fusion };
AblationAxis ablation_axis_from(const std::string& s);

struct AblationCell {
    std::string label;  // e.g. "distance=euclidean", "fusion=max reg=off"
    Report report;
};

/// Matched configurations differing only on the axis:
///   distance  — {manhattan, euclidean, cosine, ot};
///   adaptive  — reg in {fixed_one, adaptive} with OT distance (reports the
///               final mean OT distances alongside the accuracies);
///   fusion    — {max, concat, hadamard} x reg in {adaptive, off}.
std::vector<AblationCell> run_ablation(const PreparedDataset& dataset, const TrainConfig& base,
                                       AblationAxis axis, std::size_t folds,
                                       const TrainHooks& hooks = {});

struct EvalSummary {
    std::size_t count = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    double mean_l0 = 0.0;
    double mean_structure = 0.0;
};

/// Deterministic eval-mode pass over every graph in the dataset.
EvalSummary evaluate_dataset(const PreparedDataset& dataset, const ModelParams& params,
                             const TrainConfig& config);

}  // namespace amosl
