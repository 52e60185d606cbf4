#include "amosl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <ostream>
#include <sstream>

#include "amosl/errors.hpp"
#include "amosl/rng.hpp"

namespace amosl {

void update_reg(RegState& state, double p_mean) {
    if (!(p_mean >= 0.0 && p_mean <= 1.0)) {
        std::ostringstream os;
        os << "update_reg: mean P-hat must lie in [0,1], got " << p_mean;
        throw ValueError(os.str());
    }
    if (state.t == 0) {
        state.reg = 1.0 - p_mean;
    } else {
        state.reg = state.gamma * state.reg + (1.0 - state.gamma) * (1.0 - p_mean);
    }
    ++state.t;
}

double total_loss(double l0, double reg, double ot, double lambda) {
    return l0 + lambda * reg * ot;
}

AdamState make_adam_state(const std::vector<ParamRef>& params) {
    AdamState st;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const ParamRef& p : params) {
        st.m.emplace_back(p.value->rows(), p.value->cols());
        st.v.emplace_back(p.value->rows(), p.value->cols());
    }
    return st;
}

void adam_step(std::vector<ParamRef>& params, const std::vector<Matrix>& grads,
               AdamState& state, double lr) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    if (grads.size() != params.size() || state.m.size() != params.size()) {
        throw ShapeError("adam_step: gradient/state count does not match the parameters");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        const Matrix& g = grads[k];
        const Matrix& p = *params[k].value;
        if (g.rows() != p.rows() || g.cols() != p.cols()) {
            throw ShapeError("adam_step: gradient shape mismatch for " + params[k].name);
        }
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g.raw()[i])) {
                std::ostringstream os;
                os << "adam_step: non-finite gradient in " << params[k].name << " at flat index "
                   << i << " (" << g.raw()[i] << "); step aborted";
                throw SolverError(os.str());
            }
        }
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k].value;
        Matrix& m = state.m[k];
        Matrix& v = state.v[k];
        const Matrix& g = grads[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m.raw()[i] = kBeta1 * m.raw()[i] + (1.0 - kBeta1) * g.raw()[i];
            v.raw()[i] = kBeta2 * v.raw()[i] + (1.0 - kBeta2) * g.raw()[i] * g.raw()[i];
            const double mhat = m.raw()[i] / c1;
            const double vhat = v.raw()[i] / c2;
            p.raw()[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
        }
    }
}

ForwardOut forward_sample(Tape& tape, const GraphSample& sample, const ModalityOperators& ops,
                          const ModelIds& ids, const TrainConfig& config) {
    const ValueId x = tape.input(sample.x, false);
    const ValueId z1 = tower_forward(tape, ops.m1, ids.tower1, x, config.dropout);
    const ValueId z2 = tower_forward(tape, ops.m2, ids.tower2, x, config.dropout);

    ForwardOut out;
    if (config.distance == DistanceKind::Ot) {
        out.structure = amosl_term(tape, z1, z2, config.fusion, config.grad);
    } else {
        out.structure = tape.modality_distance_op(z1, z2, config.distance);
    }

    const ValueId fused = fuse(tape, z1, z2, config.fusion);
    const ValueId h = compat_and_readout(tape, fused, ids.fc1_w, ids.fc1_b, config.dropout);
    const ValueId logits = logits_head(tape, h, ids.cls_w, ids.cls_b);
    out.l0 = tape.softmax_cross_entropy(logits, sample.label);

    out.probs = softmax_row(tape.value(logits));
    out.l0_value = tape.value(out.l0)(0, 0);
    out.structure_value = tape.value(out.structure)(0, 0);
    out.p_true = out.probs(0, sample.label);
    out.predicted = 0;
    for (std::size_t c = 1; c < out.probs.cols(); ++c) {
        if (out.probs(0, c) > out.probs(0, out.predicted)) out.predicted = c;
    }
    out.correct = out.predicted == sample.label;
    return out;
}

ValueId loss_root(Tape& tape, const ForwardOut& out, const TrainConfig& config, double reg) {
    if (config.reg_mode == RegMode::Off) return out.l0;
    return tape.add(out.l0, tape.scalar_scale(out.structure, config.lambda * reg));
}

RegUpdate reg_update_from(const std::string& s) {
    if (s == "batch") return RegUpdate::Batch;
    if (s == "epoch") return RegUpdate::Epoch;
    throw ValueError("unknown reg update cadence '" + s + "' (batch|epoch)");
}

namespace {

struct SplitStats {
    std::size_t correct = 0;
    double accuracy = 0.0;
    double mean_l0 = 0.0;
    double mean_structure = 0.0;
};

SplitStats eval_split(const PreparedDataset& dataset, const std::vector<ModalityOperators>& ops,
                      const ModelParams& params, const TrainConfig& config,
                      const std::vector<std::size_t>& idxs) {
    SplitStats st;
    if (idxs.empty()) return st;
    for (std::size_t idx : idxs) {
        Tape tape(0, TapeMode::Eval);
        const ModelIds ids = register_params(tape, params);
        const ForwardOut out = forward_sample(tape, dataset.graphs[idx], ops[idx], ids, config);
        st.correct += out.correct ? 1 : 0;
        st.mean_l0 += out.l0_value;
        st.mean_structure += out.structure_value;
    }
    const double n = static_cast<double>(idxs.size());
    st.accuracy = static_cast<double>(st.correct) / n;
    st.mean_l0 /= n;
    st.mean_structure /= n;
    return st;
}

}  // namespace

FoldResult train_fold(const PreparedDataset& dataset, const FoldSplit& split,
                      std::size_t fold_id, const TrainConfig& config, const TrainHooks& hooks) {
    config.validate();
    if (split.fold_of.size() != dataset.graphs.size()) {
        throw ValueError("train_fold: fold assignment does not cover the dataset");
    }
    if (fold_id >= split.k) throw ValueError("train_fold: fold id out of range");
    const std::vector<std::size_t> train_idx = split.train_indices(fold_id);
    const std::vector<std::size_t> test_idx = split.test_indices(fold_id);
    if (train_idx.empty()) throw ValueError("train_fold: empty training split");

    const std::uint64_t fold_seed = config.seed ^ static_cast<std::uint64_t>(fold_id);
    const ConvSpec conv{config.conv, config.cheb_k};
    ModelParams params =
        ModelParams::init(dataset.feature_dim, dataset.classes, conv, config.fusion,
                          ModelDims{}, fold_seed);
    params.modality2 = config.modality2;

    std::vector<ModalityOperators> ops;
    ops.reserve(dataset.graphs.size());
    for (const GraphSample& g : dataset.graphs) {
        ops.push_back(build_modality_operators(g, conv, config.modality2));
    }

    std::vector<ParamRef> refs = params.param_refs();
    AdamState adam = make_adam_state(refs);
    RegState reg{0.0, config.gamma, 0};
    std::mt19937_64 order_rng(mix_seed(fold_seed, 0xF01D));
    std::mt19937_64 tape_seeds(mix_seed(fold_seed, 0x7A9E));

    FoldResult result;
    result.fold = fold_id;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::size_t> order = train_idx;
        shuffle(order, order_rng);

        double epoch_p_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t stop = std::min(order.size(), start + config.batch);
            const std::size_t bsz = stop - start;

            std::vector<std::unique_ptr<Tape>> tapes;
            std::vector<ModelIds> ids;
            std::vector<ForwardOut> outs;
            tapes.reserve(bsz);
            ids.reserve(bsz);
            outs.reserve(bsz);
            double batch_p = 0.0;
            for (std::size_t b = start; b < stop; ++b) {
                tapes.push_back(std::make_unique<Tape>(tape_seeds(), TapeMode::Train));
                ids.push_back(register_params(*tapes.back(), params));
                outs.push_back(forward_sample(*tapes.back(), dataset.graphs[order[b]],
                                              ops[order[b]], ids.back(), config));
                batch_p += outs.back().p_true;
            }
            batch_p /= static_cast<double>(bsz);
            epoch_p_sum += batch_p * static_cast<double>(bsz);

            // Algorithm 1 reads P-hat first, then its reg enters this step's
            // loss; the epoch cadence applies the update after the epoch.
            if (config.reg_mode == RegMode::Adaptive && hooks.reg_update == RegUpdate::Batch) {
                update_reg(reg, batch_p);
            }
            const double coeff = config.reg_mode == RegMode::FixedOne ? 1.0 : reg.reg;

            std::vector<Matrix> grads;
            grads.reserve(refs.size());
            for (const ParamRef& r : refs) grads.emplace_back(r.value->rows(), r.value->cols());
            for (std::size_t b = 0; b < bsz; ++b) {
                const ValueId root = loss_root(*tapes[b], outs[b], config, coeff);
                tapes[b]->backward(root);
                const std::vector<ValueId> pids = param_ids(ids[b]);
                for (std::size_t k = 0; k < pids.size(); ++k) {
                    add_in_place(grads[k], tapes[b]->grad(pids[k]));
                }
            }
            const double inv = 1.0 / static_cast<double>(bsz);
            for (Matrix& g : grads) {
                for (std::size_t i = 0; i < g.size(); ++i) g.raw()[i] *= inv;
            }
            adam_step(refs, grads, adam, config.lr);
        }
        if (config.reg_mode == RegMode::Adaptive && hooks.reg_update == RegUpdate::Epoch) {
            update_reg(reg, epoch_p_sum / static_cast<double>(order.size()));
        }

        const SplitStats train_stats = eval_split(dataset, ops, params, config, train_idx);
        const SplitStats test_stats = eval_split(dataset, ops, params, config, test_idx);
        std::int64_t wall_ms = 0;
        if (hooks.timing) {
            wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        }
        const auto record = [&](const char* split_name, const SplitStats& st) {
            MetricsRecord rec;
            rec.run_id = hooks.run_id;
            rec.fold = fold_id;
            rec.epoch = epoch;
            rec.split = split_name;
            rec.l0 = st.mean_l0;
            rec.ot_distance = st.mean_structure;
            rec.reg = reg.reg;
            rec.lambda = config.lambda;
            rec.accuracy = st.accuracy;
            rec.wall_ms = wall_ms;
            if (hooks.metrics) hooks.metrics->write(rec);
            result.records.push_back(std::move(rec));
        };
        record("train", train_stats);
        record("test", test_stats);
        if (hooks.progress) {
            (*hooks.progress) << "fold " << fold_id << " epoch " << epoch << " train_acc "
                              << train_stats.accuracy << " test_acc " << test_stats.accuracy
                              << " ot " << train_stats.mean_structure << " reg " << reg.reg
                              << "\n";
        }
        result.train_accuracy = train_stats.accuracy;
        result.test_accuracy = test_stats.accuracy;
        result.final_train_ot = train_stats.mean_structure;
        result.final_test_ot = test_stats.mean_structure;
    }
    result.params = std::move(params);
    return result;
}

Report summarize(const std::string& run_id, const std::vector<FoldResult>& folds) {
    if (folds.empty()) throw ValueError("summarize: no folds");
    Report rep;
    rep.run_id = run_id;
    rep.folds = folds.size();
    for (const FoldResult& f : folds) {
        rep.fold_accuracy.push_back(f.test_accuracy);
        rep.mean_accuracy += f.test_accuracy;
        rep.mean_final_train_ot += f.final_train_ot;
        rep.mean_final_test_ot += f.final_test_ot;
    }
    const double n = static_cast<double>(folds.size());
    rep.mean_accuracy /= n;
    rep.mean_final_train_ot /= n;
    rep.mean_final_test_ot /= n;
    double var = 0.0;
    for (double a : rep.fold_accuracy) var += (a - rep.mean_accuracy) * (a - rep.mean_accuracy);
    rep.std_accuracy = std::sqrt(var / n);
    return rep;
}

Report cross_validate(const PreparedDataset& dataset, const TrainConfig& config, std::size_t k,
                      const TrainHooks& hooks, std::vector<FoldResult>* out_folds) {
    config.validate();
    TrainHooks fold_hooks = hooks;
    if (fold_hooks.run_id.empty()) {
        fold_hooks.run_id =
            run_id_for(config.canonical() + "folds = " + std::to_string(k) + "\n");
    }
    const FoldSplit split = make_folds(dataset.labels(), k, config.seed);
    std::vector<FoldResult> folds;
    folds.reserve(k);
    for (std::size_t fold = 0; fold < k; ++fold) {
        folds.push_back(train_fold(dataset, split, fold, config, fold_hooks));
    }
    Report rep = summarize(fold_hooks.run_id, folds);
    if (out_folds) *out_folds = std::move(folds);
    return rep;
}

AblationAxis ablation_axis_from(const std::string& s) {
    if (s == "distance") return AblationAxis::Distance;
    if (s == "adaptive") return AblationAxis::Adaptive;
    if (s == "fusion") return AblationAxis::Fusion;
    throw ValueError("unknown ablation axis '" + s + "' (distance|adaptive|fusion)");
}

std::vector<AblationCell> run_ablation(const PreparedDataset& dataset, const TrainConfig& base,
                                       AblationAxis axis, std::size_t folds,
                                       const TrainHooks& hooks) {
    std::vector<std::pair<std::string, TrainConfig>> cells;
    switch (axis) {
        case AblationAxis::Distance:
            for (DistanceKind d : {DistanceKind::Manhattan, DistanceKind::Euclidean,
                                   DistanceKind::Cosine, DistanceKind::Ot}) {
                TrainConfig c = base;
                c.distance = d;
                cells.emplace_back("distance=" + to_string(d), c);
            }
            break;
        case AblationAxis::Adaptive:
            for (RegMode m : {RegMode::FixedOne, RegMode::Adaptive}) {
                TrainConfig c = base;
                c.distance = DistanceKind::Ot;
                c.reg_mode = m;
                cells.emplace_back("reg=" + to_string(m), c);
            }
            break;
        case AblationAxis::Fusion:
            for (FusionKind f : {FusionKind::Max, FusionKind::Concat, FusionKind::Hadamard}) {
                for (RegMode m : {RegMode::Adaptive, RegMode::Off}) {
                    TrainConfig c = base;
                    c.fusion = f;
                    c.reg_mode = m;
                    cells.emplace_back("fusion=" + to_string(f) + " reg=" + to_string(m), c);
                }
            }
            break;
    }
    std::vector<AblationCell> out;
    out.reserve(cells.size());
    for (auto& [label, cfg] : cells) {
        TrainHooks cell_hooks = hooks;
        cell_hooks.run_id.clear();  // derive per-cell ids from the cell config
        if (hooks.progress) (*hooks.progress) << "ablation cell: " << label << "\n";
        AblationCell cell;
        cell.label = label;
        cell.report = cross_validate(dataset, cfg, folds, cell_hooks);
        out.push_back(std::move(cell));
    }
    return out;
}

EvalSummary evaluate_dataset(const PreparedDataset& dataset, const ModelParams& params,
                             const TrainConfig& config) {
    if (dataset.feature_dim != params.in_dim || dataset.classes != params.classes) {
        throw ShapeError("evaluate_dataset: dataset does not match the model layout");
    }
    TrainConfig cfg = config;
    cfg.fusion = params.fusion;  // the checkpoint is authoritative
    std::vector<ModalityOperators> ops;
    ops.reserve(dataset.graphs.size());
    std::vector<std::size_t> all;
    all.reserve(dataset.graphs.size());
    for (std::size_t g = 0; g < dataset.graphs.size(); ++g) {
        ops.push_back(build_modality_operators(dataset.graphs[g], params.conv, params.modality2));
        all.push_back(g);
    }
    const SplitStats st = eval_split(dataset, ops, params, cfg, all);
    EvalSummary sum;
    sum.count = dataset.graphs.size();
    sum.correct = st.correct;
    sum.accuracy = st.accuracy;
    sum.mean_l0 = st.mean_l0;
    sum.mean_structure = st.mean_structure;
    return sum;
}

}  // namespace amosl
