#include "amosl/audit.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <utility>

#include "amosl/dataset.hpp"
#include "amosl/errors.hpp"
#include "amosl/gradcheck.hpp"
#include "amosl/model.hpp"
#include "amosl/rng.hpp"
#include "amosl/trainer.hpp"
#include "amosl/transport.hpp"

namespace amosl {

bool AuditSuite::all_passed() const {
    return std::all_of(cases.begin(), cases.end(), [](const AuditCase& c) { return c.passed; });
}

void print_suite(const AuditSuite& suite, std::ostream& out) {
    for (const AuditCase& c : suite.cases) {
        out << (c.passed ? "[ok]   " : "[FAIL] ") << c.name << "  max_rel=" << c.max_rel_err
            << " max_abs=" << c.max_abs_err << " checked=" << c.checked << " (tol " << c.tol
            << ")";
        if (!c.detail.empty()) out << "  " << c.detail;
        out << "\n";
    }
}

namespace {

constexpr std::uint64_t kAuditSeed = 0xA0D17ULL;

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t k = 0; k < m.size(); ++k) m.raw()[k] = normal01(rng);
    return m;
}

/// Entries with |x| >= margin, mixed signs: keeps relu/manhattan kinks at
/// least `margin` away so h = 1e-5 differences stay one-sided.
Matrix random_offset_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                            double margin) {
    Matrix m(rows, cols);
    for (std::size_t k = 0; k < m.size(); ++k) {
        const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        m.raw()[k] = sign * (margin + uniform01(rng));
    }
    return m;
}

void run_case(AuditSuite& suite, const std::string& name, double tol, const ScalarBuilder& build,
              const std::vector<Matrix>& inputs, double step = 1e-5) {
    AuditCase c;
    c.name = name;
    c.tol = tol;
    try {
        GradCheckOptions opts;
        opts.step = step;
        opts.seed = kAuditSeed;
        const GradCheckReport rep = finite_diff_check(build, inputs, opts);
        c.max_rel_err = rep.max_rel_err;
        c.max_abs_err = rep.max_abs_err;
        c.checked = rep.entries_checked;
        c.passed = rep.passed(tol);
        if (!c.passed) {
            std::ostringstream os;
            os << "worst entry: input " << rep.worst_input << " (" << rep.worst_row << ","
               << rep.worst_col << ")";
            c.detail = os.str();
        }
    } catch (const std::exception& e) {
        c.passed = false;
        c.detail = e.what();
    }
    suite.cases.push_back(std::move(c));
}

/// root = U * M * V with fixed random row/column weights, so every entry of M
/// shapes the scalar.
ScalarBuilder scalarized(std::function<ValueId(Tape&, const std::vector<ValueId>&)> expr,
                         std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    Matrix u(1, rows), v(cols, 1);
    for (std::size_t k = 0; k < rows; ++k) u.raw()[k] = 0.5 + uniform01(rng);
    for (std::size_t k = 0; k < cols; ++k) v.raw()[k] = 0.5 + uniform01(rng);
    return [expr = std::move(expr), u, v](Tape& t, const std::vector<ValueId>& ids) {
        const ValueId m = expr(t, ids);
        return t.matmul(t.matmul(t.input(u, false), m), t.input(v, false));
    };
}

// ---------------------------------------------------------------------------
// Random transport instances (shared by the ot_loss case and the mode audit)
// ---------------------------------------------------------------------------

struct Instance {
    Matrix cost;
    std::vector<double> w1, w2;
};

Instance random_instance(std::mt19937_64& rng) {
    for (;;) {
        const std::size_t m = 2 + static_cast<std::size_t>(uniform_index(rng, 4));
        const std::size_t n = 2 + static_cast<std::size_t>(uniform_index(rng, 4));
        Instance ins;
        ins.cost = Matrix(m, n);
        for (std::size_t k = 0; k < ins.cost.size(); ++k) {
            ins.cost.raw()[k] = uniform(rng, 0.2, 2.0);
        }
        ins.w1.resize(m);
        ins.w2.resize(n);
        const bool supply_min = uniform01(rng) < 0.5;
        for (double& w : ins.w1) w = uniform(rng, 0.5, 1.5) * (supply_min ? 1.0 : 1.4);
        for (double& w : ins.w2) w = uniform(rng, 0.5, 1.5) * (supply_min ? 1.4 : 1.0);
        double t1 = 0.0, t2 = 0.0;
        for (double w : ins.w1) t1 += w;
        for (double w : ins.w2) t2 += w;
        // An exactly (or nearly) balanced pair puts the value on the kink
        // between the two capacity regimes, where one-sided derivatives differ.
        if (std::abs(t1 - t2) > 0.1 * std::max(t1, t2)) return ins;
    }
}

using Support = std::set<std::pair<std::size_t, std::size_t>>;

Support support_of(const TransportPlan& plan) {
    Support s;
    const auto cells = plan.support(1e-7);
    s.insert(cells.begin(), cells.end());
    return s;
}

struct FdProbe {
    double fd = 0.0;
    bool stable = false;  // optimal support unchanged at both probe points
};

FdProbe fd_probe(Instance& ins, const Support& base, double* slot, double h) {
    FdProbe p;
    const double saved = *slot;
    *slot = saved + h;
    const TransportPlan hi = solve_transport(ins.cost, ins.w1, ins.w2);
    *slot = saved - h;
    const TransportPlan lo = solve_transport(ins.cost, ins.w1, ins.w2);
    *slot = saved;
    p.fd = (hi.value - lo.value) / (2.0 * h);
    p.stable = support_of(hi) == base && support_of(lo) == base;
    return p;
}

/// True when the optimal support survives a ±h probe of every coefficient.
bool stable_instance(Instance& ins, double h) {
    const TransportPlan plan = solve_transport(ins.cost, ins.w1, ins.w2);
    const Support base = support_of(plan);
    for (std::size_t i = 0; i < ins.cost.rows(); ++i) {
        for (std::size_t j = 0; j < ins.cost.cols(); ++j) {
            if (!fd_probe(ins, base, &ins.cost(i, j), h).stable) return false;
        }
    }
    for (double& w : ins.w1) {
        if (!fd_probe(ins, base, &w, h).stable) return false;
    }
    for (double& w : ins.w2) {
        if (!fd_probe(ins, base, &w, h).stable) return false;
    }
    return true;
}

void transport_mode_audit(AuditSuite& suite, TransportGradMode mode, double damping) {
    AuditCase c;
    c.name = std::string("transport_gradients/") +
             (mode == TransportGradMode::Envelope ? "envelope" : "kkt_qp");
    c.tol = 1e-4;
    constexpr std::size_t kTarget = 25;
    constexpr double kStep = 1e-5;
    std::mt19937_64 rng(mix_seed(kAuditSeed, mode == TransportGradMode::Envelope ? 1 : 2));
    std::size_t accepted = 0, attempts = 0;
    try {
        while (accepted < kTarget && attempts < 10 * kTarget) {
            ++attempts;
            Instance ins = random_instance(rng);
            const TransportPlan plan = solve_transport(ins.cost, ins.w1, ins.w2);
            const Support base = support_of(plan);
            TransportGradOptions opts;
            opts.mode = mode;
            opts.damping = damping;
            const TransportGrads g = transport_gradients(plan, ins.cost, ins.w1, ins.w2, opts);

            bool degenerate = false;
            double rel = 0.0, abs_err = 0.0;
            std::size_t checked = 0;
            auto compare = [&](double analytic, double* slot) {
                if (degenerate) return;
                const FdProbe p = fd_probe(ins, base, slot, kStep);
                if (!p.stable) {
                    degenerate = true;
                    return;
                }
                const double err = std::abs(analytic - p.fd);
                abs_err = std::max(abs_err, err);
                rel = std::max(rel, err / std::max(1.0, std::abs(p.fd)));
                ++checked;
            };
            for (std::size_t i = 0; i < ins.cost.rows() && !degenerate; ++i) {
                for (std::size_t j = 0; j < ins.cost.cols() && !degenerate; ++j) {
                    compare(g.dcost(i, j), &ins.cost(i, j));
                }
            }
            for (std::size_t i = 0; i < ins.w1.size() && !degenerate; ++i) {
                compare(g.dw1[i], &ins.w1[i]);
            }
            for (std::size_t j = 0; j < ins.w2.size() && !degenerate; ++j) {
                compare(g.dw2[j], &ins.w2[j]);
            }
            if (degenerate) continue;
            ++accepted;
            c.checked += checked;
            c.max_rel_err = std::max(c.max_rel_err, rel);
            c.max_abs_err = std::max(c.max_abs_err, abs_err);
        }
        if (accepted < kTarget) {
            c.passed = false;
            c.detail = "too many degenerate draws";
        } else {
            c.passed = c.max_rel_err <= c.tol;
        }
    } catch (const std::exception& e) {
        c.passed = false;
        c.detail = e.what();
    }
    suite.cases.push_back(std::move(c));
}

// ---------------------------------------------------------------------------
// End-to-end toy network
// ---------------------------------------------------------------------------

ModelIds ids_from_flat(const std::vector<ValueId>& flat, std::size_t layers, std::size_t k) {
    ModelIds ids;
    std::size_t p = 0;
    for (TowerIds* tower : {&ids.tower1, &ids.tower2}) {
        for (std::size_t l = 0; l < layers; ++l) {
            std::vector<ValueId> per_k;
            for (std::size_t s = 0; s < k; ++s) per_k.push_back(flat.at(p++));
            tower->theta.push_back(std::move(per_k));
        }
    }
    ids.fc1_w = flat.at(p++);
    ids.fc1_b = flat.at(p++);
    ids.cls_w = flat.at(p++);
    ids.cls_b = flat.at(p++);
    return ids;
}

GraphSample toy_sample(std::mt19937_64& rng, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                       std::size_t n, std::size_t d, std::size_t label, std::uint64_t s_seed) {
    GraphSample g;
    g.x = random_matrix(rng, n, d);
    g.a = Matrix(n, n);
    for (const auto& [i, j] : edges) {
        g.a(i, j) = 1.0;
        g.a(j, i) = 1.0;
    }
    g.s = synthesize_modality(g.x, s_seed);
    g.label = label;
    return g;
}

void network_audit(AuditSuite& suite, double damping) {
    constexpr std::size_t kNodes = 5, kFeat = 3, kChebK = 2, kLayers = 3;
    std::mt19937_64 rng(mix_seed(kAuditSeed, 77));

    const GraphSample g0 =
        toy_sample(rng, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}}, kNodes, kFeat, 0, 101);
    const GraphSample g1 =
        toy_sample(rng, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}}, kNodes, kFeat, 1, 202);

    const ConvSpec conv{ConvKind::ChebNet, kChebK};
    TrainConfig cfg;
    cfg.conv = conv.kind;
    cfg.cheb_k = conv.cheb_k;
    cfg.fusion = FusionKind::Max;
    cfg.distance = DistanceKind::Ot;
    cfg.reg_mode = RegMode::FixedOne;
    cfg.lambda = 0.01;
    cfg.dropout = 0.0;
    cfg.grad = {TransportGradMode::KktQp, damping};

    const ModalityOperators ops0 = build_modality_operators(g0, conv, Modality2Mode::Dense);
    const ModalityOperators ops1 = build_modality_operators(g1, conv, Modality2Mode::Dense);

    ModelParams params = ModelParams::init(kFeat, 2, conv, cfg.fusion, ModelDims{4, 6, 8, 8},
                                           mix_seed(kAuditSeed, 5));
    std::vector<Matrix> inputs;
    for (const auto& [name, value] : std::as_const(params).param_refs()) {
        (void)name;
        inputs.push_back(*value);
    }

    const ScalarBuilder build = [&, cfg](Tape& t, const std::vector<ValueId>& flat) {
        const ModelIds ids = ids_from_flat(flat, kLayers, kChebK);
        const ForwardOut o0 = forward_sample(t, g0, ops0, ids, cfg);
        const ForwardOut o1 = forward_sample(t, g1, ops1, ids, cfg);
        const ValueId sum = t.add(loss_root(t, o0, cfg, 1.0), loss_root(t, o1, cfg, 1.0));
        return t.scalar_scale(sum, 0.5);
    };
    run_case(suite, "network/kkt_qp", 1e-3, build, inputs);
}

}  // namespace

AuditSuite run_gradient_audit(double kkt_damping, AuditFilter filter) {
    AuditSuite suite;
    std::mt19937_64 rng(kAuditSeed);
    constexpr double kTol = 1e-6;

    {
        const Matrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 4, 2);
        run_case(suite, "matmul", kTol,
                 scalarized([](Tape& t, const std::vector<ValueId>& v) { return t.matmul(v[0], v[1]); },
                            3, 2, rng),
                 {a, b});
    }
    {
        const Matrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 3, 4);
        run_case(suite, "add", kTol,
                 scalarized([](Tape& t, const std::vector<ValueId>& v) { return t.add(v[0], v[1]); },
                            3, 4, rng),
                 {a, b});
    }
    {
        const Matrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 3, 4);
        run_case(suite, "hadamard", kTol,
                 scalarized(
                     [](Tape& t, const std::vector<ValueId>& v) { return t.hadamard(v[0], v[1]); },
                     3, 4, rng),
                 {a, b});
    }
    {
        const Matrix a = random_offset_matrix(rng, 3, 4, 0.2);
        run_case(suite, "relu", kTol,
                 scalarized([](Tape& t, const std::vector<ValueId>& v) { return t.relu(v[0]); }, 3,
                            4, rng),
                 {a});
    }
    {
        const Matrix a = random_matrix(rng, 3, 4);
        run_case(suite, "dropout", kTol,
                 scalarized(
                     [](Tape& t, const std::vector<ValueId>& v) { return t.dropout(v[0], 0.3); },
                     3, 4, rng),
                 {a});
    }
    {
        const Matrix a = random_matrix(rng, 3, 4);
        Matrix b = a;
        for (std::size_t k = 0; k < b.size(); ++k) {
            const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
            b.raw()[k] += sign * (0.2 + uniform01(rng));
        }
        run_case(suite, "elem_max", kTol,
                 scalarized(
                     [](Tape& t, const std::vector<ValueId>& v) { return t.elem_max(v[0], v[1]); },
                     3, 4, rng),
                 {a, b});
    }
    {
        Matrix a = random_matrix(rng, 4, 3);
        for (std::size_t j = 0; j < a.cols(); ++j) {  // one clear column winner
            a(uniform_index(rng, 4), j) += 1.5;
        }
        run_case(suite, "col_max", kTol,
                 scalarized([](Tape& t, const std::vector<ValueId>& v) { return t.col_max(v[0]); },
                            1, 3, rng),
                 {a});
    }
    {
        const Matrix a = random_matrix(rng, 3, 2), b = random_matrix(rng, 3, 3);
        run_case(suite, "concat_cols", kTol,
                 scalarized(
                     [](Tape& t, const std::vector<ValueId>& v) {
                         return t.concat_cols(v[0], v[1]);
                     },
                     3, 5, rng),
                 {a, b});
    }
    {
        const Matrix a = random_matrix(rng, 3, 4);
        run_case(suite, "row_sum", kTol,
                 scalarized([](Tape& t, const std::vector<ValueId>& v) { return t.row_sum(v[0]); },
                            3, 1, rng),
                 {a});
    }
    {
        const Matrix a = random_matrix(rng, 3, 3);
        run_case(suite, "scalar_scale", kTol,
                 scalarized(
                     [](Tape& t, const std::vector<ValueId>& v) {
                         return t.scalar_scale(v[0], 1.7);
                     },
                     3, 3, rng),
                 {a});
    }
    {
        const Matrix z1 = random_offset_matrix(rng, 4, 3, 0.2);
        const Matrix z2 = random_offset_matrix(rng, 5, 3, 0.2);
        run_case(suite, "cosine_cost", kTol,
                 scalarized(
                     [](Tape& t, const std::vector<ValueId>& v) {
                         return t.cosine_cost(v[0], v[1]);
                     },
                     4, 5, rng),
                 {z1, z2});
    }
    {
        const Matrix logits = random_matrix(rng, 1, 4);
        run_case(suite, "softmax_cross_entropy", kTol,
                 [](Tape& t, const std::vector<ValueId>& v) {
                     return t.softmax_cross_entropy(v[0], 2);
                 },
                 {logits});
    }
    {
        const Matrix z1 = random_offset_matrix(rng, 4, 3, 0.2);
        Matrix z2 = z1;
        for (std::size_t k = 0; k < z2.size(); ++k) {
            const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
            z2.raw()[k] += sign * (0.2 + uniform01(rng));
        }
        for (DistanceKind metric :
             {DistanceKind::Manhattan, DistanceKind::Euclidean, DistanceKind::Cosine}) {
            run_case(suite, "modality_distance/" + to_string(metric), kTol,
                     [metric](Tape& t, const std::vector<ValueId>& v) {
                         return t.modality_distance_op(v[0], v[1], metric);
                     },
                     {z1, z2});
        }
    }
    // ot_loss on a non-degenerate instance, per requested gradient mode.
    {
        std::mt19937_64 ins_rng(mix_seed(kAuditSeed, 9));
        Instance ins = random_instance(ins_rng);
        for (int tries = 0; tries < 100 && !stable_instance(ins, 1e-5); ++tries) {
            ins = random_instance(ins_rng);
        }
        const auto modes = std::vector<std::pair<std::string, TransportGradMode>>{
            {"ot_loss/envelope", TransportGradMode::Envelope},
            {"ot_loss/kkt_qp", TransportGradMode::KktQp}};
        for (const auto& [name, mode] : modes) {
            if (filter == AuditFilter::EnvelopeOnly && mode != TransportGradMode::Envelope) continue;
            if (filter == AuditFilter::KktQpOnly && mode != TransportGradMode::KktQp) continue;
            TransportGradOptions opts;
            opts.mode = mode;
            opts.damping = kkt_damping;
            run_case(suite, name, kTol,
                     [opts](Tape& t, const std::vector<ValueId>& v) {
                         return t.ot_loss(v[0], v[1], v[2], opts);
                     },
                     {ins.cost, Matrix::column(ins.w1), Matrix::column(ins.w2)});
        }
    }

    if (filter != AuditFilter::KktQpOnly) {
        transport_mode_audit(suite, TransportGradMode::Envelope, kkt_damping);
    }
    if (filter != AuditFilter::EnvelopeOnly) {
        transport_mode_audit(suite, TransportGradMode::KktQp, kkt_damping);
    }
    network_audit(suite, kkt_damping);
    return suite;
}

OracleResult run_ot_oracle(std::size_t trials, std::uint64_t seed) {
    OracleResult res;
    res.trials = trials;
    std::mt19937_64 rng(seed);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t m = 1 + uniform_index(rng, 4);
        const std::size_t n = 1 + uniform_index(rng, 4);
        Matrix cost(m, n);
        for (std::size_t k = 0; k < cost.size(); ++k) cost.raw()[k] = uniform(rng, 0.0, 2.0);
        std::vector<double> w1(m), w2(n);
        for (double& w : w1) w = 1.0 + static_cast<double>(uniform_index(rng, 3));
        for (double& w : w2) w = 1.0 + static_cast<double>(uniform_index(rng, 3));
        const double lp = solve_transport(cost, w1, w2).value;
        const double bf = brute_force_transport(cost, w1, w2);
        const double gap = std::abs(lp - bf);
        res.max_gap = std::max(res.max_gap, gap);
        if (gap > res.tol) ++res.mismatches;
    }
    return res;
}

}  // namespace amosl
