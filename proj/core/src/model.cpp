#include "amosl/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "amosl/errors.hpp"
#include "amosl/rng.hpp"
#include "amosl/transport.hpp"

namespace amosl {
namespace {

OperatorStack stack_for(const Matrix& adjacency, const ConvSpec& spec) {
    OperatorStack s;
    if (spec.kind == ConvKind::ChebNet) {
        s.mats = cheb_basis(scaled_laplacian(normalized_laplacian(adjacency)), spec.cheb_k);
    } else {
        s.mats = {gcn_norm_adjacency(adjacency)};
    }
    return s;
}

Matrix glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix w(rows, cols);
    for (std::size_t k = 0; k < w.size(); ++k) w.raw()[k] = uniform(rng, -bound, bound);
    return w;
}

TowerParams init_tower(const std::vector<std::size_t>& widths, std::size_t slices,
                       std::mt19937_64& rng) {
    TowerParams t;
    for (std::size_t layer = 0; layer + 1 < widths.size(); ++layer) {
        std::vector<Matrix> per_k;
        per_k.reserve(slices);
        for (std::size_t k = 0; k < slices; ++k) {
            per_k.push_back(glorot(widths[layer], widths[layer + 1], rng));
        }
        t.theta.push_back(std::move(per_k));
    }
    return t;
}

}  // namespace

ModalityOperators build_modality_operators(const GraphSample& sample, const ConvSpec& spec,
                                           Modality2Mode mode) {
    Matrix a2(sample.s.rows(), sample.s.cols());
    if (mode == Modality2Mode::Dense) {
        a2 = sample.s;
        for (std::size_t i = 0; i < a2.rows(); ++i) a2(i, i) = 0.0;
    } else {
        a2 = hadamard(sample.a, sample.s);
    }
    ModalityOperators ops;
    ops.m1 = stack_for(sample.a, spec);
    ops.m2 = stack_for(a2, spec);
    return ops;
}

ModelParams ModelParams::init(std::size_t in_dim, std::size_t classes, const ConvSpec& conv,
                              FusionKind fusion, const ModelDims& dims, std::uint64_t seed) {
    if (in_dim == 0) throw ValueError("ModelParams: feature dimension must be >= 1");
    if (classes < 2) throw ValueError("ModelParams: need at least two classes");
    if (conv.kind == ConvKind::ChebNet && conv.cheb_k == 0) {
        throw ValueError("ModelParams: Chebyshev degree must be >= 1");
    }
    ModelParams p;
    p.conv = conv;
    p.fusion = fusion;
    p.dims = dims;
    p.in_dim = in_dim;
    p.classes = classes;

    const std::size_t slices = (conv.kind == ConvKind::ChebNet) ? conv.cheb_k : 1;
    const std::vector<std::size_t> widths = {in_dim, dims.d1, dims.d2, dims.d3};
    std::mt19937_64 rng(seed);
    p.tower1 = init_tower(widths, slices, rng);
    p.tower2 = init_tower(widths, slices, rng);
    p.fc1_w = glorot(p.fused_dim(), dims.hidden, rng);
    p.fc1_b = Matrix(1, dims.hidden);
    p.cls_w = glorot(dims.hidden, classes, rng);
    p.cls_b = Matrix(1, classes);
    return p;
}

namespace {

template <typename Params, typename Ref>
std::vector<Ref> collect_refs(Params& p) {
    std::vector<Ref> refs;
    auto tower = [&](auto& t, const char* name) {
        for (std::size_t layer = 0; layer < t.theta.size(); ++layer) {
            for (std::size_t k = 0; k < t.theta[layer].size(); ++k) {
                std::ostringstream os;
                os << name << ".l" << layer << ".k" << k;
                refs.push_back(Ref{os.str(), &t.theta[layer][k]});
            }
        }
    };
    tower(p.tower1, "tower1");
    tower(p.tower2, "tower2");
    refs.push_back(Ref{"fc1.w", &p.fc1_w});
    refs.push_back(Ref{"fc1.b", &p.fc1_b});
    refs.push_back(Ref{"cls.w", &p.cls_w});
    refs.push_back(Ref{"cls.b", &p.cls_b});
    return refs;
}

}  // namespace

std::vector<ParamRef> ModelParams::param_refs() {
    return collect_refs<ModelParams, ParamRef>(*this);
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::param_refs() const {
    struct CRef {
        std::string name;
        const Matrix* value;
    };
    auto refs = collect_refs<const ModelParams, CRef>(*this);
    std::vector<std::pair<std::string, const Matrix*>> out;
    out.reserve(refs.size());
    for (auto& r : refs) out.emplace_back(std::move(r.name), r.value);
    return out;
}

ModelIds register_params(Tape& tape, const ModelParams& params) {
    ModelIds ids;
    auto tower = [&](const TowerParams& t) {
        TowerIds ti;
        for (const auto& layer : t.theta) {
            std::vector<ValueId> per_k;
            per_k.reserve(layer.size());
            for (const Matrix& m : layer) per_k.push_back(tape.input(m, true));
            ti.theta.push_back(std::move(per_k));
        }
        return ti;
    };
    ids.tower1 = tower(params.tower1);
    ids.tower2 = tower(params.tower2);
    ids.fc1_w = tape.input(params.fc1_w, true);
    ids.fc1_b = tape.input(params.fc1_b, true);
    ids.cls_w = tape.input(params.cls_w, true);
    ids.cls_b = tape.input(params.cls_b, true);
    return ids;
}

std::vector<ValueId> param_ids(const ModelIds& ids) {
    std::vector<ValueId> out;
    auto tower = [&](const TowerIds& t) {
        for (const auto& layer : t.theta) {
            for (ValueId v : layer) out.push_back(v);
        }
    };
    tower(ids.tower1);
    tower(ids.tower2);
    out.push_back(ids.fc1_w);
    out.push_back(ids.fc1_b);
    out.push_back(ids.cls_w);
    out.push_back(ids.cls_b);
    return out;
}

ValueId tower_forward(Tape& tape, const OperatorStack& op, const TowerIds& tower,
                      ValueId x, double dropout_rate) {
    if (op.mats.empty()) throw ValueError("tower_forward: empty operator stack");
    std::vector<ValueId> basis;
    basis.reserve(op.mats.size());
    for (const Matrix& m : op.mats) basis.push_back(tape.input(m, false));

    ValueId h = x;
    for (const auto& layer : tower.theta) {
        if (layer.size() != basis.size()) {
            throw ShapeError("tower_forward: filter count does not match the operator stack");
        }
        ValueId z = tape.matmul(tape.matmul(basis[0], h), layer[0]);
        for (std::size_t k = 1; k < layer.size(); ++k) {
            z = tape.add(z, tape.matmul(tape.matmul(basis[k], h), layer[k]));
        }
        h = tape.dropout(tape.relu(z), dropout_rate);
    }
    return h;
}

ValueId fuse(Tape& tape, ValueId z1, ValueId z2, FusionKind technique) {
    switch (technique) {
        case FusionKind::Max:
            return tape.elem_max(z1, z2);
        case FusionKind::Concat:
            return tape.concat_cols(z1, z2);
        case FusionKind::Hadamard:
            return tape.hadamard(z1, z2);
    }
    throw ValueError("fuse: unknown technique");
}

ValueId compat_and_readout(Tape& tape, ValueId h, ValueId fc1_w, ValueId fc1_b,
                           double dropout_rate) {
    const std::size_t n = tape.value(h).rows();
    if (n == 0) throw ShapeError("compat_and_readout: empty node set");
    const ValueId ones = tape.input(Matrix(n, 1, 1.0), false);
    const ValueId pre = tape.add(tape.matmul(h, fc1_w), tape.matmul(ones, fc1_b));
    return tape.col_max(tape.dropout(tape.relu(pre), dropout_rate));
}

ValueId logits_head(Tape& tape, ValueId h, ValueId cls_w, ValueId cls_b) {
    return tape.add(tape.matmul(h, cls_w), cls_b);
}

ValueId amosl_term(Tape& tape, ValueId z1, ValueId z2, FusionKind technique,
                   const TransportGradOptions& opts) {
    const ContributionScores cs =
        contribution_scores(tape.value(z1), tape.value(z2), technique);
    const ValueId cs1 = tape.input(Matrix::column(cs.cs_hat1), false);
    const ValueId cs2 = tape.input(Matrix::column(cs.cs_hat2), false);
    const ValueId w1 = tape.relu(tape.hadamard(tape.row_sum(z1), cs1));
    const ValueId w2 = tape.relu(tape.hadamard(tape.row_sum(z2), cs2));
    const ValueId cost = tape.cosine_cost(z1, z2);
    return tape.ot_loss(cost, w1, w2, opts);
}

Matrix softmax_row(const Matrix& logits) {
    if (logits.rows() != 1) throw ShapeError("softmax_row: expected a 1 x C row");
    Matrix p(1, logits.cols());
    double mx = logits(0, 0);
    for (std::size_t k = 1; k < logits.cols(); ++k) mx = std::max(mx, logits(0, k));
    double z = 0.0;
    for (std::size_t k = 0; k < logits.cols(); ++k) {
        p(0, k) = std::exp(logits(0, k) - mx);
        z += p(0, k);
    }
    for (std::size_t k = 0; k < logits.cols(); ++k) p(0, k) /= z;
    return p;
}

double cross_entropy_from_logits(const Matrix& logits, std::size_t label) {
    if (logits.rows() != 1) throw ShapeError("cross_entropy_from_logits: expected a 1 x C row");
    if (label >= logits.cols()) throw ValueError("cross_entropy_from_logits: label out of range");
    double mx = logits(0, 0);
    for (std::size_t k = 1; k < logits.cols(); ++k) mx = std::max(mx, logits(0, k));
    double lse = 0.0;
    for (std::size_t k = 0; k < logits.cols(); ++k) lse += std::exp(logits(0, k) - mx);
    return mx + std::log(lse) - logits(0, label);
}

}  // namespace amosl
