#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amosl/dataset.hpp"
#include "amosl/graph_ops.hpp"
#include "amosl/matrix.hpp"
#include "amosl/tape.hpp"
#include "amosl/types.hpp"

namespace amosl {

struct ConvSpec {
    ConvKind kind = ConvKind::ChebNet;
    std::size_t cheb_k = 6;  // ignored for GCN
};

struct ModelDims {
    std::size_t d1 = 16, d2 = 64, d3 = 128;  // tower layer widths
    std::size_t hidden = 128;                // compatibility FC width
};

/// Precomputed propagation matrices for one sample's two modalities. Each
/// stack multiplies as z = sum_k mats[k] * x * theta[k]; GCN is the K = 1 case.
struct OperatorStack {
    std::vector<Matrix> mats;
};

struct ModalityOperators {
    OperatorStack m1, m2;
};

/// Modality 1 uses A; modality 2 uses A2 = S with zeroed diagonal (dense) or
/// A ⊙ S (masked). ChebNet stacks the Chebyshev basis of the scaled Laplacian;
/// GCN stacks the single normalized propagation matrix.
ModalityOperators build_modality_operators(const GraphSample& sample, const ConvSpec& spec,
                                           Modality2Mode mode);

struct TowerParams {
    std::vector<std::vector<Matrix>> theta;  // [layer][k], k < K (K = 1 for GCN)
};

struct ParamRef {
    std::string name;
    Matrix* value;
};

struct ModelParams {
    ConvSpec conv;
    FusionKind fusion = FusionKind::Max;
    Modality2Mode modality2 = Modality2Mode::Dense;
    ModelDims dims;
    std::size_t in_dim = 0;
    std::size_t classes = 0;
    TowerParams tower1, tower2;
    Matrix fc1_w, fc1_b;
    Matrix cls_w, cls_b;

    /// Glorot-uniform weights, zero biases, drawn in declaration order.
    static ModelParams init(std::size_t in_dim, std::size_t classes, const ConvSpec& conv,
                            FusionKind fusion, const ModelDims& dims, std::uint64_t seed);

    std::size_t fused_dim() const {
        return fusion == FusionKind::Concat ? 2 * dims.d3 : dims.d3;
    }
    /// Stable parameter order shared by Adam state and checkpoints.
    std::vector<ParamRef> param_refs();
    std::vector<std::pair<std::string, const Matrix*>> param_refs() const;
};

/// Tape handles for every parameter, registered with requires_grad = true.
struct TowerIds {
    std::vector<std::vector<ValueId>> theta;
};

struct ModelIds {
    TowerIds tower1, tower2;
    ValueId fc1_w, fc1_b, cls_w, cls_b;
};

ModelIds register_params(Tape& tape, const ModelParams& params);

/// Flat view of the registered ids in the same order as param_refs().
std::vector<ValueId> param_ids(const ModelIds& ids);

/// Three conv -> ReLU -> dropout stages on one modality; returns n x d3.
ValueId tower_forward(Tape& tape, const OperatorStack& op, const TowerIds& tower,
                      ValueId x, double dropout_rate);

/// Fusion per technique; ties in max go to z1.
ValueId fuse(Tape& tape, ValueId z1, ValueId z2, FusionKind technique);

/// H' = dropout(relu(H W + b)); h = column-wise max over nodes (1 x hidden).
ValueId compat_and_readout(Tape& tape, ValueId h, ValueId fc1_w, ValueId fc1_b,
                           double dropout_rate);

/// Logits row: h W_cls + b_cls (1 x C).
ValueId logits_head(Tape& tape, ValueId h, ValueId cls_w, ValueId cls_b);

/// The structure-learning term: cosine cost between the towers' node
/// embeddings, FS/CS node weights (CS is a stop-gradient constant), exact
/// transport solve. Returns the scalar OT node.
ValueId amosl_term(Tape& tape, ValueId z1, ValueId z2, FusionKind technique,
                   const TransportGradOptions& opts);

/// Stabilized softmax of a logit row (pure, for inference).
Matrix softmax_row(const Matrix& logits);

/// Cross-entropy of a logit row against a label, from the stabilized
/// log-sum-exp (pure, for evaluation metrics).
double cross_entropy_from_logits(const Matrix& logits, std::size_t label);

}  // namespace amosl
