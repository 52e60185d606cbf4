#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "amosl/matrix.hpp"
#include "amosl/transport.hpp"
#include "amosl/types.hpp"

namespace amosl {

enum class OpKind {
    Input,
    MatMul,
    Add,
    Hadamard,
    Relu,
    Dropout,
    ElemMax,
    ColMax,
    ConcatCols,
    RowSum,
    ScalarScale,
    CosineCost,
    SoftmaxCrossEntropy,
    OtLoss,
    ModalityDistance,
};

struct ValueId {
    std::size_t index = 0;
    friend bool operator==(ValueId a, ValueId b) { return a.index == b.index; }
};

/// Reverse-mode tape over dense matrices. Nodes are appended in forward order,
/// so reverse node order is a topological order for the backward sweep. Only
/// nodes that (transitively) depend on a gradient-tracked input participate in
/// the sweep. Stochastic ops draw from the tape's own generator, so two tapes
/// built with the same seed and the same op sequence are bit-identical.
class Tape {
public:
    explicit Tape(std::uint64_t seed = 0, TapeMode mode = TapeMode::Train);

    TapeMode mode() const { return mode_; }
    std::size_t size() const { return nodes_.size(); }

    ValueId input(Matrix value, bool requires_grad);

    ValueId matmul(ValueId a, ValueId b);
    ValueId add(ValueId a, ValueId b);
    ValueId hadamard(ValueId a, ValueId b);
    ValueId relu(ValueId a);
    /// Inverted dropout: keeps entries with probability 1-p and scales them by
    /// 1/(1-p); identity in Eval mode. Requires 0 <= p < 1.
    ValueId dropout(ValueId a, double p);
    /// Element-wise maximum; ties route the gradient to `a`.
    ValueId elem_max(ValueId a, ValueId b);
    /// 1 x d row of column maxima; ties pick the lowest row index.
    ValueId col_max(ValueId a);
    ValueId concat_cols(ValueId a, ValueId b);
    /// n x 1 column of row sums.
    ValueId row_sum(ValueId a);
    ValueId scalar_scale(ValueId a, double s);
    /// Pairwise cosine-distance cost matrix between row sets (n1 x n2).
    ValueId cosine_cost(ValueId z1, ValueId z2);
    /// Scalar loss for a 1 x C logit row against an integer label.
    ValueId softmax_cross_entropy(ValueId logits, std::size_t label);
    /// Scalar optimal-transport distance; w1, w2 are column vectors. The exact
    /// LP is solved at forward time; the backward pass differentiates it with
    /// the requested mode.
    ValueId ot_loss(ValueId cost, ValueId w1, ValueId w2,
                    const TransportGradOptions& opts = {});
    /// Scalar row-aligned distance between two same-shape embeddings.
    ValueId modality_distance_op(ValueId z1, ValueId z2, DistanceKind metric);

    const Matrix& value(ValueId id) const;
    /// Gradient of the last backward root w.r.t. this node; zeros before any
    /// backward call. Throws if the node does not track gradients.
    const Matrix& grad(ValueId id) const;
    bool needs_grad(ValueId id) const;

    /// Reverse sweep from a scalar (1x1) root. Resets all gradients first.
    void backward(ValueId root);

private:
    struct OtPayload {
        TransportPlan plan;
        TransportGradOptions opts;
    };

    struct Node {
        OpKind kind = OpKind::Input;
        Matrix value;
        Matrix grad;
        std::vector<std::size_t> inputs;
        bool needs_grad = false;
        Matrix aux;        // dropout mask, elem-max selector, softmax probabilities
        int tag = 0;       // label or DistanceKind
        double scalar = 0.0;
        std::unique_ptr<OtPayload> ot;
    };

    const Node& at(ValueId id) const;
    ValueId push(Node node);
    void backprop_node(std::size_t idx);

    std::vector<Node> nodes_;
    std::mt19937_64 rng_;
    TapeMode mode_;
};

}  // namespace amosl
