#include "amosl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "amosl/errors.hpp"
#include "amosl/rng.hpp"

namespace amosl {
namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw ShapeError(msg);
}

}  // namespace

Tape::Tape(std::uint64_t seed, TapeMode mode) : rng_(seed), mode_(mode) {}

const Tape::Node& Tape::at(ValueId id) const {
    if (id.index >= nodes_.size()) throw ValueError("tape: value id out of range");
    return nodes_[id.index];
}

ValueId Tape::push(Node node) {
    node.grad = Matrix(node.value.rows(), node.value.cols());
    nodes_.push_back(std::move(node));
    return ValueId{nodes_.size() - 1};
}

const Matrix& Tape::value(ValueId id) const { return at(id).value; }

const Matrix& Tape::grad(ValueId id) const {
    const Node& n = at(id);
    if (!n.needs_grad) throw ValueError("tape: node does not track gradients");
    return n.grad;
}

bool Tape::needs_grad(ValueId id) const { return at(id).needs_grad; }

ValueId Tape::input(Matrix value, bool requires_grad) {
    Node n;
    n.kind = OpKind::Input;
    n.value = std::move(value);
    n.needs_grad = requires_grad;
    return push(std::move(n));
}

ValueId Tape::matmul(ValueId a, ValueId b) {
    const Node &na = at(a), &nb = at(b);
    Node n;
    n.kind = OpKind::MatMul;
    n.value = amosl::matmul(na.value, nb.value);
    n.inputs = {a.index, b.index};
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

ValueId Tape::add(ValueId a, ValueId b) {
    const Node &na = at(a), &nb = at(b);
    Node n;
    n.kind = OpKind::Add;
    n.value = amosl::add(na.value, nb.value);
    n.inputs = {a.index, b.index};
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

ValueId Tape::hadamard(ValueId a, ValueId b) {
    const Node &na = at(a), &nb = at(b);
    Node n;
    n.kind = OpKind::Hadamard;
    n.value = amosl::hadamard(na.value, nb.value);
    n.inputs = {a.index, b.index};
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

ValueId Tape::relu(ValueId a) {
    const Node& na = at(a);
    Node n;
    n.kind = OpKind::Relu;
    n.value = na.value;
    for (std::size_t k = 0; k < n.value.size(); ++k) {
        n.value.raw()[k] = std::max(0.0, n.value.raw()[k]);
    }
    n.inputs = {a.index};
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

ValueId Tape::dropout(ValueId a, double p) {
    if (!(p >= 0.0 && p < 1.0)) throw ValueError("dropout: probability must be in [0, 1)");
    const Node& na = at(a);
    Node n;
    n.kind = OpKind::Dropout;
    n.inputs = {a.index};
    n.needs_grad = na.needs_grad;
    if (mode_ == TapeMode::Eval || p == 0.0) {
        n.value = na.value;
        n.aux = Matrix(na.value.rows(), na.value.cols());
        n.aux.fill(1.0);
        return push(std::move(n));
    }
    const double keep_scale = 1.0 / (1.0 - p);
    n.aux = Matrix(na.value.rows(), na.value.cols());
    for (std::size_t k = 0; k < n.aux.size(); ++k) {
        n.aux.raw()[k] = (uniform01(rng_) < p) ? 0.0 : keep_scale;
    }
    n.value = amosl::hadamard(na.value, n.aux);
    return push(std::move(n));
}

ValueId Tape::elem_max(ValueId a, ValueId b) {
    const Node &na = at(a), &nb = at(b);
    require(na.value.same_shape(nb.value), "elem_max: operands must share a shape");
    Node n;
    n.kind = OpKind::ElemMax;
    n.value = Matrix(na.value.rows(), na.value.cols());
    n.aux = Matrix(na.value.rows(), na.value.cols());  // 1 where a wins (ties to a)
    for (std::size_t k = 0; k < n.value.size(); ++k) {
        const double x = na.value.raw()[k], y = nb.value.raw()[k];
        n.aux.raw()[k] = (x >= y) ? 1.0 : 0.0;
        n.value.raw()[k] = std::max(x, y);
    }
    n.inputs = {a.index, b.index};
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

ValueId Tape::col_max(ValueId a) {
    const Node& na = at(a);
    Node n;
    n.kind = OpKind::ColMax;
    n.value = Matrix(1, na.value.cols());
    n.aux = Matrix(1, na.value.cols());  // winning row per column
    for (std::size_t c = 0; c < na.value.cols(); ++c) {
        std::size_t arg = 0;
        double best = na.value(0, c);
        for (std::size_t r = 1; r < na.value.rows(); ++r) {
            if (na.value(r, c) > best) {
                best = na.value(r, c);
                arg = r;
            }
        }
        n.value(0, c) = best;
        n.aux(0, c) = static_cast<double>(arg);
    }
    n.inputs = {a.index};
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

ValueId Tape::concat_cols(ValueId a, ValueId b) {
    const Node &na = at(a), &nb = at(b);
    require(na.value.rows() == nb.value.rows(), "concat_cols: operands must share row count");
    Node n;
    n.kind = OpKind::ConcatCols;
    n.value = Matrix(na.value.rows(), na.value.cols() + nb.value.cols());
    for (std::size_t r = 0; r < na.value.rows(); ++r) {
        for (std::size_t c = 0; c < na.value.cols(); ++c) n.value(r, c) = na.value(r, c);
        for (std::size_t c = 0; c < nb.value.cols(); ++c) {
            n.value(r, na.value.cols() + c) = nb.value(r, c);
        }
    }
    n.inputs = {a.index, b.index};
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

ValueId Tape::row_sum(ValueId a) {
    const Node& na = at(a);
    Node n;
    n.kind = OpKind::RowSum;
    n.value = Matrix(na.value.rows(), 1);
    for (std::size_t r = 0; r < na.value.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < na.value.cols(); ++c) s += na.value(r, c);
        n.value(r, 0) = s;
    }
    n.inputs = {a.index};
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

ValueId Tape::scalar_scale(ValueId a, double s) {
    const Node& na = at(a);
    Node n;
    n.kind = OpKind::ScalarScale;
    n.value = scale(na.value, s);
    n.scalar = s;
    n.inputs = {a.index};
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

ValueId Tape::cosine_cost(ValueId z1, ValueId z2) {
    const Node &na = at(z1), &nb = at(z2);
    Node n;
    n.kind = OpKind::CosineCost;
    n.value = cost_matrix(na.value, nb.value);
    n.inputs = {z1.index, z2.index};
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

ValueId Tape::softmax_cross_entropy(ValueId logits, std::size_t label) {
    const Node& na = at(logits);
    require(na.value.rows() == 1, "softmax_cross_entropy: logits must be a 1 x C row");
    if (label >= na.value.cols()) throw ValueError("softmax_cross_entropy: label out of range");
    const std::size_t c = na.value.cols();
    double mx = na.value(0, 0);
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, na.value(0, k));
    double lse = 0.0;
    for (std::size_t k = 0; k < c; ++k) lse += std::exp(na.value(0, k) - mx);
    lse = mx + std::log(lse);

    Node n;
    n.kind = OpKind::SoftmaxCrossEntropy;
    n.value = Matrix(1, 1);
    n.value(0, 0) = lse - na.value(0, label);
    n.aux = Matrix(1, c);  // probabilities for the backward pass
    for (std::size_t k = 0; k < c; ++k) n.aux(0, k) = std::exp(na.value(0, k) - lse);
    n.tag = static_cast<int>(label);
    n.inputs = {logits.index};
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

ValueId Tape::ot_loss(ValueId cost, ValueId w1, ValueId w2, const TransportGradOptions& opts) {
    const Node &nc = at(cost), &n1 = at(w1), &n2 = at(w2);
    require(n1.value.cols() == 1 && n2.value.cols() == 1, "ot_loss: weights must be column vectors");
    const std::vector<double>& v1 = n1.value.raw();
    const std::vector<double>& v2 = n2.value.raw();

    Node n;
    n.kind = OpKind::OtLoss;
    n.ot = std::make_unique<OtPayload>();
    n.ot->plan = solve_transport(nc.value, v1, v2);
    n.ot->opts = opts;
    n.value = Matrix(1, 1);
    n.value(0, 0) = n.ot->plan.value;
    n.inputs = {cost.index, w1.index, w2.index};
    n.needs_grad = nc.needs_grad || n1.needs_grad || n2.needs_grad;
    return push(std::move(n));
}

ValueId Tape::modality_distance_op(ValueId z1, ValueId z2, DistanceKind metric) {
    const Node &na = at(z1), &nb = at(z2);
    Node n;
    n.kind = OpKind::ModalityDistance;
    n.value = Matrix(1, 1);
    n.value(0, 0) = modality_distance(na.value, nb.value, metric);
    n.tag = static_cast<int>(metric);
    n.inputs = {z1.index, z2.index};
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

void Tape::backward(ValueId root) {
    const Node& r = at(root);
    if (!r.value.is_scalar()) throw ShapeError("backward: root must be a 1x1 scalar");
    if (!r.needs_grad) throw ValueError("backward: root does not depend on any tracked input");
    for (Node& n : nodes_) n.grad.fill(0.0);
    nodes_[root.index].grad(0, 0) = 1.0;
    for (std::size_t idx = root.index + 1; idx-- > 0;) {
        if (!nodes_[idx].needs_grad || nodes_[idx].kind == OpKind::Input) continue;
        backprop_node(idx);
    }
}

void Tape::backprop_node(std::size_t idx) {
    Node& n = nodes_[idx];
    const Matrix& g = n.grad;
    auto in = [&](std::size_t k) -> Node& { return nodes_[n.inputs[k]]; };

    switch (n.kind) {
        case OpKind::Input:
            break;
        case OpKind::MatMul: {
            Node &a = in(0), &b = in(1);
            if (a.needs_grad) add_in_place(a.grad, amosl::matmul(g, transpose(b.value)));
            if (b.needs_grad) add_in_place(b.grad, amosl::matmul(transpose(a.value), g));
            break;
        }
        case OpKind::Add: {
            if (in(0).needs_grad) add_in_place(in(0).grad, g);
            if (in(1).needs_grad) add_in_place(in(1).grad, g);
            break;
        }
        case OpKind::Hadamard: {
            Node &a = in(0), &b = in(1);
            if (a.needs_grad) add_in_place(a.grad, amosl::hadamard(g, b.value));
            if (b.needs_grad) add_in_place(b.grad, amosl::hadamard(g, a.value));
            break;
        }
        case OpKind::Relu: {
            Node& a = in(0);
            if (!a.needs_grad) break;
            for (std::size_t k = 0; k < g.size(); ++k) {
                if (a.value.raw()[k] > 0.0) a.grad.raw()[k] += g.raw()[k];
            }
            break;
        }
        case OpKind::Dropout: {
            Node& a = in(0);
            if (a.needs_grad) add_in_place(a.grad, amosl::hadamard(g, n.aux));
            break;
        }
        case OpKind::ElemMax: {
            Node &a = in(0), &b = in(1);
            for (std::size_t k = 0; k < g.size(); ++k) {
                if (n.aux.raw()[k] > 0.5) {
                    if (a.needs_grad) a.grad.raw()[k] += g.raw()[k];
                } else if (b.needs_grad) {
                    b.grad.raw()[k] += g.raw()[k];
                }
            }
            break;
        }
        case OpKind::ColMax: {
            Node& a = in(0);
            if (!a.needs_grad) break;
            for (std::size_t c = 0; c < g.cols(); ++c) {
                a.grad(static_cast<std::size_t>(n.aux(0, c)), c) += g(0, c);
            }
            break;
        }
        case OpKind::ConcatCols: {
            Node &a = in(0), &b = in(1);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                if (a.needs_grad) {
                    for (std::size_t c = 0; c < a.value.cols(); ++c) a.grad(r, c) += g(r, c);
                }
                if (b.needs_grad) {
                    for (std::size_t c = 0; c < b.value.cols(); ++c) {
                        b.grad(r, c) += g(r, a.value.cols() + c);
                    }
                }
            }
            break;
        }
        case OpKind::RowSum: {
            Node& a = in(0);
            if (!a.needs_grad) break;
            for (std::size_t r = 0; r < a.value.rows(); ++r) {
                for (std::size_t c = 0; c < a.value.cols(); ++c) a.grad(r, c) += g(r, 0);
            }
            break;
        }
        case OpKind::ScalarScale: {
            if (in(0).needs_grad) add_scaled_in_place(in(0).grad, g, n.scalar);
            break;
        }
        case OpKind::CosineCost: {
            Node &a = in(0), &b = in(1);
            const Matrix &z1 = a.value, &z2 = b.value;
            const std::size_t n1 = z1.rows(), n2 = z2.rows(), d = z1.cols();
            std::vector<double> na_(n1), nb_(n2);
            for (std::size_t i = 0; i < n1; ++i) {
                double s = 0.0;
                for (std::size_t o = 0; o < d; ++o) s += z1(i, o) * z1(i, o);
                na_[i] = std::sqrt(s);
            }
            for (std::size_t j = 0; j < n2; ++j) {
                double s = 0.0;
                for (std::size_t o = 0; o < d; ++o) s += z2(j, o) * z2(j, o);
                nb_[j] = std::sqrt(s);
            }
            for (std::size_t i = 0; i < n1; ++i) {
                for (std::size_t j = 0; j < n2; ++j) {
                    const double gij = g(i, j);
                    if (gij == 0.0 || na_[i] < 1e-12 || nb_[j] < 1e-12) continue;
                    double dot = 0.0;
                    for (std::size_t o = 0; o < d; ++o) dot += z1(i, o) * z2(j, o);
                    const double inv = 1.0 / (na_[i] * nb_[j]);
                    const double coef1 = dot / (na_[i] * na_[i]);  // times inv below
                    const double coef2 = dot / (nb_[j] * nb_[j]);
                    if (a.needs_grad) {
                        for (std::size_t o = 0; o < d; ++o) {
                            a.grad(i, o) += gij * inv * (coef1 * z1(i, o) - z2(j, o));
                        }
                    }
                    if (b.needs_grad) {
                        for (std::size_t o = 0; o < d; ++o) {
                            b.grad(j, o) += gij * inv * (coef2 * z2(j, o) - z1(i, o));
                        }
                    }
                }
            }
            break;
        }
        case OpKind::SoftmaxCrossEntropy: {
            Node& a = in(0);
            if (!a.needs_grad) break;
            const double gs = g(0, 0);
            for (std::size_t k = 0; k < n.aux.cols(); ++k) {
                const double y = (static_cast<int>(k) == n.tag) ? 1.0 : 0.0;
                a.grad(0, k) += gs * (n.aux(0, k) - y);
            }
            break;
        }
        case OpKind::OtLoss: {
            Node &c = in(0), &a = in(1), &b = in(2);
            const double gs = g(0, 0);
            if (gs == 0.0) break;
            const TransportGrads tg =
                transport_gradients(n.ot->plan, c.value, a.value.raw(), b.value.raw(), n.ot->opts);
            if (c.needs_grad) add_scaled_in_place(c.grad, tg.dcost, gs);
            if (a.needs_grad) {
                for (std::size_t i = 0; i < tg.dw1.size(); ++i) a.grad(i, 0) += gs * tg.dw1[i];
            }
            if (b.needs_grad) {
                for (std::size_t j = 0; j < tg.dw2.size(); ++j) b.grad(j, 0) += gs * tg.dw2[j];
            }
            break;
        }
        case OpKind::ModalityDistance: {
            Node &a = in(0), &b = in(1);
            const double gs = g(0, 0);
            if (gs == 0.0) break;
            const Matrix &z1 = a.value, &z2 = b.value;
            const std::size_t rows = z1.rows(), d = z1.cols();
            const auto metric = static_cast<DistanceKind>(n.tag);
            for (std::size_t i = 0; i < rows; ++i) {
                switch (metric) {
                    case DistanceKind::Manhattan: {
                        for (std::size_t o = 0; o < d; ++o) {
                            const double diff = z1(i, o) - z2(i, o);
                            const double s = (diff > 0.0) ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                            if (a.needs_grad) a.grad(i, o) += gs * s;
                            if (b.needs_grad) b.grad(i, o) -= gs * s;
                        }
                        break;
                    }
                    case DistanceKind::Euclidean: {
                        double norm = 0.0;
                        for (std::size_t o = 0; o < d; ++o) {
                            const double diff = z1(i, o) - z2(i, o);
                            norm += diff * diff;
                        }
                        norm = std::sqrt(norm);
                        if (norm < 1e-12) break;
                        for (std::size_t o = 0; o < d; ++o) {
                            const double s = (z1(i, o) - z2(i, o)) / norm;
                            if (a.needs_grad) a.grad(i, o) += gs * s;
                            if (b.needs_grad) b.grad(i, o) -= gs * s;
                        }
                        break;
                    }
                    case DistanceKind::Cosine: {
                        double an = 0.0, bn = 0.0, dot = 0.0;
                        for (std::size_t o = 0; o < d; ++o) {
                            an += z1(i, o) * z1(i, o);
                            bn += z2(i, o) * z2(i, o);
                            dot += z1(i, o) * z2(i, o);
                        }
                        an = std::sqrt(an);
                        bn = std::sqrt(bn);
                        if (an < 1e-12 || bn < 1e-12) break;
                        const double inv = 1.0 / (an * bn);
                        for (std::size_t o = 0; o < d; ++o) {
                            if (a.needs_grad) {
                                a.grad(i, o) += gs * inv * (dot / (an * an) * z1(i, o) - z2(i, o));
                            }
                            if (b.needs_grad) {
                                b.grad(i, o) += gs * inv * (dot / (bn * bn) * z2(i, o) - z1(i, o));
                            }
                        }
                        break;
                    }
                    case DistanceKind::Ot:
                        break;  // rejected at forward time
                }
            }
            break;
        }
    }
}

}  // namespace amosl
