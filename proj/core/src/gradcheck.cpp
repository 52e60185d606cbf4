#include "amosl/gradcheck.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "amosl/errors.hpp"

namespace amosl {
namespace {

struct Eval {
    double value = 0.0;
    std::vector<Matrix> grads;
};

Eval evaluate(const ScalarBuilder& build, const std::vector<Matrix>& inputs,
              const GradCheckOptions& opts, bool want_grads) {
    Tape tape(opts.seed, TapeMode::Train);
    std::vector<ValueId> ids;
    ids.reserve(inputs.size());
    for (const Matrix& m : inputs) ids.push_back(tape.input(m, true));
    const ValueId root = build(tape, ids);
    if (!tape.value(root).is_scalar()) {
        throw ShapeError("finite_diff_check: builder must return a scalar root");
    }
    Eval e;
    e.value = tape.value(root)(0, 0);
    if (!std::isfinite(e.value)) throw AuditError("finite_diff_check: non-finite value");
    if (want_grads) {
        tape.backward(root);
        for (const ValueId id : ids) e.grads.push_back(tape.grad(id));
    }
    return e;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

GradCheckReport finite_diff_check(const ScalarBuilder& build, const std::vector<Matrix>& inputs,
                                  const GradCheckOptions& opts) {
    if (inputs.empty()) throw ValueError("finite_diff_check: no inputs");
    if (!(opts.step > 0.0)) throw ValueError("finite_diff_check: step must be positive");

    const Eval base = evaluate(build, inputs, opts, true);
    if (opts.check_determinism) {
        const Eval again = evaluate(build, inputs, opts, true);
        bool same = std::memcmp(&base.value, &again.value, sizeof(double)) == 0;
        for (std::size_t k = 0; same && k < base.grads.size(); ++k) {
            same = bitwise_equal(base.grads[k], again.grads[k]);
        }
        if (!same) {
            throw AuditError("finite_diff_check: repeated evaluation is not bit-identical");
        }
    }

    GradCheckReport rep;
    rep.base_value = base.value;
    std::vector<Matrix> work = inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (std::size_t r = 0; r < inputs[k].rows(); ++r) {
            for (std::size_t c = 0; c < inputs[k].cols(); ++c) {
                const double saved = work[k](r, c);
                work[k](r, c) = saved + opts.step;
                const double fp = evaluate(build, work, opts, false).value;
                work[k](r, c) = saved - opts.step;
                const double fm = evaluate(build, work, opts, false).value;
                work[k](r, c) = saved;

                const double fd = (fp - fm) / (2.0 * opts.step);
                const double analytic = base.grads[k](r, c);
                const double abs_err = std::fabs(analytic - fd);
                const double rel_err = abs_err / std::max(1.0, std::fabs(fd));
                ++rep.entries_checked;
                rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
                if (rel_err > rep.max_rel_err) {
                    rep.max_rel_err = rel_err;
                    rep.worst_input = k;
                    rep.worst_row = r;
                    rep.worst_col = c;
                }
            }
        }
    }
    return rep;
}

}  // namespace amosl
