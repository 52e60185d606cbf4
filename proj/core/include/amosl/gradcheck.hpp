#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "amosl/matrix.hpp"
#include "amosl/tape.hpp"

namespace amosl {

/// Builds a scalar expression on the given tape from tracked inputs (one per
/// entry of the matrix list, in order) and returns the root id.
using ScalarBuilder = std::function<ValueId(Tape&, const std::vector<ValueId>&)>;

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_row = 0;
    std::size_t worst_col = 0;
    double base_value = 0.0;
    std::size_t entries_checked = 0;

    bool passed(double tol) const { return max_rel_err <= tol; }
};

struct GradCheckOptions {
    double step = 1e-5;        // central-difference half step
    std::uint64_t seed = 0;    // tape seed, replayed identically per evaluation
    bool check_determinism = true;
};

/// Central-difference audit of the tape's reverse-mode gradients.
///
/// The expression is rebuilt from scratch for every evaluation with the same
/// tape seed, so stochastic ops replay the same draws and the difference
/// quotient is well defined. Relative error per entry is
/// |analytic - fd| / max(1, |fd|). When check_determinism is set, the base
/// evaluation runs twice and any bit-level difference in the value or the
/// gradients raises AuditError.
GradCheckReport finite_diff_check(const ScalarBuilder& build, const std::vector<Matrix>& inputs,
                                  const GradCheckOptions& opts = {});

}  // namespace amosl
