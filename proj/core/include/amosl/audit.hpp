#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace amosl {

struct AuditCase {
    std::string name;
    double tol = 0.0;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::size_t checked = 0;  // gradient entries (or FD components over instances)
    bool passed = false;
    std::string detail;  // worst location, or the error that aborted the case
};

struct AuditSuite {
    std::vector<AuditCase> cases;
    bool all_passed() const;
};

enum class AuditFilter { All, EnvelopeOnly, KktQpOnly };

/// The full gradient audit:
///   - every tape primitive against central differences (tol 1e-6), with
///     kinked ops (relu, maxima, manhattan) sampled away from their kinks;
///   - transport_gradients per mode against finite differences of re-solved
///     LPs on random non-degenerate instances (tol 1e-4); instances whose
///     optimal support shifts under the probe step are degenerate and redrawn;
///   - the end-to-end two-graph toy network in kkt_qp mode (tol 1e-3).
/// The filter restricts the transport-mode-specific cases.
AuditSuite run_gradient_audit(double kkt_damping = 1e-3, AuditFilter filter = AuditFilter::All);

/// One line per case: "[ok|FAIL] name  max_rel=… (tol …)".
void print_suite(const AuditSuite& suite, std::ostream& out);

struct OracleResult {
    std::size_t trials = 0;
    std::size_t mismatches = 0;
    double max_gap = 0.0;
    double tol = 1e-9;

    bool passed() const { return mismatches == 0; }
};

/// Randomized LP-vs-brute-force equivalence: instances with 1..4 rows/columns,
/// integer weights in {1,2,3} (min-side mass <= 12 by construction) and costs
/// uniform in [0,2]; the simplex value must match exhaustive enumeration
/// within 1e-9 on every draw.
OracleResult run_ot_oracle(std::size_t trials, std::uint64_t seed);

}  // namespace amosl
