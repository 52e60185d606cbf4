#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "amosl/matrix.hpp"
#include "amosl/types.hpp"

namespace amosl {

/// Flows below this threshold are treated as zero when reading the support.
inline constexpr double kSupportTol = 1e-9;

/// Pairwise cosine distances between the rows of z1 and z2.
/// c_ij = 1 - <z1_i, z2_j> / (|z1_i| |z2_j|); a row with norm < 1e-12 yields c = 1.
Matrix cost_matrix(const Matrix& z1, const Matrix& z2);

/// Per-node feature score: row sums of the embedding.
std::vector<double> feature_scores(const Matrix& z);

struct ContributionScores {
    std::vector<double> cs1, cs2;          // raw counts (max) or d/2 (concat/hadamard)
    std::vector<double> cs_hat1, cs_hat2;  // normalized by the feature dimension
};

/// Per-node contribution to the fused representation under the given technique.
/// Max fusion counts element-wise wins (ties go to the first modality); concat
/// and Hadamard assign a flat 0.5 share.
ContributionScores contribution_scores(const Matrix& z1, const Matrix& z2, FusionKind technique);

/// w_i = max(0, FS_i * CS_hat_i).
std::vector<double> node_weights(const std::vector<double>& fs,
                                 const std::vector<double>& cs_hat);

/// Exact solution of the capacitated transport LP:
///   minimize sum c_ij f_ij
///   s.t. f >= 0, row sums <= w1, column sums <= w2,
///        total flow = min(sum w1, sum w2).
struct TransportPlan {
    Matrix flows;                   // n1 x n2, optimal f~
    std::vector<double> row_duals;  // eta1 >= 0, one per row capacity
    std::vector<double> col_duals;  // eta2 >= 0, one per column capacity
    double total_dual = 0.0;        // nu, multiplier of the total-flow equality
    double value = 0.0;             // sum c_ij f~_ij
    bool supply_side_min = true;    // sum w1 <= sum w2 (branch used for sensitivities)

    std::vector<std::pair<std::size_t, std::size_t>> support(double tol = kSupportTol) const;
    /// Dual objective nu*T - eta1.w1 - eta2.w2; equals value at optimality.
    double dual_value(const std::vector<double>& w1, const std::vector<double>& w2) const;
};

TransportPlan solve_transport(const Matrix& cost, const std::vector<double>& w1,
                              const std::vector<double>& w2);

/// Eq. 4 objective sum_ij c_ij f~_ij for a (plan, cost) pair; shapes must agree.
double ot_value(const TransportPlan& plan, const Matrix& cost);

/// Optimal value by exhaustive enumeration of integral flows. Valid because the
/// transportation polytope with integral capacities has integral vertices.
/// Requires integer weights, dims <= 4x4, min-side mass <= 12.
double brute_force_transport(const Matrix& cost, const std::vector<double>& w1,
                             const std::vector<double>& w2);

enum class TransportGradMode { Envelope, KktQp };

struct TransportGradOptions {
    TransportGradMode mode = TransportGradMode::Envelope;
    double damping = 1e-3;  // quadratic damping for KktQp
};

struct TransportGrads {
    Matrix dcost;
    std::vector<double> dw1, dw2;
};

/// Sensitivities of the optimal value w.r.t. costs and weights.
/// Envelope: d/dc_ij = f~_ij, d/dw from the optimal duals. KktQp: re-solves with
/// (eps/2)|f|^2 damping and differentiates the linearized KKT system. Both
/// return valid subgradients at degenerate optima.
TransportGrads transport_gradients(const TransportPlan& plan, const Matrix& cost,
                                   const std::vector<double>& w1, const std::vector<double>& w2,
                                   const TransportGradOptions& opts);

/// Row-aligned distance between modalities (constant-topology ablation of the
/// transport metric): sum over i of metric(z1_i, z2_i).
double modality_distance(const Matrix& z1, const Matrix& z2, DistanceKind metric);

}  // namespace amosl
