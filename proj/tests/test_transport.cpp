#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "amosl/errors.hpp"
#include "amosl/matrix.hpp"
#include "amosl/rng.hpp"
#include "amosl/transport.hpp"

using namespace amosl;

namespace {

// The worked 2x2 instance: optimum 4 via flows [[1,1],[0,1]].
const Matrix kCost = Matrix::from_rows({{1, 2}, {3, 1}});
const std::vector<double> kW1 = {2, 1};
const std::vector<double> kW2 = {1, 2};

}  // namespace

TEST_CASE("cosine cost on canonical directions") {
    const Matrix par = cost_matrix(Matrix::from_rows({{1, 1}}), Matrix::from_rows({{1, 1}}));
    CHECK(par(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    const Matrix orth = cost_matrix(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{0, 1}}));
    CHECK(orth(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    const Matrix anti = cost_matrix(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{-1, 0}}));
    CHECK(anti(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    const Matrix tiny = cost_matrix(Matrix::from_rows({{0, 0}}), Matrix::from_rows({{1, 0}}));
    CHECK(tiny(0, 0) == 1.0);
    CHECK_THROWS_AS(cost_matrix(Matrix(1, 2), Matrix(1, 3)), ShapeError);
}

TEST_CASE("feature scores are row sums") {
    CHECK(feature_scores(Matrix::from_rows({{1, 3}})) == std::vector<double>{4});
    CHECK(feature_scores(Matrix(2, 3)) == std::vector<double>{0, 0});
    CHECK(feature_scores(Matrix::from_rows({{1, 2}, {0, 5}})) == std::vector<double>{3, 5});
}

TEST_CASE("contribution scores for max fusion count element-wise wins") {
    const Matrix z1 = Matrix::from_rows({{1, 0}, {0, 2}});
    const Matrix z2 = Matrix::from_rows({{0, 1}, {1, 1}});
    const ContributionScores cs = contribution_scores(z1, z2, FusionKind::Max);
    CHECK(cs.cs1 == std::vector<double>{1, 1});
    CHECK(cs.cs2 == std::vector<double>{1, 1});
    CHECK(cs.cs_hat1 == std::vector<double>{0.5, 0.5});
    CHECK(cs.cs_hat2 == std::vector<double>{0.5, 0.5});
}

TEST_CASE("contribution score ties go to modality 1") {
    const Matrix z(2, 3, 0.75);
    const ContributionScores cs = contribution_scores(z, z, FusionKind::Max);
    CHECK(cs.cs1 == std::vector<double>{3, 3});
    CHECK(cs.cs2 == std::vector<double>{0, 0});
}

TEST_CASE("concat and hadamard assign a flat 0.5 share") {
    const Matrix z1 = Matrix::from_rows({{9, -1}, {2, 2}});
    const Matrix z2 = Matrix::from_rows({{0, 1}, {5, -5}});
    for (FusionKind technique : {FusionKind::Concat, FusionKind::Hadamard}) {
        const ContributionScores cs = contribution_scores(z1, z2, technique);
        CHECK(cs.cs_hat1 == std::vector<double>{0.5, 0.5});
        CHECK(cs.cs_hat2 == std::vector<double>{0.5, 0.5});
    }
    CHECK_THROWS_AS(contribution_scores(Matrix(2, 2), Matrix(2, 3), FusionKind::Max), ShapeError);
}

TEST_CASE("node weights clip at zero") {
    CHECK(node_weights({4}, {0.5}) == std::vector<double>{2});
    CHECK(node_weights({-1}, {1}) == std::vector<double>{0});
    CHECK(node_weights({0}, {1}) == std::vector<double>{0});
    CHECK_THROWS_AS(node_weights({1, 2}, {1}), ShapeError);
}

TEST_CASE("zero-cost perfect matching") {
    const TransportPlan plan =
        solve_transport(Matrix::from_rows({{0, 1}, {1, 0}}), {1, 1}, {1, 1});
    CHECK(plan.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(plan.flows == Matrix::from_rows({{1, 0}, {0, 1}}));
}

TEST_CASE("the worked 2x2 instance") {
    const TransportPlan plan = solve_transport(kCost, kW1, kW2);
    CHECK(plan.value == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(max_abs_diff(plan.flows, Matrix::from_rows({{1, 1}, {0, 1}})) < 1e-12);
    CHECK(plan.support() ==
          std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {0, 1}, {1, 1}});
    CHECK(plan.dual_value(kW1, kW2) == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(ot_value(plan, kCost) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(brute_force_transport(kCost, kW1, kW2) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("zero supply yields the empty plan") {
    const TransportPlan plan = solve_transport(kCost, kW1, {0, 0});
    CHECK(plan.value == 0.0);
    CHECK(max_abs(plan.flows) == 0.0);
    CHECK(plan.support().empty());
    CHECK(ot_value(plan, kCost) == 0.0);
}

TEST_CASE("solver input validation") {
    CHECK_THROWS_AS(solve_transport(kCost, {-1, 1}, kW2), ValueError);
    Matrix bad = kCost;
    bad(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(solve_transport(bad, kW1, kW2), ValueError);
    CHECK_THROWS_AS(solve_transport(kCost, {1}, kW2), ShapeError);
}

TEST_CASE("ot_value is linear in the cost and checks shapes") {
    const TransportPlan plan = solve_transport(kCost, kW1, kW2);
    CHECK(ot_value(plan, scale(kCost, 3.0)) == doctest::Approx(12.0).epsilon(1e-12));
    CHECK_THROWS_AS(ot_value(plan, Matrix(3, 2)), ShapeError);
}

TEST_CASE("weight homogeneity preserves the support") {
    const double alpha = 2.5;
    const TransportPlan base = solve_transport(kCost, kW1, kW2);
    const TransportPlan scaled =
        solve_transport(kCost, {alpha * kW1[0], alpha * kW1[1]}, {alpha * kW2[0], alpha * kW2[1]});
    CHECK(scaled.value == doctest::Approx(alpha * base.value).epsilon(1e-12));
    CHECK(scaled.support() == base.support());
}

TEST_CASE("feasibility and duality hold on random instances") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + uniform_index(rng, 8);
        const std::size_t n = 1 + uniform_index(rng, 8);
        Matrix cost(m, n);
        for (std::size_t k = 0; k < cost.size(); ++k) cost.raw()[k] = uniform(rng, 0.0, 2.0);
        std::vector<double> w1(m), w2(n);
        for (double& w : w1) w = uniform(rng, 0.0, 1.5);
        for (double& w : w2) w = uniform(rng, 0.0, 1.5);

        const TransportPlan plan = solve_transport(cost, w1, w2);
        double t1 = 0.0, t2 = 0.0;
        for (double w : w1) t1 += w;
        for (double w : w2) t2 += w;
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(plan.flows(i, j) >= -1e-9);
                row += plan.flows(i, j);
            }
            CHECK(row <= w1[i] + 1e-9);
            total += row;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < m; ++i) col += plan.flows(i, j);
            CHECK(col <= w2[j] + 1e-9);
        }
        CHECK(std::abs(total - std::min(t1, t2)) <= 1e-9);
        CHECK(std::abs(plan.dual_value(w1, w2) - plan.value) <= 1e-9);
    }
}

TEST_CASE("envelope cost gradient equals the optimal flows") {
    const TransportPlan plan = solve_transport(kCost, kW1, kW2);
    const TransportGrads g = transport_gradients(plan, kCost, kW1, kW2, {});
    CHECK(g.dcost == plan.flows);
}

TEST_CASE("gradient modes validate their inputs") {
    const TransportPlan plan = solve_transport(kCost, kW1, kW2);
    TransportGradOptions bad;
    bad.mode = TransportGradMode::KktQp;
    bad.damping = 0.0;
    CHECK_THROWS_AS(transport_gradients(plan, kCost, kW1, kW2, bad), ValueError);
    CHECK_THROWS_AS(transport_gradients(plan, Matrix(3, 3), kW1, kW2, {}), ShapeError);
}

TEST_CASE("degenerate instances return valid subgradients") {
    // Uniform weights, all-equal costs: the optimum is massively degenerate.
    // The optimal value is concave in (C, w), so for any supergradient g the
    // one-sided difference quotient along a direction never exceeds <g, dir>.
    const std::size_t n = 3;
    const Matrix cost(n, n, 0.7);
    const std::vector<double> w(n, 1.0);
    const TransportPlan plan = solve_transport(cost, w, w);
    CHECK(plan.value == doctest::Approx(0.7 * 3.0).epsilon(1e-12));

    std::mt19937_64 rng(7);
    const double h = 1e-6;
    for (TransportGradMode mode : {TransportGradMode::Envelope, TransportGradMode::KktQp}) {
        TransportGradOptions opts;
        opts.mode = mode;
        const TransportGrads g = transport_gradients(plan, cost, w, w, opts);
        for (int probe = 0; probe < 12; ++probe) {
            Matrix dc(n, n);
            std::vector<double> d1(n), d2(n);
            for (std::size_t k = 0; k < dc.size(); ++k) dc.raw()[k] = uniform(rng, -1.0, 1.0);
            for (double& d : d1) d = uniform(rng, -0.5, 0.5);
            for (double& d : d2) d = uniform(rng, -0.5, 0.5);

            Matrix cost_h = cost;
            std::vector<double> w1_h = w, w2_h = w;
            double predicted = 0.0;
            for (std::size_t k = 0; k < dc.size(); ++k) {
                cost_h.raw()[k] += h * dc.raw()[k];
                predicted += g.dcost.raw()[k] * dc.raw()[k];
            }
            for (std::size_t i = 0; i < n; ++i) {
                w1_h[i] += h * d1[i];
                w2_h[i] += h * d2[i];
                predicted += g.dw1[i] * d1[i] + g.dw2[i] * d2[i];
            }
            const double fd = (solve_transport(cost_h, w1_h, w2_h).value - plan.value) / h;
            CHECK(fd <= predicted + 1e-6);
        }
    }
}

TEST_CASE("modality distances on aligned rows") {
    const Matrix z = Matrix::from_rows({{1, 2}, {3, 4}});
    for (DistanceKind metric :
         {DistanceKind::Manhattan, DistanceKind::Euclidean, DistanceKind::Cosine}) {
        CHECK(modality_distance(z, z, metric) == doctest::Approx(0.0).epsilon(1e-12));
    }
    const Matrix a = Matrix::from_rows({{0, 0}});
    const Matrix b = Matrix::from_rows({{3, 4}});
    CHECK(modality_distance(a, b, DistanceKind::Manhattan) == doctest::Approx(7.0));
    CHECK(modality_distance(a, b, DistanceKind::Euclidean) == doctest::Approx(5.0));
    const Matrix u = Matrix::from_rows({{1, 0}, {0, 2}});
    const Matrix v = Matrix::from_rows({{0, 3}, {5, 0}});
    CHECK(modality_distance(u, v, DistanceKind::Cosine) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(modality_distance(Matrix(1, 2), Matrix(2, 2), DistanceKind::Manhattan),
                    ShapeError);
    CHECK_THROWS_AS(modality_distance(z, z, DistanceKind::Ot), ValueError);
}

TEST_CASE("brute force handles the edge cases") {
    CHECK(brute_force_transport(kCost, {0, 0}, kW2) == 0.0);
    CHECK(brute_force_transport(Matrix::from_rows({{0.25}}), {3}, {5}) ==
          doctest::Approx(0.75).epsilon(1e-12));
    CHECK_THROWS_AS(brute_force_transport(Matrix(5, 2, 1.0), std::vector<double>(5, 1.0),
                                          std::vector<double>(2, 1.0)),
                    ValueError);
    CHECK_THROWS_AS(brute_force_transport(kCost, {1.5, 1}, kW2), ValueError);
    CHECK_THROWS_AS(brute_force_transport(kCost, {9, 9}, {9, 9}), ValueError);
}
