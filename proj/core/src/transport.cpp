#include "amosl/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <vector>

#include "amosl/errors.hpp"

namespace amosl {
namespace {

constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

double vec_sum(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0);
}

void check_weights(const char* who, const std::vector<double>& w) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w[i]) || w[i] < 0.0) {
            std::ostringstream os;
            os << who << ": weight " << i << " is " << w[i] << "; weights must be finite and >= 0";
            throw ValueError(os.str());
        }
    }
}

void check_instance(const char* who, const Matrix& cost, const std::vector<double>& w1,
                    const std::vector<double>& w2) {
    if (cost.rows() == 0 || cost.cols() == 0) {
        throw ShapeError(std::string(who) + ": cost matrix must be nonempty");
    }
    if (cost.rows() != w1.size() || cost.cols() != w2.size()) {
        std::ostringstream os;
        os << who << ": cost is " << cost.rows() << "x" << cost.cols() << " but weights have "
           << w1.size() << " and " << w2.size() << " entries";
        throw ShapeError(os.str());
    }
    if (!cost.all_finite()) throw ValueError(std::string(who) + ": cost matrix has non-finite entries");
    check_weights(who, w1);
    check_weights(who, w2);
}

// ---------------------------------------------------------------------------
// Balanced transportation simplex. Supplies and demands must have equal sums.
// Basis cells form a spanning tree of the bipartite supply/demand graph;
// vertices 0..m-1 are supply rows, m..m+n-1 are demand columns.
// ---------------------------------------------------------------------------

struct BalancedResult {
    Matrix flow;
    std::vector<double> u, v;  // tree duals with u[0] = 0
};

BalancedResult solve_balanced(const Matrix& cost, const std::vector<double>& supply,
                              const std::vector<double>& demand) {
    const std::size_t m = supply.size();
    const std::size_t n = demand.size();
    const std::size_t nv = m + n;
    std::vector<char> basic(m * n, 0);
    Matrix flow(m, n);

    // Northwest-corner start: exactly m+n-1 cells, a spanning tree by construction.
    {
        std::vector<double> ra = supply, cb = demand;
        std::size_t i = 0, j = 0;
        for (std::size_t step = 0; step + 1 < m + n; ++step) {
            basic[i * n + j] = 1;
            const double f = std::min(ra[i], cb[j]);
            flow(i, j) = f;
            ra[i] -= f;
            cb[j] -= f;
            if (i + 1 == m) {
                ++j;
            } else if (j + 1 == n) {
                ++i;
            } else if (ra[i] <= cb[j]) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    std::vector<std::vector<std::size_t>> adj(nv);
    auto rebuild_adj = [&]() {
        for (auto& a : adj) a.clear();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (!basic[i * n + j]) continue;
                adj[i].push_back(m + j);
                adj[m + j].push_back(i);
            }
        }
    };

    std::vector<double> u(m, 0.0), v(n, 0.0);
    auto compute_duals = [&]() {
        std::vector<char> seen(nv, 0);
        std::queue<std::size_t> q;
        u[0] = 0.0;
        seen[0] = 1;
        q.push(0);
        std::size_t reached = 1;
        while (!q.empty()) {
            const std::size_t x = q.front();
            q.pop();
            for (const std::size_t y : adj[x]) {
                if (seen[y]) continue;
                seen[y] = 1;
                ++reached;
                if (x < m) {
                    v[y - m] = cost(x, y - m) - u[x];
                } else {
                    u[y] = cost(y, x - m) - v[x - m];
                }
                q.push(y);
            }
        }
        if (reached != nv) throw SolverError("transport simplex: basis is not a spanning tree");
    };

    const double cost_scale = std::max(1.0, max_abs(cost));
    const double tol = 1e-11 * cost_scale;
    const std::size_t max_iters = 1000 + 50 * nv * nv;

    for (std::size_t iter = 0;; ++iter) {
        if (iter >= max_iters) throw SolverError("transport simplex exceeded iteration cap");
        rebuild_adj();
        compute_duals();

        // Entering cell: lowest flat index with negative reduced cost (Bland).
        std::size_t enter = kNoIndex;
        for (std::size_t idx = 0; idx < m * n; ++idx) {
            if (basic[idx]) continue;
            const std::size_t i = idx / n, j = idx % n;
            if (cost(i, j) - u[i] - v[j] < -tol) {
                enter = idx;
                break;
            }
        }
        if (enter == kNoIndex) break;  // optimal
        const std::size_t ei = enter / n, ej = enter % n;

        // Unique tree path from row ei to column ej.
        std::vector<std::size_t> parent(nv, kNoIndex);
        {
            std::vector<char> seen(nv, 0);
            std::queue<std::size_t> q;
            seen[ei] = 1;
            q.push(ei);
            while (!q.empty() && !seen[m + ej]) {
                const std::size_t x = q.front();
                q.pop();
                for (const std::size_t y : adj[x]) {
                    if (seen[y]) continue;
                    seen[y] = 1;
                    parent[y] = x;
                    q.push(y);
                }
            }
            if (!seen[m + ej]) throw SolverError("transport simplex: basis lost connectivity");
        }
        std::vector<std::size_t> path;  // vertices ei .. m+ej
        for (std::size_t x = m + ej; x != kNoIndex; x = parent[x]) path.push_back(x);
        std::reverse(path.begin(), path.end());

        // Cycle signs: the entering cell gains flow; path edges alternate starting
        // with a loss on the edge sharing the entering row.
        std::vector<std::size_t> minus_cells, plus_cells;
        for (std::size_t k = 0; k + 1 < path.size(); ++k) {
            const std::size_t a = path[k], b = path[k + 1];
            const std::size_t ri = (a < m) ? a : b;
            const std::size_t cj = (a < m) ? (b - m) : (a - m);
            if (k % 2 == 0) {
                minus_cells.push_back(ri * n + cj);
            } else {
                plus_cells.push_back(ri * n + cj);
            }
        }

        double theta = std::numeric_limits<double>::infinity();
        for (const std::size_t idx : minus_cells) theta = std::min(theta, flow(idx / n, idx % n));
        std::size_t leave = kNoIndex;
        for (const std::size_t idx : minus_cells) {
            if (flow(idx / n, idx % n) <= theta && (leave == kNoIndex || idx < leave)) leave = idx;
        }
        if (leave == kNoIndex) throw SolverError("transport simplex: no leaving cell");

        flow(ei, ej) += theta;
        for (const std::size_t idx : plus_cells) flow(idx / n, idx % n) += theta;
        for (const std::size_t idx : minus_cells) flow(idx / n, idx % n) -= theta;
        basic[enter] = 1;
        basic[leave] = 0;
        flow(leave / n, leave % n) = 0.0;
    }

    // Re-derive exact flows for the final basis by leaf elimination, removing
    // accumulated round-off from the pivot updates.
    {
        rebuild_adj();
        std::vector<double> ra = supply, cb = demand;
        std::vector<std::size_t> deg(nv, 0);
        for (std::size_t x = 0; x < nv; ++x) deg[x] = adj[x].size();
        std::vector<char> edge_done(m * n, 0);
        flow.fill(0.0);
        std::vector<std::size_t> leaves;
        for (std::size_t x = 0; x < nv; ++x) {
            if (deg[x] == 1) leaves.push_back(x);
        }
        const double mass_scale = std::max(1.0, std::max(vec_sum(ra), vec_sum(cb)));
        while (!leaves.empty()) {
            const std::size_t x = leaves.back();
            leaves.pop_back();
            if (deg[x] != 1) continue;
            std::size_t other = kNoIndex;
            for (const std::size_t y : adj[x]) {
                const std::size_t ri = (x < m) ? x : y;
                const std::size_t cj = (x < m) ? (y - m) : (x - m);
                if (!edge_done[ri * n + cj]) {
                    other = y;
                    break;
                }
            }
            if (other == kNoIndex) throw SolverError("transport simplex: leaf without pending edge");
            const std::size_t ri = (x < m) ? x : other;
            const std::size_t cj = (x < m) ? (other - m) : (x - m);
            double f = (x < m) ? ra[ri] : cb[cj];
            if (f < 0.0) {
                if (f < -1e-7 * mass_scale) throw SolverError("transport simplex: negative basic flow");
                f = 0.0;
            }
            flow(ri, cj) = f;
            ra[ri] -= f;
            cb[cj] -= f;
            edge_done[ri * n + cj] = 1;
            --deg[x];
            --deg[other];
            if (deg[other] == 1) leaves.push_back(other);
        }
    }

    return BalancedResult{std::move(flow), std::move(u), std::move(v)};
}

// ---------------------------------------------------------------------------
// Dense LU with partial pivoting for the small symmetric KKT systems.
// ---------------------------------------------------------------------------

struct DenseLU {
    std::size_t n = 0;
    std::vector<double> a;       // row-major, factored in place
    std::vector<std::size_t> piv;

    void factor(std::vector<double> mat, std::size_t dim) {
        n = dim;
        a = std::move(mat);
        piv.assign(n, 0);
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t p = k;
            double best = std::fabs(a[k * n + k]);
            for (std::size_t r = k + 1; r < n; ++r) {
                const double cand = std::fabs(a[r * n + k]);
                if (cand > best) {
                    best = cand;
                    p = r;
                }
            }
            if (best < 1e-300) throw SolverError("kkt system is singular");
            piv[k] = p;
            if (p != k) {
                for (std::size_t c = 0; c < n; ++c) std::swap(a[k * n + c], a[p * n + c]);
            }
            const double inv = 1.0 / a[k * n + k];
            for (std::size_t r = k + 1; r < n; ++r) {
                const double l = a[r * n + k] * inv;
                a[r * n + k] = l;
                if (l == 0.0) continue;
                for (std::size_t c = k + 1; c < n; ++c) a[r * n + c] -= l * a[k * n + c];
            }
        }
    }

    std::vector<double> solve(std::vector<double> b) const {
        // The stored L is in final row order, so the whole permutation must be
        // applied to b before forward substitution begins.
        for (std::size_t k = 0; k < n; ++k) {
            if (piv[k] != k) std::swap(b[k], b[piv[k]]);
        }
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t r = k + 1; r < n; ++r) b[r] -= a[r * n + k] * b[k];
        }
        for (std::size_t k = n; k-- > 0;) {
            for (std::size_t c = k + 1; c < n; ++c) b[k] -= a[k * n + c] * b[c];
            b[k] /= a[k * n + k];
        }
        return b;
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// Scores and costs
// ---------------------------------------------------------------------------

Matrix cost_matrix(const Matrix& z1, const Matrix& z2) {
    if (z1.cols() != z2.cols()) {
        throw ShapeError("cost_matrix: embeddings disagree on feature dimension");
    }
    const std::size_t n1 = z1.rows(), n2 = z2.rows(), d = z1.cols();
    std::vector<double> norm1(n1, 0.0), norm2(n2, 0.0);
    for (std::size_t i = 0; i < n1; ++i) {
        double s = 0.0;
        for (std::size_t o = 0; o < d; ++o) s += z1(i, o) * z1(i, o);
        norm1[i] = std::sqrt(s);
    }
    for (std::size_t j = 0; j < n2; ++j) {
        double s = 0.0;
        for (std::size_t o = 0; o < d; ++o) s += z2(j, o) * z2(j, o);
        norm2[j] = std::sqrt(s);
    }
    Matrix c(n1, n2);
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            if (norm1[i] < 1e-12 || norm2[j] < 1e-12) {
                c(i, j) = 1.0;
                continue;
            }
            double dot = 0.0;
            for (std::size_t o = 0; o < d; ++o) dot += z1(i, o) * z2(j, o);
            c(i, j) = 1.0 - dot / (norm1[i] * norm2[j]);
        }
    }
    return c;
}

std::vector<double> feature_scores(const Matrix& z) {
    std::vector<double> fs(z.rows(), 0.0);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        double s = 0.0;
        for (std::size_t o = 0; o < z.cols(); ++o) s += z(i, o);
        fs[i] = s;
    }
    return fs;
}

ContributionScores contribution_scores(const Matrix& z1, const Matrix& z2, FusionKind technique) {
    if (!z1.same_shape(z2)) throw ShapeError("contribution_scores: embeddings must share a shape");
    const std::size_t n = z1.rows();
    const double d = static_cast<double>(z1.cols());
    ContributionScores out;
    out.cs1.assign(n, 0.0);
    out.cs2.assign(n, 0.0);
    if (technique == FusionKind::Max) {
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t o = 0; o < z1.cols(); ++o) {
                if (z1(r, o) >= z2(r, o)) {
                    out.cs1[r] += 1.0;
                } else {
                    out.cs2[r] += 1.0;
                }
            }
        }
    } else {
        std::fill(out.cs1.begin(), out.cs1.end(), d / 2.0);
        std::fill(out.cs2.begin(), out.cs2.end(), d / 2.0);
    }
    out.cs_hat1.resize(n);
    out.cs_hat2.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        out.cs_hat1[r] = out.cs1[r] / d;
        out.cs_hat2[r] = out.cs2[r] / d;
    }
    return out;
}

std::vector<double> node_weights(const std::vector<double>& fs, const std::vector<double>& cs_hat) {
    if (fs.size() != cs_hat.size()) {
        throw ShapeError("node_weights: score vectors must have equal length");
    }
    std::vector<double> w(fs.size());
    for (std::size_t i = 0; i < fs.size(); ++i) w[i] = std::max(0.0, fs[i] * cs_hat[i]);
    return w;
}

// ---------------------------------------------------------------------------
// Exact LP solve
// ---------------------------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> TransportPlan::support(double tol) const {
    std::vector<std::pair<std::size_t, std::size_t>> s;
    for (std::size_t i = 0; i < flows.rows(); ++i) {
        for (std::size_t j = 0; j < flows.cols(); ++j) {
            if (flows(i, j) > tol) s.emplace_back(i, j);
        }
    }
    return s;
}

double TransportPlan::dual_value(const std::vector<double>& w1,
                                 const std::vector<double>& w2) const {
    if (w1.size() != row_duals.size() || w2.size() != col_duals.size()) {
        throw ShapeError("dual_value: weight vectors do not match the plan");
    }
    const double total = std::min(vec_sum(w1), vec_sum(w2));
    double d = total_dual * total;
    for (std::size_t i = 0; i < w1.size(); ++i) d -= row_duals[i] * w1[i];
    for (std::size_t j = 0; j < w2.size(); ++j) d -= col_duals[j] * w2[j];
    return d;
}

TransportPlan solve_transport(const Matrix& cost, const std::vector<double>& w1,
                              const std::vector<double>& w2) {
    check_instance("solve_transport", cost, w1, w2);
    const std::size_t n1 = w1.size(), n2 = w2.size();
    const double W1 = vec_sum(w1), W2 = vec_sum(w2);

    TransportPlan plan;
    plan.flows = Matrix(n1, n2);
    plan.row_duals.assign(n1, 0.0);
    plan.col_duals.assign(n2, 0.0);
    plan.supply_side_min = (W1 <= W2);
    if (std::min(W1, W2) <= 0.0) return plan;  // nothing to ship

    std::vector<double> supply = w1, demand = w2;
    Matrix c = cost;
    if (W1 < W2) {
        // Slack supplier absorbs the unmet demand at zero cost.
        supply.push_back(W2 - W1);
        Matrix padded(n1 + 1, n2);
        for (std::size_t i = 0; i < n1; ++i) {
            for (std::size_t j = 0; j < n2; ++j) padded(i, j) = cost(i, j);
        }
        c = std::move(padded);
    } else if (W1 > W2) {
        demand.push_back(W1 - W2);
        Matrix padded(n1, n2 + 1);
        for (std::size_t i = 0; i < n1; ++i) {
            for (std::size_t j = 0; j < n2; ++j) padded(i, j) = cost(i, j);
        }
        c = std::move(padded);
    }

    BalancedResult r = solve_balanced(c, supply, demand);

    double value = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            plan.flows(i, j) = r.flow(i, j);
            value += cost(i, j) * r.flow(i, j);
        }
    }
    plan.value = value;

    // Map tree duals (u, v) to capacity duals: eta1_i = c1 - u_i, eta2_j = c2 - v_j,
    // nu = c1 + c2. The shifts keep eta >= 0 and preserve strong duality; when a
    // slack node exists its dual pins the shift on the opposite side.
    double c1 = 0.0, c2 = 0.0;
    if (W1 < W2) {
        c2 = -r.u[n1];
        for (std::size_t i = 0; i < n1; ++i) c1 = std::max(c1, r.u[i]);
    } else if (W1 > W2) {
        c1 = -r.v[n2];
        for (std::size_t j = 0; j < n2; ++j) c2 = std::max(c2, r.v[j]);
    } else {
        for (std::size_t i = 0; i < n1; ++i) c1 = std::max(c1, r.u[i]);
        for (std::size_t j = 0; j < n2; ++j) c2 = std::max(c2, r.v[j]);
    }
    for (std::size_t i = 0; i < n1; ++i) plan.row_duals[i] = c1 - r.u[i];
    for (std::size_t j = 0; j < n2; ++j) plan.col_duals[j] = c2 - r.v[j];
    plan.total_dual = c1 + c2;
    return plan;
}

double ot_value(const TransportPlan& plan, const Matrix& cost) {
    if (plan.flows.rows() != cost.rows() || plan.flows.cols() != cost.cols()) {
        throw ShapeError("ot_value: plan and cost shapes differ");
    }
    double v = 0.0;
    for (std::size_t k = 0; k < cost.size(); ++k) v += cost.raw()[k] * plan.flows.raw()[k];
    return v;
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

namespace {

struct BruteState {
    const Matrix* cost;
    std::size_t m, n;
    std::vector<long long> ra, cb;
    long long target;
    double best;

    void rec(std::size_t idx, long long shipped, double acc) {
        if (acc >= best) return;
        if (idx == m * n) {
            if (shipped == target) best = acc;
            return;
        }
        const std::size_t i = idx / n, j = idx % n;
        long long rem_supply = 0;
        for (std::size_t k = i; k < m; ++k) rem_supply += ra[k];
        long long rem_demand = 0;
        for (std::size_t k = 0; k < n; ++k) rem_demand += cb[k];
        if (shipped + std::min(rem_supply, rem_demand) < target) return;

        const long long fmax = std::min(ra[i], cb[j]);
        for (long long f = 0; f <= fmax; ++f) {
            ra[i] -= f;
            cb[j] -= f;
            rec(idx + 1, shipped + f, acc + static_cast<double>(f) * (*cost)(i, j));
            ra[i] += f;
            cb[j] += f;
        }
    }
};

}  // namespace

double brute_force_transport(const Matrix& cost, const std::vector<double>& w1,
                             const std::vector<double>& w2) {
    check_instance("brute_force_transport", cost, w1, w2);
    const std::size_t m = w1.size(), n = w2.size();
    if (m > 4 || n > 4) throw ValueError("brute_force_transport: instance too large for enumeration");
    std::vector<long long> a(m), b(n);
    for (std::size_t i = 0; i < m; ++i) {
        a[i] = std::llround(w1[i]);
        if (std::fabs(w1[i] - static_cast<double>(a[i])) > 1e-9) {
            throw ValueError("brute_force_transport: weights must be integers");
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        b[j] = std::llround(w2[j]);
        if (std::fabs(w2[j] - static_cast<double>(b[j])) > 1e-9) {
            throw ValueError("brute_force_transport: weights must be integers");
        }
    }
    const long long sa = std::accumulate(a.begin(), a.end(), 0LL);
    const long long sb = std::accumulate(b.begin(), b.end(), 0LL);
    const long long target = std::min(sa, sb);
    if (target > 12) throw ValueError("brute_force_transport: instance too large for enumeration");
    if (target == 0) return 0.0;

    // Shift costs to be nonnegative so partial sums prune; the total flow is
    // fixed, so the shift changes the value by exactly shift * target.
    double cmin = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) cmin = std::min(cmin, cost(i, j));
    }
    Matrix shifted(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) shifted(i, j) = cost(i, j) - cmin;
    }

    BruteState st;
    st.cost = &shifted;
    st.m = m;
    st.n = n;
    st.ra = a;
    st.cb = b;
    st.target = target;
    st.best = std::numeric_limits<double>::infinity();
    st.rec(0, 0, 0.0);
    if (!std::isfinite(st.best)) throw SolverError("brute_force_transport: no feasible flow found");
    return st.best + cmin * static_cast<double>(target);
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

namespace {

TransportGrads kkt_qp_gradients(const TransportPlan& plan, const Matrix& cost,
                                const std::vector<double>& w1, const std::vector<double>& w2,
                                double eps) {
    const std::size_t m = w1.size(), n = w2.size();
    TransportGrads g;
    g.dcost = Matrix(m, n);
    g.dw1.assign(m, 0.0);
    g.dw2.assign(n, 0.0);

    const double W1 = vec_sum(w1), W2 = vec_sum(w2);
    const double total = std::min(W1, W2);
    if (total <= 0.0) return g;
    const bool rows_min = (W1 <= W2);

    // Damped problem: min c.f + (eps/2)|f|^2 over the transport polytope. The
    // min-side capacities are necessarily tight, so they stand in for the
    // total-flow equality; the max side contributes active inequalities only.
    const double act_tol = 1e-7 * std::max(1.0, total);

    std::vector<char> free_cell(m * n, 0);
    for (std::size_t idx = 0; idx < m * n; ++idx) {
        if (plan.flows(idx / n, idx % n) > kSupportTol) free_cell[idx] = 1;
    }
    if (std::find(free_cell.begin(), free_cell.end(), char(1)) == free_cell.end()) {
        std::size_t best_idx = 0;
        for (std::size_t idx = 1; idx < m * n; ++idx) {
            if (plan.flows(idx / n, idx % n) > plan.flows(best_idx / n, best_idx % n)) best_idx = idx;
        }
        free_cell[best_idx] = 1;
    }

    std::vector<char> row_active(m, 0), col_active(n, 0);
    for (std::size_t i = 0; i < m; ++i) {
        double rs = 0.0;
        for (std::size_t j = 0; j < n; ++j) rs += plan.flows(i, j);
        row_active[i] = (rows_min || w1[i] - rs <= act_tol) ? 1 : 0;
    }
    for (std::size_t j = 0; j < n; ++j) {
        double csum = 0.0;
        for (std::size_t i = 0; i < m; ++i) csum += plan.flows(i, j);
        col_active[j] = (!rows_min || w2[j] - csum <= act_tol) ? 1 : 0;
    }

    const double cost_scale = std::max(1.0, max_abs(cost));
    const double sign_tol = 1e-8 * cost_scale;

    std::vector<double> f_free, mu, padj, qadj;
    std::vector<std::size_t> fidx;                 // flat cell index per free slot
    std::vector<int> con_kind;                     // 0 = row, 1 = col (kept constraints)
    std::vector<std::size_t> con_id;               // row or column index
    std::vector<char> kept_row(m, 0), kept_col(n, 0);

    for (std::size_t pass = 0;; ++pass) {
        if (pass >= 200) throw SolverError("kkt_qp active-set iteration did not converge");

        fidx.clear();
        for (std::size_t idx = 0; idx < m * n; ++idx) {
            if (free_cell[idx]) fidx.push_back(idx);
        }
        const std::size_t nf = fidx.size();

        // Candidate active constraints in fixed order: rows then columns.
        std::vector<std::vector<double>> rows;
        std::vector<int> kinds;
        std::vector<std::size_t> ids;
        std::vector<double> rhs;
        for (std::size_t i = 0; i < m; ++i) {
            if (!row_active[i]) continue;
            std::vector<double> r(nf, 0.0);
            for (std::size_t k = 0; k < nf; ++k) {
                if (fidx[k] / n == i) r[k] = 1.0;
            }
            rows.push_back(std::move(r));
            kinds.push_back(0);
            ids.push_back(i);
            rhs.push_back(w1[i]);
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (!col_active[j]) continue;
            std::vector<double> r(nf, 0.0);
            for (std::size_t k = 0; k < nf; ++k) {
                if (fidx[k] % n == j) r[k] = 1.0;
            }
            rows.push_back(std::move(r));
            kinds.push_back(1);
            ids.push_back(j);
            rhs.push_back(w2[j]);
        }

        // Drop linearly dependent constraint rows (modified Gram-Schmidt); their
        // multipliers are fixed to zero, a valid choice at degenerate optima.
        std::vector<std::vector<double>> ortho;
        std::vector<std::size_t> kept;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            std::vector<double> vrow = rows[r];
            double orig = 0.0;
            for (const double x : vrow) orig += x * x;
            orig = std::sqrt(orig);
            for (const auto& qv : ortho) {
                double dot = 0.0;
                for (std::size_t k = 0; k < nf; ++k) dot += qv[k] * vrow[k];
                for (std::size_t k = 0; k < nf; ++k) vrow[k] -= dot * qv[k];
            }
            double norm = 0.0;
            for (const double x : vrow) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 1e-10 * std::max(1.0, orig)) {
                for (auto& x : vrow) x /= norm;
                ortho.push_back(std::move(vrow));
                kept.push_back(r);
            }
        }
        const std::size_t nc = kept.size();
        con_kind.assign(nc, 0);
        con_id.assign(nc, 0);
        std::fill(kept_row.begin(), kept_row.end(), 0);
        std::fill(kept_col.begin(), kept_col.end(), 0);
        for (std::size_t k = 0; k < nc; ++k) {
            con_kind[k] = kinds[kept[k]];
            con_id[k] = ids[kept[k]];
            if (con_kind[k] == 0) {
                kept_row[con_id[k]] = 1;
            } else {
                kept_col[con_id[k]] = 1;
            }
        }

        // K = [[eps I, G^T], [G, 0]] with G the kept constraints over free cells.
        const std::size_t dim = nf + nc;
        std::vector<double> K(dim * dim, 0.0);
        for (std::size_t k = 0; k < nf; ++k) K[k * dim + k] = eps;
        for (std::size_t r = 0; r < nc; ++r) {
            const auto& grow = rows[kept[r]];
            for (std::size_t k = 0; k < nf; ++k) {
                K[k * dim + (nf + r)] = grow[k];
                K[(nf + r) * dim + k] = grow[k];
            }
        }
        DenseLU lu;
        lu.factor(std::move(K), dim);

        std::vector<double> b(dim, 0.0);
        for (std::size_t k = 0; k < nf; ++k) b[k] = -cost(fidx[k] / n, fidx[k] % n);
        for (std::size_t r = 0; r < nc; ++r) b[nf + r] = rhs[kept[r]];
        std::vector<double> sol = lu.solve(std::move(b));
        f_free.assign(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(nf));
        mu.assign(sol.begin() + static_cast<std::ptrdiff_t>(nf), sol.end());

        // Active-set corrections, first violation in index order.
        bool changed = false;

        for (std::size_t k = 0; k < nf && !changed; ++k) {
            if (f_free[k] < -act_tol) {
                free_cell[fidx[k]] = 0;
                changed = true;
            }
        }
        if (!changed) {
            for (std::size_t idx = 0; idx < m * n && !changed; ++idx) {
                if (free_cell[idx]) continue;
                const std::size_t i = idx / n, j = idx % n;
                double lambda = cost(i, j);
                for (std::size_t k = 0; k < nc; ++k) {
                    if ((con_kind[k] == 0 && con_id[k] == i) || (con_kind[k] == 1 && con_id[k] == j)) {
                        lambda += mu[k];
                    }
                }
                if (lambda < -sign_tol) {
                    free_cell[idx] = 1;
                    changed = true;
                }
            }
        }
        if (!changed) {
            // Max-side capacities that the damped solution now violates.
            for (std::size_t i = 0; i < m && !changed; ++i) {
                if (row_active[i]) continue;
                double rs = 0.0;
                for (std::size_t k = 0; k < nf; ++k) {
                    if (fidx[k] / n == i) rs += f_free[k];
                }
                if (rs > w1[i] + act_tol) {
                    row_active[i] = 1;
                    changed = true;
                }
            }
            for (std::size_t j = 0; j < n && !changed; ++j) {
                if (col_active[j]) continue;
                double csum = 0.0;
                for (std::size_t k = 0; k < nf; ++k) {
                    if (fidx[k] % n == j) csum += f_free[k];
                }
                if (csum > w2[j] + act_tol) {
                    col_active[j] = 1;
                    changed = true;
                }
            }
        }
        if (!changed) {
            // Active max-side inequalities must keep nonnegative multipliers.
            for (std::size_t k = 0; k < nc && !changed; ++k) {
                const bool is_min_side = (con_kind[k] == 0) == rows_min;
                if (is_min_side) continue;
                if (mu[k] < -sign_tol) {
                    if (con_kind[k] == 0) {
                        row_active[con_id[k]] = 0;
                    } else {
                        col_active[con_id[k]] = 0;
                    }
                    changed = true;
                }
            }
        }
        if (changed) continue;

        // Converged. Adjoint solve K [p; q] = [c_F; 0] yields every sensitivity:
        // dV/dc = f - p on free cells (0 elsewhere), dV/dw_k = q_k on kept
        // active capacities (0 on inactive or dropped ones).
        std::vector<double> badj(dim, 0.0);
        for (std::size_t k = 0; k < nf; ++k) badj[k] = cost(fidx[k] / n, fidx[k] % n);
        std::vector<double> adj = lu.solve(std::move(badj));
        for (std::size_t k = 0; k < nf; ++k) {
            g.dcost(fidx[k] / n, fidx[k] % n) = f_free[k] - adj[k];
        }
        for (std::size_t k = 0; k < nc; ++k) {
            if (con_kind[k] == 0) {
                g.dw1[con_id[k]] = adj[nf + k];
            } else {
                g.dw2[con_id[k]] = adj[nf + k];
            }
        }
        return g;
    }
}

}  // namespace

TransportGrads transport_gradients(const TransportPlan& plan, const Matrix& cost,
                                   const std::vector<double>& w1, const std::vector<double>& w2,
                                   const TransportGradOptions& opts) {
    check_instance("transport_gradients", cost, w1, w2);
    if (plan.flows.rows() != cost.rows() || plan.flows.cols() != cost.cols() ||
        plan.row_duals.size() != w1.size() || plan.col_duals.size() != w2.size()) {
        throw ShapeError("transport_gradients: plan does not match the instance");
    }

    if (opts.mode == TransportGradMode::KktQp) {
        if (!(opts.damping > 0.0)) throw ValueError("transport_gradients: damping must be positive");
        return kkt_qp_gradients(plan, cost, w1, w2, opts.damping);
    }

    TransportGrads g;
    g.dcost = plan.flows;
    g.dw1.assign(w1.size(), 0.0);
    g.dw2.assign(w2.size(), 0.0);
    if (plan.supply_side_min) {
        for (std::size_t i = 0; i < w1.size(); ++i) g.dw1[i] = plan.total_dual - plan.row_duals[i];
        for (std::size_t j = 0; j < w2.size(); ++j) g.dw2[j] = -plan.col_duals[j];
    } else {
        for (std::size_t i = 0; i < w1.size(); ++i) g.dw1[i] = -plan.row_duals[i];
        for (std::size_t j = 0; j < w2.size(); ++j) g.dw2[j] = plan.total_dual - plan.col_duals[j];
    }
    return g;
}

// ---------------------------------------------------------------------------
// Row-aligned modality distances
// ---------------------------------------------------------------------------

double modality_distance(const Matrix& z1, const Matrix& z2, DistanceKind metric) {
    if (!z1.same_shape(z2)) throw ShapeError("modality_distance: embeddings must share a shape");
    if (metric == DistanceKind::Ot) {
        throw ValueError("modality_distance: the transport metric is not row-aligned");
    }
    const std::size_t n = z1.rows(), d = z1.cols();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        switch (metric) {
            case DistanceKind::Manhattan: {
                for (std::size_t o = 0; o < d; ++o) total += std::fabs(z1(i, o) - z2(i, o));
                break;
            }
            case DistanceKind::Euclidean: {
                double s = 0.0;
                for (std::size_t o = 0; o < d; ++o) {
                    const double diff = z1(i, o) - z2(i, o);
                    s += diff * diff;
                }
                total += std::sqrt(s);
                break;
            }
            case DistanceKind::Cosine: {
                double a = 0.0, b = 0.0, dot = 0.0;
                for (std::size_t o = 0; o < d; ++o) {
                    a += z1(i, o) * z1(i, o);
                    b += z2(i, o) * z2(i, o);
                    dot += z1(i, o) * z2(i, o);
                }
                a = std::sqrt(a);
                b = std::sqrt(b);
                total += (a < 1e-12 || b < 1e-12) ? 1.0 : 1.0 - dot / (a * b);
                break;
            }
            case DistanceKind::Ot:
                break;  // unreachable
        }
    }
    return total;
}

}  // namespace amosl
