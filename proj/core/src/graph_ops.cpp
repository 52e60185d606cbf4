#include "amosl/graph_ops.hpp"

#include <cmath>
#include <sstream>

#include "amosl/errors.hpp"

namespace amosl {
namespace {

void check_square_nonneg(const char* who, const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0) {
        std::ostringstream os;
        os << who << ": expected a nonempty square matrix, got " << a.rows() << "x" << a.cols();
        throw ShapeError(os.str());
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!(a.raw()[k] >= 0.0) || !std::isfinite(a.raw()[k])) {
            throw ValueError(std::string(who) + ": adjacency entries must be finite and >= 0");
        }
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            if (a(i, j) != a(j, i)) {
                std::ostringstream os;
                os << who << ": adjacency must be symmetric, differs at (" << i << "," << j << ")";
                throw ValueError(os.str());
            }
        }
    }
}

}  // namespace

Matrix normalized_laplacian(const Matrix& adjacency) {
    check_square_nonneg("normalized_laplacian", adjacency);
    const std::size_t n = adjacency.rows();
    std::vector<double> dinv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += adjacency(i, j);
        dinv[i] = (deg > 0.0) ? 1.0 / std::sqrt(deg) : 0.0;
    }
    Matrix l = Matrix::identity(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            l(i, j) -= dinv[i] * adjacency(i, j) * dinv[j];
        }
    }
    return l;
}

Matrix scaled_laplacian(const Matrix& laplacian) {
    if (laplacian.rows() != laplacian.cols() || laplacian.rows() == 0) {
        throw ShapeError("scaled_laplacian: expected a nonempty square matrix");
    }
    Matrix out = laplacian;
    for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) -= 1.0;
    return out;
}

std::vector<Matrix> cheb_basis(const Matrix& scaled_laplacian, std::size_t order) {
    if (scaled_laplacian.rows() != scaled_laplacian.cols() || scaled_laplacian.rows() == 0) {
        throw ShapeError("cheb_basis: expected a nonempty square matrix");
    }
    if (order == 0) throw ValueError("cheb_basis: order must be >= 1");
    const std::size_t n = scaled_laplacian.rows();
    std::vector<Matrix> basis;
    basis.reserve(order);
    basis.push_back(Matrix::identity(n));
    if (order == 1) return basis;
    basis.push_back(scaled_laplacian);
    for (std::size_t k = 2; k < order; ++k) {
        Matrix next = matmul(scaled_laplacian, basis[k - 1]);
        for (std::size_t idx = 0; idx < next.size(); ++idx) {
            next.raw()[idx] = 2.0 * next.raw()[idx] - basis[k - 2].raw()[idx];
        }
        basis.push_back(std::move(next));
    }
    return basis;
}

Matrix gcn_norm_adjacency(const Matrix& adjacency) {
    check_square_nonneg("gcn_norm_adjacency", adjacency);
    const std::size_t n = adjacency.rows();
    Matrix a = adjacency;
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
    std::vector<double> dinv(n);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
        dinv[i] = 1.0 / std::sqrt(deg);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) a(i, j) *= dinv[i] * dinv[j];
    }
    return a;
}

Matrix cheb_conv(const std::vector<Matrix>& basis, const Matrix& x,
                 const std::vector<Matrix>& theta) {
    if (basis.empty()) throw ValueError("cheb_conv: empty basis");
    if (basis.size() != theta.size()) {
        throw ShapeError("cheb_conv: basis and filter counts differ");
    }
    Matrix out = matmul(matmul(basis[0], x), theta[0]);
    for (std::size_t k = 1; k < basis.size(); ++k) {
        add_in_place(out, matmul(matmul(basis[k], x), theta[k]));
    }
    return out;
}

Matrix gcn_conv(const Matrix& norm_adj, const Matrix& x, const Matrix& weight) {
    return matmul(matmul(norm_adj, x), weight);
}

}  // namespace amosl
