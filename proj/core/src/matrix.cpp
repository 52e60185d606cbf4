#include "amosl/matrix.hpp"

#include <cmath>
#include <string>

namespace amosl {

namespace {

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) +
                     "x" + std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("from_rows: ragged row lengths");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Matrix Matrix::column(const std::vector<double>& v) {
    Matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

Matrix Matrix::row(const std::vector<double>& v) {
    Matrix m(1, v.size());
    for (std::size_t j = 0; j < v.size(); ++j) m(0, j) = v[j];
    return m;
}

double Matrix::scalar() const {
    if (!is_scalar()) {
        throw ShapeError("scalar: matrix is " + std::to_string(rows_) + "x" +
                         std::to_string(cols_) + ", expected 1x1");
    }
    return data_[0];
}

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Matrix::fill(double v) {
    for (double& x : data_) x = v;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_fail("matmul", a, b);
    Matrix c(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c.data() + i * m;
        const double* ai = a.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* bp = b.data() + p * m;
            for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("add", a, b);
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.raw()[i] += b.raw()[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("sub", a, b);
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.raw()[i] -= b.raw()[i];
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("hadamard", a, b);
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.raw()[i] *= b.raw()[i];
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& v : c.raw()) v *= s;
    return c;
}

double sum(const Matrix& a) {
    double s = 0.0;
    for (double v : a.raw()) s += v;
    return s;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.raw()) m = std::max(m, std::fabs(v));
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("max_abs_diff", a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a.raw()[i] - b.raw()[i]));
    return m;
}

void add_in_place(Matrix& into, const Matrix& term) {
    if (!into.same_shape(term)) shape_fail("add_in_place", into, term);
    for (std::size_t i = 0; i < into.size(); ++i) into.raw()[i] += term.raw()[i];
}

void add_scaled_in_place(Matrix& into, const Matrix& term, double s) {
    if (!into.same_shape(term)) shape_fail("add_scaled_in_place", into, term);
    for (std::size_t i = 0; i < into.size(); ++i) into.raw()[i] += s * term.raw()[i];
}

}  // namespace amosl
