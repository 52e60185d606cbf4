#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "amosl/errors.hpp"
#include "amosl/gradcheck.hpp"
#include "amosl/matrix.hpp"
#include "amosl/tape.hpp"

using namespace amosl;

TEST_CASE("matmul value") {
    Tape tape;
    const ValueId a = tape.input(Matrix::from_rows({{1, 2, 3}, {4, 5, 6}}), false);
    const ValueId b = tape.input(Matrix::from_rows({{1}, {0}, {-1}}), false);
    const Matrix& v = tape.value(tape.matmul(a, b));
    CHECK(v.rows() == 2);
    CHECK(v.cols() == 1);
    CHECK(v(0, 0) == -2.0);
    CHECK(v(1, 0) == -2.0);
}

TEST_CASE("matmul rejects mismatched inner dims, naming the op") {
    Tape tape;
    const ValueId a = tape.input(Matrix(2, 3), false);
    const ValueId b = tape.input(Matrix(2, 3), false);
    CHECK_THROWS_WITH_AS(tape.matmul(a, b), doctest::Contains("matmul"), ShapeError);
}

TEST_CASE("relu clamps negatives") {
    Tape tape;
    const ValueId x = tape.input(Matrix::from_rows({{-1, 2}}), false);
    const Matrix& v = tape.value(tape.relu(x));
    CHECK(v(0, 0) == 0.0);
    CHECK(v(0, 1) == 2.0);
}

TEST_CASE("dropout is the identity in eval mode") {
    Tape tape(42, TapeMode::Eval);
    const Matrix x = Matrix::from_rows({{1, -2}, {3, 4}});
    const ValueId d = tape.dropout(tape.input(x, false), 0.1);
    CHECK(tape.value(d) == x);
}

TEST_CASE("dropout rejects p outside [0, 1)") {
    Tape tape;
    const ValueId x = tape.input(Matrix(2, 2, 1.0), false);
    CHECK_THROWS_AS(tape.dropout(x, 1.0), ValueError);
    CHECK_THROWS_AS(tape.dropout(x, -0.1), ValueError);
}

TEST_CASE("dropout masks are seed-deterministic") {
    const Matrix x(8, 8, 1.0);
    Matrix first;
    for (int rep = 0; rep < 2; ++rep) {
        Tape tape(1234, TapeMode::Train);
        const Matrix& v = tape.value(tape.dropout(tape.input(x, false), 0.3));
        if (rep == 0) {
            first = v;
        } else {
            CHECK(v == first);
        }
    }
    Tape other(1235, TapeMode::Train);
    CHECK_FALSE(other.value(other.dropout(other.input(x, false), 0.3)) == first);
}

TEST_CASE("backward of x squared") {
    Tape tape;
    const ValueId x = tape.input(Matrix::from_rows({{3}}), true);
    const ValueId loss = tape.hadamard(x, x);
    tape.backward(loss);
    CHECK(tape.grad(x)(0, 0) == 6.0);
}

TEST_CASE("backward of a bilinear form") {
    Tape tape;
    const ValueId a = tape.input(Matrix::from_rows({{1, 2}}), true);
    const ValueId b = tape.input(Matrix::from_rows({{3}, {4}}), false);
    tape.backward(tape.matmul(a, b));
    CHECK(tape.grad(a) == Matrix::from_rows({{3, 4}}));
}

TEST_CASE("backward rejects a non-scalar root") {
    Tape tape;
    const ValueId x = tape.input(Matrix(2, 2, 1.0), true);
    CHECK_THROWS_AS(tape.backward(tape.relu(x)), ShapeError);
}

TEST_CASE("inputs off the loss path get exactly zero gradients") {
    Tape tape;
    const ValueId x = tape.input(Matrix::from_rows({{2}}), true);
    const ValueId unused = tape.input(Matrix::from_rows({{5, 5}}), true);
    tape.backward(tape.hadamard(x, x));
    CHECK(tape.grad(unused) == Matrix(1, 2));
}

TEST_CASE("grad on an untracked node throws") {
    Tape tape;
    const ValueId x = tape.input(Matrix(1, 1, 1.0), false);
    CHECK_THROWS_AS(tape.grad(x), ValueError);
}

TEST_CASE("elem_max routes tie gradients to the first operand") {
    Tape tape;
    const ValueId a = tape.input(Matrix::from_rows({{1, 5}}), true);
    const ValueId b = tape.input(Matrix::from_rows({{1, 2}}), true);
    const ValueId m = tape.elem_max(a, b);
    CHECK(tape.value(m) == Matrix::from_rows({{1, 5}}));
    tape.backward(tape.row_sum(m));
    CHECK(tape.grad(a) == Matrix::from_rows({{1, 1}}));
    CHECK(tape.grad(b) == Matrix::from_rows({{0, 0}}));
}

TEST_CASE("col_max ties pick the lowest row") {
    Tape tape;
    const ValueId a = tape.input(Matrix::from_rows({{2, 0}, {2, 1}}), true);
    const ValueId m = tape.col_max(a);
    CHECK(tape.value(m) == Matrix::from_rows({{2, 1}}));
    tape.backward(tape.matmul(m, tape.input(Matrix::from_rows({{1}, {1}}), false)));
    CHECK(tape.grad(a) == Matrix::from_rows({{1, 0}, {0, 1}}));
}

TEST_CASE("softmax cross entropy value and label check") {
    Tape tape;
    const ValueId logits = tape.input(Matrix::from_rows({{0.0, 0.0}}), true);
    const ValueId loss = tape.softmax_cross_entropy(logits, 0);
    CHECK(tape.value(loss)(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(tape.softmax_cross_entropy(logits, 2), ValueError);
}

TEST_CASE("finite differences are near-exact on a quadratic") {
    const ScalarBuilder build = [](Tape& tape, const std::vector<ValueId>& in) {
        return tape.hadamard(in[0], in[0]);
    };
    const GradCheckReport rep = finite_diff_check(build, {Matrix::from_rows({{3}})});
    CHECK(rep.max_rel_err < 1e-8);
    CHECK(rep.base_value == 9.0);
}

TEST_CASE("finite differences on softmax cross entropy") {
    const ScalarBuilder build = [](Tape& tape, const std::vector<ValueId>& in) {
        return tape.softmax_cross_entropy(in[0], 2);
    };
    const GradCheckReport rep =
        finite_diff_check(build, {Matrix::from_rows({{0.3, -1.2, 0.7, 0.1}})});
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("finite differences across a dropout mask replay") {
    const ScalarBuilder build = [](Tape& tape, const std::vector<ValueId>& in) {
        return tape.row_sum(tape.dropout(in[0], 0.4));
    };
    GradCheckOptions opts;
    opts.seed = 77;
    const GradCheckReport rep = finite_diff_check(build, {Matrix(1, 6, 2.0)}, opts);
    CHECK(rep.max_rel_err < 1e-8);
}

TEST_CASE("identical seeds give bit-identical forward values and gradients") {
    const Matrix x = Matrix::from_rows({{0.5, -1.5, 2.0}, {1.0, 0.25, -0.75}});
    Matrix value, grad;
    for (int rep = 0; rep < 2; ++rep) {
        Tape tape(99, TapeMode::Train);
        const ValueId in = tape.input(x, true);
        const ValueId ones = tape.input(Matrix(1, 2, 1.0), false);
        const ValueId root =
            tape.matmul(ones, tape.row_sum(tape.dropout(tape.relu(in), 0.25)));
        tape.backward(root);
        if (rep == 0) {
            value = tape.value(root);
            grad = tape.grad(in);
        } else {
            CHECK(tape.value(root) == value);
            CHECK(tape.grad(in) == grad);
        }
    }
}
