#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedu/tensor.hpp"

using namespace fedu;

namespace {

Tensor row_matrix(std::initializer_list<std::initializer_list<Scalar>> rows,
                  bool requires_grad = false) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = static_cast<Index>(rows.begin()->size());
    Matrix m(r, c);
    Index i = 0;
    for (const auto& row : rows) {
        Index j = 0;
        for (Scalar v : row) m(i, j++) = v;
        ++i;
    }
    return Tensor::from_matrix(m, requires_grad);
}

}  // namespace

TEST_CASE("matmul: identity matrix is a no-op") {
    Tensor eye = row_matrix({{1, 0}, {0, 1}});
    Tensor b = row_matrix({{5, 6}, {7, 8}});
    Tensor out = matmul(eye, b);
    CHECK(out.shape() == Shape{2, 2});
    CHECK(out.value()(0) == 5.0);
    CHECK(out.value()(1) == 6.0);
    CHECK(out.value()(2) == 7.0);
    CHECK(out.value()(3) == 8.0);
}

TEST_CASE("matmul: 1x1 case") {
    Tensor a = row_matrix({{2}});
    Tensor b = row_matrix({{3}});
    CHECK(matmul(a, b).scalar_value() == 6.0);
}

TEST_CASE("matmul: inner-dimension mismatch names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), DimensionError);
    try {
        matmul(a, b);
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("[4,2]") != std::string::npos);
    }
}

TEST_CASE("relu: negative and zero entries clamp to zero") {
    Tensor x = Tensor::from_vector((Vector(3) << -1, 0, 2).finished());
    Tensor out = relu(x);
    CHECK(out.value()(0) == 0.0);
    CHECK(out.value()(1) == 0.0);
    CHECK(out.value()(2) == 2.0);
}

TEST_CASE("add: zero is the identity") {
    Rng rng(7);
    Tensor x = Tensor::uniform({3, 4}, -2.0, 2.0, rng);
    Tensor out = add(x, Tensor::zeros({3, 4}));
    CHECK(out.value() == x.value());
}

TEST_CASE("add/sub: shape mismatch is a dimension error") {
    CHECK_THROWS_AS(add(Tensor::zeros({2, 2}), Tensor::zeros({4})), DimensionError);
    CHECK_THROWS_AS(sub(Tensor::zeros({2, 2}), Tensor::zeros({2, 3})), DimensionError);
}

TEST_CASE("sub: elementwise difference") {
    Tensor a = Tensor::from_vector((Vector(2) << 5, 1).finished());
    Tensor b = Tensor::from_vector((Vector(2) << 2, 3).finished());
    Tensor out = sub(a, b);
    CHECK(out.value()(0) == 3.0);
    CHECK(out.value()(1) == -2.0);
}

TEST_CASE("scale: scalar multiply") {
    Tensor x = Tensor::from_vector((Vector(2) << 1, 2).finished());
    Tensor out = scale(x, 0.5);
    CHECK(out.value()(0) == 0.5);
    CHECK(out.value()(1) == 1.0);
}

TEST_CASE("add_rowvec: bias broadcast over rows") {
    Tensor m = row_matrix({{1, 2}, {3, 4}});
    Tensor v = Tensor::from_vector((Vector(2) << 10, 20).finished());
    Tensor out = add_rowvec(m, v);
    CHECK(out.value()(0) == 11.0);
    CHECK(out.value()(1) == 22.0);
    CHECK(out.value()(2) == 13.0);
    CHECK(out.value()(3) == 24.0);
}

TEST_CASE("l2_normalize: 3-4-5 row") {
    Tensor out = l2_normalize(row_matrix({{3, 4}}));
    CHECK(out.value()(0) == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(out.value()(1) == doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("l2_normalize: unit vector maps to itself") {
    Tensor out = l2_normalize(row_matrix({{0, 1}}));
    CHECK(out.value()(0) == 0.0);
    CHECK(out.value()(1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("l2_normalize: random batch rows all have unit norm") {
    Rng rng(99);
    Tensor x = Tensor::uniform({16, 7}, -3.0, 3.0, rng);
    Tensor out = l2_normalize(x);
    for (Index i = 0; i < 16; ++i) {
        CHECK(std::abs(out.matrix().row(i).norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("l2_normalize: idempotent to 1e-12") {
    Rng rng(3);
    Tensor x = Tensor::uniform({8, 5}, -2.0, 2.0, rng);
    Tensor once = l2_normalize(x);
    Tensor twice = l2_normalize(once);
    CHECK((twice.value() - once.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("l2_normalize: zero-norm row raises and names the row") {
    Matrix m = Matrix::Ones(3, 2);
    m.row(1).setZero();
    CHECK_THROWS_WITH_AS(l2_normalize(Tensor::from_matrix(m)), doctest::Contains("row 1"),
                         DegenerateInputError);
}

TEST_CASE("contrastive_loss: identical directions give zero") {
    Tensor y = l2_normalize(row_matrix({{1, 2, 2}}));
    CHECK(contrastive_loss(y, y.detach()).scalar_value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("contrastive_loss: orthogonal unit vectors give two") {
    Tensor y = row_matrix({{1, 0}});
    Tensor t = row_matrix({{0, 1}});
    CHECK(contrastive_loss(y, t).scalar_value() == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("contrastive_loss: antiparallel vectors give four") {
    Tensor y = row_matrix({{2, 0}});
    Tensor t = row_matrix({{-5, 0}});
    CHECK(contrastive_loss(y, t).scalar_value() == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("contrastive_loss: value stays in [0, 4] on random batches") {
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        Tensor y = Tensor::uniform({6, 4}, -1.0, 1.0, rng);
        Tensor t = Tensor::uniform({6, 4}, -1.0, 1.0, rng);
        const Scalar loss = contrastive_loss(y, t).scalar_value();
        CHECK(loss >= 0.0);
        CHECK(loss <= 4.0);
    }
}

TEST_CASE("contrastive_loss: zero-norm row raises degenerate-input error") {
    Tensor y = Tensor::zeros({1, 3});
    Tensor t = row_matrix({{1, 0, 0}});
    CHECK_THROWS_AS(contrastive_loss(y, t), DegenerateInputError);
}

TEST_CASE("contrastive_loss: mean over the batch") {
    // Row 0 aligned (0), row 1 orthogonal (2) -> mean 1.
    Tensor y = row_matrix({{1, 0}, {1, 0}});
    Tensor t = row_matrix({{3, 0}, {0, 2}});
    CHECK(contrastive_loss(y, t).scalar_value() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sum: adds every entry") {
    Tensor x = row_matrix({{1, 2}, {3, 4}});
    CHECK(sum(x).scalar_value() == 10.0);
}

TEST_CASE("softmax_cross_entropy: uniform logits give log C") {
    Tensor logits = Tensor::zeros({2, 4});
    const Scalar loss = softmax_cross_entropy(logits, {0, 3}).scalar_value();
    CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("softmax_cross_entropy: out-of-range label is a contract error") {
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::zeros({1, 3}), {3}), ContractError);
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::zeros({1, 3}), {-1}), ContractError);
}

TEST_CASE("tensor: from_values validates the element count") {
    CHECK_THROWS_AS(Tensor::from_values({2, 3}, Vector::Zero(5)), DimensionError);
}

TEST_CASE("tensor: detach copies values and drops grad tracking") {
    Tensor x = Tensor::from_vector((Vector(2) << 1, 2).finished(), true);
    Tensor d = x.detach();
    CHECK(!d.requires_grad());
    CHECK(d.value() == x.value());
    d.value()(0) = 42.0;
    CHECK(x.value()(0) == 1.0);
}

TEST_CASE("tensor: uniform respects bounds and is seed-deterministic") {
    Rng a(5), b(5);
    Tensor ta = Tensor::uniform({4, 4}, -0.25, 0.25, a);
    Tensor tb = Tensor::uniform({4, 4}, -0.25, 0.25, b);
    CHECK(ta.value() == tb.value());
    CHECK(ta.value().minCoeff() >= -0.25);
    CHECK(ta.value().maxCoeff() < 0.25);
}
