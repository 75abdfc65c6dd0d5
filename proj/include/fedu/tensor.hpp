#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fedu/errors.hpp"
#include "fedu/rng.hpp"
#include "fedu/types.hpp"

namespace fedu {

std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
    Shape shape;
    Vector value;  // flat, row-major
    Vector grad;   // size 0 until backward touches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Consumes this node's grad and accumulates into the parents' grads.
    std::function<void(const Vector&)> backward_fn;

    Index size() const { return value.size(); }
};

}  // namespace detail

// Reverse-mode autodiff handle. Ops build a fresh graph every forward pass;
// backward() walks it once and the graph is freed when the handles go out of
// scope, so there is no global tape and concurrent graphs never interact.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from_matrix(const Matrix& m, bool requires_grad = false);
    static Tensor from_vector(const Vector& v, bool requires_grad = false);
    static Tensor from_values(Shape shape, Vector values, bool requires_grad = false);
    static Tensor scalar(Scalar value);
    // Entries drawn uniform(lo, hi) in flat row-major order.
    static Tensor uniform(Shape shape, Scalar lo, Scalar hi, Rng& rng, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    Index rank() const { return static_cast<Index>(shape().size()); }
    Index size() const;
    bool requires_grad() const;

    const Vector& value() const;
    Vector& value();
    Scalar scalar_value() const;  // requires size() == 1

    bool has_grad() const;
    const Vector& grad() const;  // ContractError when absent
    void clear_grad();

    // Rank-2 views over the flat buffer.
    ConstMatrixMap matrix() const;
    MatrixMap matrix();

    // Value copy with no graph attached and requires_grad off.
    Tensor detach() const;
    // Fresh leaf with copied values; keeps requires_grad unless overridden.
    Tensor clone() const;

    std::shared_ptr<detail::TensorNode> node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

    std::shared_ptr<detail::TensorNode> node_;

    friend Tensor make_op_result(Shape shape, Vector value, std::vector<Tensor> parents,
                                 std::function<void(const Vector&)> backward_fn);
};

// [M,K] x [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);
// Elementwise over congruent shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
// [B,D] + [D] broadcast over rows (bias addition).
Tensor add_rowvec(const Tensor& m, const Tensor& v);
Tensor scale(const Tensor& a, Scalar c);
Tensor relu(const Tensor& a);
// Row-wise x / ||x||_2 on a rank-2 tensor; a row norm <= kNormEpsilon raises
// DegenerateInputError naming the row (never clamped).
Tensor l2_normalize(const Tensor& x);
// Mean over rows of 2 - 2 * cos(y_b, y_target_b); scalar output in [0, 4].
Tensor contrastive_loss(const Tensor& y, const Tensor& y_target);
Tensor sum(const Tensor& a);
// Mean cross-entropy of row-wise softmax(logits) against integer labels.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Seeds d(loss)/d(loss) = 1 and accumulates grads into every tensor reachable
// from `loss` that requires grad. The loss must be a scalar.
void backward(const Tensor& loss);

inline constexpr Scalar kNormEpsilon = 1e-12;

}  // namespace fedu
