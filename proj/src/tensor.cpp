#include "fedu/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace fedu {

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out << ',';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

namespace {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

std::shared_ptr<TensorNode> make_leaf(Shape shape, Vector value, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return node;
}

void accumulate(const NodePtr& node, const Vector& contribution) {
    if (!node->requires_grad) return;
    if (node->grad.size() == 0) node->grad = Vector::Zero(node->size());
    node->grad += contribution;
}

ConstMatrixMap map2(const NodePtr& node) {
    return ConstMatrixMap(node->value.data(), node->shape[0], node->shape[1]);
}

void require_rank2(const Tensor& t, const char* op, const char* arg) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(op) + ": " + arg + " must be rank 2, got shape " +
                             shape_str(t.shape()));
    }
}

void require_congruent(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shapes are not congruent (" +
                             shape_str(a.shape()) + " vs " + shape_str(b.shape()) + ")");
    }
}

}  // namespace

Tensor make_op_result(Shape shape, Vector value, std::vector<Tensor> parents,
                      std::function<void(const Vector&)> backward_fn) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    for (const Tensor& p : parents) {
        node->parents.push_back(p.node());
        if (p.requires_grad()) node->requires_grad = true;
    }
    if (node->requires_grad) node->backward_fn = std::move(backward_fn);
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    Index n = shape_size(shape);
    return from_values(std::move(shape), Vector::Zero(n), requires_grad);
}

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
    Vector flat(m.size());
    MatrixMap(flat.data(), m.rows(), m.cols()) = m;
    return from_values({m.rows(), m.cols()}, std::move(flat), requires_grad);
}

Tensor Tensor::from_vector(const Vector& v, bool requires_grad) {
    return from_values({v.size()}, v, requires_grad);
}

Tensor Tensor::from_values(Shape shape, Vector values, bool requires_grad) {
    if (shape_size(shape) != values.size()) {
        throw DimensionError("tensor: shape " + shape_str(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
    }
    for (Index d : shape) {
        if (d <= 0) throw DimensionError("tensor: non-positive dimension in " + shape_str(shape));
    }
    return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(Scalar value) {
    Vector v(1);
    v[0] = value;
    return from_values({}, std::move(v), false);
}

Tensor Tensor::uniform(Shape shape, Scalar lo, Scalar hi, Rng& rng, bool requires_grad) {
    Vector v(shape_size(shape));
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(lo, hi);
    return from_values(std::move(shape), std::move(v), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

Index Tensor::size() const { return node_->size(); }

bool Tensor::requires_grad() const { return node_->requires_grad; }

const Vector& Tensor::value() const { return node_->value; }

Vector& Tensor::value() { return node_->value; }

Scalar Tensor::scalar_value() const {
    if (size() != 1) {
        throw ContractError("scalar_value: tensor has " + std::to_string(size()) + " elements");
    }
    return node_->value[0];
}

bool Tensor::has_grad() const { return node_->grad.size() != 0; }

const Vector& Tensor::grad() const {
    if (!has_grad()) throw ContractError("grad: no gradient has been populated for this tensor");
    return node_->grad;
}

void Tensor::clear_grad() { node_->grad.resize(0); }

ConstMatrixMap Tensor::matrix() const {
    if (rank() != 2) throw DimensionError("matrix: tensor has shape " + shape_str(shape()));
    return ConstMatrixMap(node_->value.data(), node_->shape[0], node_->shape[1]);
}

MatrixMap Tensor::matrix() {
    if (rank() != 2) throw DimensionError("matrix: tensor has shape " + shape_str(shape()));
    return MatrixMap(node_->value.data(), node_->shape[0], node_->shape[1]);
}

Tensor Tensor::detach() const { return from_values(node_->shape, node_->value, false); }

Tensor Tensor::clone() const { return from_values(node_->shape, node_->value, node_->requires_grad); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul", "lhs");
    require_rank2(b, "matmul", "rhs");
    if (a.shape()[1] != b.shape()[0]) {
        throw DimensionError("matmul: inner dimensions disagree (" + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()) + ")");
    }
    const Index m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Vector out(m * n);
    MatrixMap(out.data(), m, n) = a.matrix() * b.matrix();
    auto an = a.node(), bn = b.node();
    return make_op_result({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](const Vector& g) {
        ConstMatrixMap gm(g.data(), m, n);
        if (an->requires_grad) {
            Vector ga(m * k);
            MatrixMap(ga.data(), m, k) = gm * map2(bn).transpose();
            accumulate(an, ga);
        }
        if (bn->requires_grad) {
            Vector gb(k * n);
            MatrixMap(gb.data(), k, n) = map2(an).transpose() * gm;
            accumulate(bn, gb);
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_congruent(a, b, "add");
    auto an = a.node(), bn = b.node();
    return make_op_result(a.shape(), a.value() + b.value(), {a, b}, [an, bn](const Vector& g) {
        accumulate(an, g);
        accumulate(bn, g);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_congruent(a, b, "sub");
    auto an = a.node(), bn = b.node();
    return make_op_result(a.shape(), a.value() - b.value(), {a, b}, [an, bn](const Vector& g) {
        accumulate(an, g);
        accumulate(bn, Vector(-g));
    });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    require_rank2(m, "add_rowvec", "matrix");
    if (v.rank() != 1 || v.shape()[0] != m.shape()[1]) {
        throw DimensionError("add_rowvec: vector shape " + shape_str(v.shape()) +
                             " does not match matrix shape " + shape_str(m.shape()));
    }
    const Index rows = m.shape()[0], cols = m.shape()[1];
    Vector out(rows * cols);
    MatrixMap(out.data(), rows, cols) = m.matrix().rowwise() + v.value().transpose();
    auto mn = m.node(), vn = v.node();
    return make_op_result({rows, cols}, std::move(out), {m, v}, [mn, vn, rows, cols](const Vector& g) {
        accumulate(mn, g);
        if (vn->requires_grad) {
            ConstMatrixMap gm(g.data(), rows, cols);
            accumulate(vn, gm.colwise().sum().transpose());
        }
    });
}

Tensor scale(const Tensor& a, Scalar c) {
    auto an = a.node();
    return make_op_result(a.shape(), c * a.value(), {a},
                          [an, c](const Vector& g) { accumulate(an, Vector(c * g)); });
}

Tensor relu(const Tensor& a) {
    auto an = a.node();
    Vector out = a.value().cwiseMax(Scalar(0));
    return make_op_result(a.shape(), std::move(out), {a}, [an](const Vector& g) {
        // Subgradient at exactly zero is zero.
        accumulate(an, (an->value.array() > Scalar(0)).select(g.array(), Scalar(0)).matrix());
    });
}

Tensor l2_normalize(const Tensor& x) {
    require_rank2(x, "l2_normalize", "input");
    const Index rows = x.shape()[0], cols = x.shape()[1];
    ConstMatrixMap xm = x.matrix();
    Vector norms(rows);
    for (Index r = 0; r < rows; ++r) {
        norms[r] = xm.row(r).norm();
        if (norms[r] <= kNormEpsilon) {
            throw DegenerateInputError("l2_normalize: row " + std::to_string(r) +
                                       " has norm <= " + std::to_string(kNormEpsilon));
        }
    }
    Vector out(rows * cols);
    MatrixMap om(out.data(), rows, cols);
    for (Index r = 0; r < rows; ++r) om.row(r) = xm.row(r) / norms[r];
    Vector normed = out;
    auto xn = x.node();
    return make_op_result({rows, cols}, std::move(out), {x},
                          [xn, norms, normed, rows, cols](const Vector& g) {
                              if (!xn->requires_grad) return;
                              ConstMatrixMap gm(g.data(), rows, cols);
                              ConstMatrixMap zm(normed.data(), rows, cols);
                              Vector gx(rows * cols);
                              MatrixMap gxm(gx.data(), rows, cols);
                              for (Index r = 0; r < rows; ++r) {
                                  Scalar gz = gm.row(r).dot(zm.row(r));
                                  gxm.row(r) = (gm.row(r) - gz * zm.row(r)) / norms[r];
                              }
                              accumulate(xn, gx);
                          });
}

Tensor contrastive_loss(const Tensor& y, const Tensor& y_target) {
    require_rank2(y, "contrastive_loss", "y");
    require_congruent(y, y_target, "contrastive_loss");
    const Index rows = y.shape()[0], cols = y.shape()[1];
    ConstMatrixMap um = y.matrix();
    ConstMatrixMap vm = y_target.matrix();
    Vector unorm(rows), vnorm(rows), cosine(rows);
    Scalar total = 0;
    for (Index r = 0; r < rows; ++r) {
        unorm[r] = um.row(r).norm();
        vnorm[r] = vm.row(r).norm();
        if (unorm[r] <= kNormEpsilon || vnorm[r] <= kNormEpsilon) {
            throw DegenerateInputError("contrastive_loss: row " + std::to_string(r) +
                                       " has norm <= " + std::to_string(kNormEpsilon));
        }
        cosine[r] = um.row(r).dot(vm.row(r)) / (unorm[r] * vnorm[r]);
        total += Scalar(2) - Scalar(2) * cosine[r];
    }
    Vector out(1);
    out[0] = total / static_cast<Scalar>(rows);
    auto yn = y.node(), tn = y_target.node();
    return make_op_result({}, std::move(out), {y, y_target},
                          [yn, tn, unorm, vnorm, cosine, rows, cols](const Vector& g) {
                              const Scalar coeff = -Scalar(2) * g[0] / static_cast<Scalar>(rows);
                              ConstMatrixMap um = map2(yn);
                              ConstMatrixMap vm = map2(tn);
                              if (yn->requires_grad) {
                                  Vector gy(rows * cols);
                                  MatrixMap gym(gy.data(), rows, cols);
                                  for (Index r = 0; r < rows; ++r) {
                                      gym.row(r) = coeff * (vm.row(r) / (unorm[r] * vnorm[r]) -
                                                            cosine[r] * um.row(r) / (unorm[r] * unorm[r]));
                                  }
                                  accumulate(yn, gy);
                              }
                              if (tn->requires_grad) {
                                  Vector gt(rows * cols);
                                  MatrixMap gtm(gt.data(), rows, cols);
                                  for (Index r = 0; r < rows; ++r) {
                                      gtm.row(r) = coeff * (um.row(r) / (unorm[r] * vnorm[r]) -
                                                            cosine[r] * vm.row(r) / (vnorm[r] * vnorm[r]));
                                  }
                                  accumulate(tn, gt);
                              }
                          });
}

Tensor sum(const Tensor& a) {
    Vector out(1);
    out[0] = a.value().sum();
    auto an = a.node();
    return make_op_result({}, std::move(out), {a}, [an](const Vector& g) {
        accumulate(an, Vector(Vector::Constant(an->size(), g[0])));
    });
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    require_rank2(logits, "softmax_cross_entropy", "logits");
    const Index rows = logits.shape()[0], cols = logits.shape()[1];
    if (static_cast<Index>(labels.size()) != rows) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(rows) + " rows");
    }
    for (Index r = 0; r < rows; ++r) {
        if (labels[static_cast<std::size_t>(r)] < 0 ||
            labels[static_cast<std::size_t>(r)] >= static_cast<int>(cols)) {
            throw ContractError("softmax_cross_entropy: label out of range at row " +
                                std::to_string(r));
        }
    }
    ConstMatrixMap lm = logits.matrix();
    // Row-stable softmax; keep the probabilities for the backward pass.
    Matrix probs(rows, cols);
    Scalar total = 0;
    for (Index r = 0; r < rows; ++r) {
        Scalar mx = lm.row(r).maxCoeff();
        Eigen::Array<Scalar, 1, Eigen::Dynamic> ex = (lm.row(r).array() - mx).exp();
        Scalar denom = ex.sum();
        probs.row(r) = (ex / denom).matrix();
        total -= std::log(probs(r, labels[static_cast<std::size_t>(r)]));
    }
    Vector out(1);
    out[0] = total / static_cast<Scalar>(rows);
    auto ln = logits.node();
    return make_op_result({}, std::move(out), {logits},
                          [ln, probs, labels, rows, cols](const Vector& g) {
                              if (!ln->requires_grad) return;
                              const Scalar coeff = g[0] / static_cast<Scalar>(rows);
                              Vector gl(rows * cols);
                              MatrixMap glm(gl.data(), rows, cols);
                              for (Index r = 0; r < rows; ++r) {
                                  glm.row(r) = coeff * probs.row(r);
                                  glm(r, labels[static_cast<std::size_t>(r)]) -= coeff;
                              }
                              accumulate(ln, gl);
                          });
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw ContractError("backward: undefined tensor");
    if (loss.size() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    }
    // Iterative postorder DFS over grad-requiring nodes only.
    std::vector<NodePtr> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    if (loss.requires_grad()) {
        stack.emplace_back(loss.node(), 0);
        seen.insert(loss.node().get());
    }
    while (!stack.empty()) {
        auto& [node, next_parent] = stack.back();
        if (next_parent < node->parents.size()) {
            NodePtr parent = node->parents[next_parent++];
            if (parent->requires_grad && !seen.count(parent.get())) {
                seen.insert(parent.get());
                stack.emplace_back(std::move(parent), 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (const NodePtr& node : order) {
        if (node->grad.size() == 0) node->grad = Vector::Zero(node->size());
    }
    if (loss.requires_grad()) loss.node()->grad[0] += Scalar(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const NodePtr& node = *it;
        if (node->backward_fn) node->backward_fn(node->grad);
    }
}

}  // namespace fedu
