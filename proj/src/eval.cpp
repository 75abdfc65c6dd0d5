#include "fedu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "fedu/errors.hpp"
#include "fedu/sgd.hpp"
#include "fedu/tensor.hpp"

namespace fedu {

namespace {

Matrix l2_normalize_rows(const Matrix& m, const char* context) {
    Matrix out(m.rows(), m.cols());
    for (Index r = 0; r < m.rows(); ++r) {
        const Scalar norm = m.row(r).norm();
        if (norm <= kNormEpsilon) {
            throw DegenerateInputError(std::string(context) + ": row " + std::to_string(r) +
                                       " has norm <= " + std::to_string(kNormEpsilon));
        }
        out.row(r) = m.row(r) / norm;
    }
    return out;
}

int argmax_lowest(const Vector& scores) {
    int best = 0;
    for (Index c = 1; c < scores.size(); ++c) {
        if (scores[c] > scores[best]) best = static_cast<int>(c);
    }
    return best;
}

Matrix rows_of(const Matrix& m, const std::vector<Index>& which) {
    Matrix out(static_cast<Index>(which.size()), m.cols());
    for (std::size_t i = 0; i < which.size(); ++i) out.row(static_cast<Index>(i)) = m.row(which[i]);
    return out;
}

Scalar head_accuracy(const Matrix& logits, const std::vector<int>& labels) {
    Index correct = 0;
    for (Index r = 0; r < logits.rows(); ++r) {
        Vector row = logits.row(r).transpose();
        if (argmax_lowest(row) == labels[static_cast<std::size_t>(r)]) ++correct;
    }
    return static_cast<Scalar>(correct) / static_cast<Scalar>(logits.rows());
}

}  // namespace

void EvalConfig::validate() const {
    if (knn_k < 1) throw ConfigError("eval: knn_k must be >= 1");
    if (!(knn_temperature > 0)) throw ConfigError("eval: knn_temperature must be > 0");
    if (probe_epochs < 0) throw ConfigError("eval: probe_epochs must be >= 0");
    if (probe_lr < 0) throw ConfigError("eval: probe_lr must be >= 0");
}

Matrix embed(const MlpSpec& spec, const ParameterSet& encoder, const Matrix& features) {
    return mlp_forward_values(spec, encoder, features);
}

std::vector<int> knn_predict(const Matrix& train_embeddings, const std::vector<int>& train_labels,
                             int class_count, const Matrix& test_embeddings, Index k,
                             Scalar temperature) {
    if (train_embeddings.rows() == 0) throw ContractError("knn: empty train set");
    if (static_cast<Index>(train_labels.size()) != train_embeddings.rows()) {
        throw ContractError("knn: label count does not match train embeddings");
    }
    if (class_count < 1) throw ContractError("knn: class_count must be >= 1");
    if (!(temperature > 0)) throw ContractError("knn: temperature must be > 0");
    const Index n_train = train_embeddings.rows();
    const Index kk = std::min(k, n_train);
    Matrix train_n = l2_normalize_rows(train_embeddings, "knn train embeddings");
    Matrix test_n = l2_normalize_rows(test_embeddings, "knn test embeddings");
    std::vector<int> predictions(static_cast<std::size_t>(test_n.rows()));
    std::vector<Index> neighbor(static_cast<std::size_t>(n_train));
    for (Index t = 0; t < test_n.rows(); ++t) {
        Vector sims = train_n * test_n.row(t).transpose();
        std::iota(neighbor.begin(), neighbor.end(), Index(0));
        std::partial_sort(neighbor.begin(), neighbor.begin() + kk, neighbor.end(),
                          [&](Index a, Index b) {
                              if (sims[a] != sims[b]) return sims[a] > sims[b];
                              return a < b;
                          });
        Vector scores = Vector::Zero(class_count);
        for (Index i = 0; i < kk; ++i) {
            const Index nb = neighbor[static_cast<std::size_t>(i)];
            scores[train_labels[static_cast<std::size_t>(nb)]] += std::exp(sims[nb] / temperature);
        }
        predictions[static_cast<std::size_t>(t)] = argmax_lowest(scores);
    }
    return predictions;
}

Scalar knn_eval(const MlpSpec& spec, const ParameterSet& encoder, const Dataset& train,
                const Dataset& test, const EvalConfig& config) {
    config.validate();
    if (test.size() == 0) throw ContractError("knn_eval: empty test set");
    Matrix train_emb = embed(spec, encoder, train.features);
    Matrix test_emb = embed(spec, encoder, test.features);
    std::vector<int> pred = knn_predict(train_emb, train.labels, train.class_count, test_emb,
                                        config.knn_k, config.knn_temperature);
    Index correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == test.labels[i]) ++correct;
    }
    return static_cast<Scalar>(correct) / static_cast<Scalar>(pred.size());
}

Scalar linear_probe(const MlpSpec& spec, const ParameterSet& encoder, const Dataset& train,
                    const Dataset& test, const EvalConfig& config, Rng& rng) {
    config.validate();
    if (train.size() == 0 || test.size() == 0) throw ContractError("linear_probe: empty dataset");
    const Matrix train_emb = embed(spec, encoder, train.features);
    const Matrix test_emb = embed(spec, encoder, test.features);
    const Index dim = train_emb.cols();
    const int classes = train.class_count;
    Tensor w = Tensor::zeros({dim, classes}, true);
    Tensor b = Tensor::zeros({classes}, true);
    ParameterSet head;
    head.add("weight", w);
    head.add("bias", b);
    SgdConfig sgd{config.probe_lr};
    const Index batch = std::min<Index>(128, train_emb.rows());
    for (int epoch = 0; epoch < config.probe_epochs; ++epoch) {
        std::vector<Index> order = rng.permutation(train_emb.rows());
        for (Index start = 0; start < train_emb.rows(); start += batch) {
            const Index nb = std::min(batch, train_emb.rows() - start);
            std::vector<Index> rows(order.begin() + start, order.begin() + start + nb);
            std::vector<int> labels(static_cast<std::size_t>(nb));
            for (Index i = 0; i < nb; ++i) {
                labels[static_cast<std::size_t>(i)] = train.labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
            }
            Tensor logits = add_rowvec(matmul(Tensor::from_matrix(rows_of(train_emb, rows)), w), b);
            Tensor loss = softmax_cross_entropy(logits, labels);
            backward(loss);
            sgd_step(head, sgd);
        }
    }
    Matrix test_logits =
        (test_emb * ConstMatrixMap(w.value().data(), dim, classes)).rowwise() +
        b.value().transpose();
    return head_accuracy(test_logits, test.labels);
}

Scalar semi_supervised_finetune(const MlpSpec& spec, ParameterSet& encoder, const Dataset& train,
                                const Dataset& test, Scalar labeled_fraction,
                                const EvalConfig& config, Rng& rng) {
    config.validate();
    require_mlp_params(spec, encoder, "semi_supervised_finetune");
    auto [labeled, unlabeled] = stratified_split(train, labeled_fraction, rng);
    (void)unlabeled;
    ParameterSet tuned = encoder.clone(true);
    const Index dim = spec.output_dim();
    const int classes = train.class_count;
    Tensor w = Tensor::zeros({dim, classes}, true);
    Tensor b = Tensor::zeros({classes}, true);
    ParameterSet head;
    head.add("weight", w);
    head.add("bias", b);
    SgdConfig sgd{config.probe_lr};
    const Matrix labeled_features = rows_of(train.features, labeled);
    std::vector<int> labeled_labels;
    labeled_labels.reserve(labeled.size());
    for (Index i : labeled) labeled_labels.push_back(train.labels[static_cast<std::size_t>(i)]);
    const Index batch = std::min<Index>(128, labeled_features.rows());
    for (int epoch = 0; epoch < config.probe_epochs; ++epoch) {
        std::vector<Index> order = rng.permutation(labeled_features.rows());
        for (Index start = 0; start < labeled_features.rows(); start += batch) {
            const Index nb = std::min(batch, labeled_features.rows() - start);
            std::vector<Index> rows(order.begin() + start, order.begin() + start + nb);
            std::vector<int> labels(static_cast<std::size_t>(nb));
            for (Index i = 0; i < nb; ++i) {
                labels[static_cast<std::size_t>(i)] =
                    labeled_labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
            }
            Tensor reps = mlp_forward(spec, tuned, Tensor::from_matrix(rows_of(labeled_features, rows)));
            Tensor logits = add_rowvec(matmul(reps, w), b);
            Tensor loss = softmax_cross_entropy(logits, labels);
            backward(loss);
            sgd_step(tuned, sgd);
            sgd_step(head, sgd);
        }
    }
    encoder.copy_values_from(tuned);
    Matrix test_reps = embed(spec, encoder, test.features);
    Matrix test_logits =
        (test_reps * ConstMatrixMap(w.value().data(), dim, classes)).rowwise() +
        b.value().transpose();
    return head_accuracy(test_logits, test.labels);
}

void export_embeddings(const MlpSpec& spec, const ParameterSet& encoder, const Dataset& data,
                       const std::string& path) {
    Matrix emb = embed(spec, encoder, data.features);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("export_embeddings: cannot open '" + path + "' for writing");
    out << std::setprecision(std::numeric_limits<Scalar>::max_digits10);
    for (Index d = 0; d < emb.cols(); ++d) {
        if (d > 0) out << ',';
        out << "dim_" << d;
    }
    out << ",label\n";
    for (Index r = 0; r < emb.rows(); ++r) {
        for (Index d = 0; d < emb.cols(); ++d) {
            if (d > 0) out << ',';
            out << emb(r, d);
        }
        out << ',' << data.labels[static_cast<std::size_t>(r)] << '\n';
    }
    if (!out) throw ConfigError("export_embeddings: write to '" + path + "' failed");
}

}  // namespace fedu
