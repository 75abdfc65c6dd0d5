#pragma once

#include "fedu/dataset.hpp"
#include "fedu/mlp.hpp"

namespace fedu {

struct EvalConfig {
    Index knn_k = 200;
    Scalar knn_temperature = 0.1;
    int probe_epochs = 100;
    Scalar probe_lr = 0.5;

    void validate() const;
};

// Frozen-encoder embeddings for a feature matrix.
Matrix embed(const MlpSpec& spec, const ParameterSet& encoder, const Matrix& features);

// Weighted nearest-neighbor vote on L2-normalized embeddings: cosine
// similarity, k = min(knn_k, train size) neighbors (ties broken toward the
// lower train index), per-class scores sum exp(similarity / temperature),
// prediction is the argmax with ties toward the smaller class index.
std::vector<int> knn_predict(const Matrix& train_embeddings, const std::vector<int>& train_labels,
                             int class_count, const Matrix& test_embeddings, Index k,
                             Scalar temperature);

// Accuracy of knn_predict on the test set, embedding both sets with the
// frozen encoder.
Scalar knn_eval(const MlpSpec& spec, const ParameterSet& encoder, const Dataset& train,
                const Dataset& test, const EvalConfig& config);

// Single linear layer + softmax cross-entropy on frozen embeddings, trained
// probe_epochs epochs of shuffled minibatch SGD from zero-initialized
// weights. The encoder is never modified. Returns test accuracy.
Scalar linear_probe(const MlpSpec& spec, const ParameterSet& encoder, const Dataset& train,
                    const Dataset& test, const EvalConfig& config, Rng& rng);

// Joint fine-tune of encoder plus a fresh linear head on a class-stratified
// labeled_fraction of the training set; the passed encoder IS updated.
// Returns test accuracy. fraction = 1.0 is a full supervised fine-tune.
Scalar semi_supervised_finetune(const MlpSpec& spec, ParameterSet& encoder, const Dataset& train,
                                const Dataset& test, Scalar labeled_fraction,
                                const EvalConfig& config, Rng& rng);

// CSV with header dim_0,...,dim_{D-1},label; embeddings round-trip through
// the decimal text within 1e-9.
void export_embeddings(const MlpSpec& spec, const ParameterSet& encoder, const Dataset& data,
                       const std::string& path);

}  // namespace fedu
