#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qrd/rng.hpp"

namespace qrd {

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 128;
    int max_epochs = 200;
    int patience = 10;  // epochs without validation improvement
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

struct Normalization {
    std::vector<double> mean;
    std::vector<double> std;  // floored at training time, never below 1e-12

    std::vector<double> apply(const std::vector<double>& x) const;
};

// Per-qubit discriminator: layers [P, P/2, P/4, k], ReLU hidden, softmax out.
struct MlpModel {
    int qubit_index = 0;
    std::array<int, 4> layers{};
    std::vector<std::vector<double>> weights;  // [3], row-major out x in
    std::vector<std::vector<double>> biases;   // [3]
    Normalization norm;

    std::int64_t parameter_count() const;
};

std::array<int, 4> mlp_layer_sizes(int input_dim, int n_classes);
std::int64_t mlp_param_count(int input_dim, int n_classes);

// He-uniform weights from the stream, zero biases, identity normalization.
MlpModel init_mlp(int input_dim, int n_classes, int qubit_index, PhiloxRng& rng);

struct InferResult {
    std::vector<double> probs;
    int label = 0;  // argmax; ties break toward the lower level
};

// Applies the stored normalization, then the network.
InferResult infer(const MlpModel& model, const std::vector<double>& feature);

// Mean cross-entropy over `count` pre-normalized rows and its gradients.
// Gradient buffers must match the weight/bias shapes.
double mlp_loss_and_grad(const MlpModel& model, const double* rows, const int* labels, int count,
                         std::vector<std::vector<double>>& grad_w,
                         std::vector<std::vector<double>>& grad_b);

struct TrainResult {
    MlpModel model;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) on standardized features; early
// stopping on validation loss; returns the best-validation-loss model.
// Feature rows are row-major count x input_dim.
TrainResult train_mlp(const std::vector<double>& x_train, const std::vector<int>& y_train,
                      const std::vector<double>& x_val, const std::vector<int>& y_val,
                      int input_dim, int n_classes, const TrainConfig& cfg, int qubit_index = 0);

}  // namespace qrd
