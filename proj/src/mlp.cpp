#include "qrd/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "qrd/errors.hpp"

namespace qrd {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
}

std::vector<double> Normalization::apply(const std::vector<double>& x) const {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / std[i];
    return out;
}

std::array<int, 4> mlp_layer_sizes(int input_dim, int n_classes) {
    if (input_dim < 4) throw ConfigError("input dimension must be >= 4");
    if (n_classes < 2) throw ConfigError("need at least 2 classes");
    return {input_dim, input_dim / 2, input_dim / 4, n_classes};
}

std::int64_t mlp_param_count(int input_dim, int n_classes) {
    // Pure arithmetic on the layer-size formula; buildable nets additionally
    // require input_dim >= 4 (see mlp_layer_sizes).
    const std::array<std::int64_t, 4> l = {input_dim, input_dim / 2, input_dim / 4, n_classes};
    std::int64_t count = 0;
    for (int layer = 0; layer < 3; ++layer) {
        count += l[layer] * l[layer + 1] + l[layer + 1];
    }
    return count;
}

std::int64_t MlpModel::parameter_count() const {
    std::int64_t count = 0;
    for (int layer = 0; layer < 3; ++layer) {
        count += static_cast<std::int64_t>(layers[layer]) * layers[layer + 1] + layers[layer + 1];
    }
    return count;
}

MlpModel init_mlp(int input_dim, int n_classes, int qubit_index, PhiloxRng& rng) {
    MlpModel model;
    model.qubit_index = qubit_index;
    model.layers = mlp_layer_sizes(input_dim, n_classes);
    model.weights.resize(3);
    model.biases.resize(3);
    for (int layer = 0; layer < 3; ++layer) {
        const int fan_in = model.layers[layer];
        const int fan_out = model.layers[layer + 1];
        const double limit = std::sqrt(6.0 / fan_in);
        model.weights[layer].resize(static_cast<std::size_t>(fan_out) * fan_in);
        for (auto& w : model.weights[layer]) w = (2.0 * rng.uniform() - 1.0) * limit;
        model.biases[layer].assign(fan_out, 0.0);
    }
    model.norm.mean.assign(input_dim, 0.0);
    model.norm.std.assign(input_dim, 1.0);
    return model;
}

namespace {

// logits -> softmax in place, max-subtracted
void softmax(std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (auto& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (auto& x : v) x /= sum;
}

struct Activations {
    std::vector<double> h1, h2, out;
};

void forward_raw(const MlpModel& m, const double* x, Activations& act) {
    const auto& l = m.layers;
    act.h1.assign(l[1], 0.0);
    for (int o = 0; o < l[1]; ++o) {
        const double* row = &m.weights[0][static_cast<std::size_t>(o) * l[0]];
        double acc = m.biases[0][o];
        for (int i = 0; i < l[0]; ++i) acc += row[i] * x[i];
        act.h1[o] = acc > 0.0 ? acc : 0.0;
    }
    act.h2.assign(l[2], 0.0);
    for (int o = 0; o < l[2]; ++o) {
        const double* row = &m.weights[1][static_cast<std::size_t>(o) * l[1]];
        double acc = m.biases[1][o];
        for (int i = 0; i < l[1]; ++i) acc += row[i] * act.h1[i];
        act.h2[o] = acc > 0.0 ? acc : 0.0;
    }
    act.out.assign(l[3], 0.0);
    for (int o = 0; o < l[3]; ++o) {
        const double* row = &m.weights[2][static_cast<std::size_t>(o) * l[2]];
        double acc = m.biases[2][o];
        for (int i = 0; i < l[2]; ++i) acc += row[i] * act.h2[i];
        act.out[o] = acc;
    }
    softmax(act.out);
}

}  // namespace

InferResult infer(const MlpModel& model, const std::vector<double>& feature) {
    if (static_cast<int>(feature.size()) != model.layers[0]) {
        throw DataError("feature width " + std::to_string(feature.size()) +
                        " does not match model input " + std::to_string(model.layers[0]));
    }
    const std::vector<double> x = model.norm.apply(feature);
    Activations act;
    forward_raw(model, x.data(), act);
    InferResult res;
    res.probs = act.out;
    res.label = 0;
    for (int c = 1; c < model.layers[3]; ++c) {
        if (res.probs[c] > res.probs[res.label]) res.label = c;
    }
    return res;
}

double mlp_loss_and_grad(const MlpModel& m, const double* rows, const int* labels, int count,
                         std::vector<std::vector<double>>& grad_w,
                         std::vector<std::vector<double>>& grad_b) {
    const auto& l = m.layers;
    for (int layer = 0; layer < 3; ++layer) {
        grad_w[layer].assign(m.weights[layer].size(), 0.0);
        grad_b[layer].assign(m.biases[layer].size(), 0.0);
    }
    double loss = 0.0;
    Activations act;
    std::vector<double> d_out(l[3]), d_h2(l[2]), d_h1(l[1]);
    for (int s = 0; s < count; ++s) {
        const double* x = rows + static_cast<std::size_t>(s) * l[0];
        forward_raw(m, x, act);
        const int y = labels[s];
        loss += -std::log(std::max(act.out[y], 1e-300));

        // d loss / d logits = softmax - onehot
        for (int c = 0; c < l[3]; ++c) d_out[c] = act.out[c] - (c == y ? 1.0 : 0.0);

        for (int o = 0; o < l[3]; ++o) {
            double* gw = &grad_w[2][static_cast<std::size_t>(o) * l[2]];
            for (int i = 0; i < l[2]; ++i) gw[i] += d_out[o] * act.h2[i];
            grad_b[2][o] += d_out[o];
        }
        for (int i = 0; i < l[2]; ++i) {
            double acc = 0.0;
            for (int o = 0; o < l[3]; ++o) acc += m.weights[2][static_cast<std::size_t>(o) * l[2] + i] * d_out[o];
            d_h2[i] = act.h2[i] > 0.0 ? acc : 0.0;
        }
        for (int o = 0; o < l[2]; ++o) {
            double* gw = &grad_w[1][static_cast<std::size_t>(o) * l[1]];
            for (int i = 0; i < l[1]; ++i) gw[i] += d_h2[o] * act.h1[i];
            grad_b[1][o] += d_h2[o];
        }
        for (int i = 0; i < l[1]; ++i) {
            double acc = 0.0;
            for (int o = 0; o < l[2]; ++o) acc += m.weights[1][static_cast<std::size_t>(o) * l[1] + i] * d_h2[o];
            d_h1[i] = act.h1[i] > 0.0 ? acc : 0.0;
        }
        for (int o = 0; o < l[1]; ++o) {
            double* gw = &grad_w[0][static_cast<std::size_t>(o) * l[0]];
            for (int i = 0; i < l[0]; ++i) gw[i] += d_h1[o] * x[i];
            grad_b[0][o] += d_h1[o];
        }
    }
    const double inv = 1.0 / count;
    for (int layer = 0; layer < 3; ++layer) {
        for (auto& g : grad_w[layer]) g *= inv;
        for (auto& g : grad_b[layer]) g *= inv;
    }
    return loss * inv;
}

namespace {

double mean_loss(const MlpModel& m, const std::vector<double>& rows,
                 const std::vector<int>& labels) {
    const int dim = m.layers[0];
    const int count = static_cast<int>(labels.size());
    Activations act;
    double loss = 0.0;
    for (int s = 0; s < count; ++s) {
        forward_raw(m, rows.data() + static_cast<std::size_t>(s) * dim, act);
        loss += -std::log(std::max(act.out[labels[s]], 1e-300));
    }
    return loss / count;
}

struct AdamState {
    std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
    std::int64_t t = 0;

    explicit AdamState(const MlpModel& model) {
        for (int layer = 0; layer < 3; ++layer) {
            m_w.emplace_back(model.weights[layer].size(), 0.0);
            v_w.emplace_back(model.weights[layer].size(), 0.0);
            m_b.emplace_back(model.biases[layer].size(), 0.0);
            v_b.emplace_back(model.biases[layer].size(), 0.0);
        }
    }
};

void adam_step(MlpModel& model, AdamState& state, const std::vector<std::vector<double>>& grad_w,
               const std::vector<std::vector<double>>& grad_b, double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    auto update = [&](std::vector<double>& w, std::vector<double>& m, std::vector<double>& v,
                      const std::vector<double>& g) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    };
    for (int layer = 0; layer < 3; ++layer) {
        update(model.weights[layer], state.m_w[layer], state.v_w[layer], grad_w[layer]);
        update(model.biases[layer], state.m_b[layer], state.v_b[layer], grad_b[layer]);
    }
}

}  // namespace

TrainResult train_mlp(const std::vector<double>& x_train, const std::vector<int>& y_train,
                      const std::vector<double>& x_val, const std::vector<int>& y_val,
                      int input_dim, int n_classes, const TrainConfig& cfg, int qubit_index) {
    cfg.validate();
    const int n_train = static_cast<int>(y_train.size());
    const int n_val = static_cast<int>(y_val.size());
    if (n_train < 1 || n_val < 1) throw DataError("training and validation sets must be nonempty");
    if (x_train.size() != static_cast<std::size_t>(n_train) * input_dim ||
        x_val.size() != static_cast<std::size_t>(n_val) * input_dim) {
        throw DataError("feature matrix shape mismatch");
    }
    {
        std::set<int> classes(y_train.begin(), y_train.end());
        for (int c = 0; c < n_classes; ++c) {
            if (!classes.count(c)) {
                throw DataError("class " + std::to_string(c) + " absent from training labels");
            }
        }
    }

    // Standardize with training-set statistics; constant features keep std 1.
    Normalization norm;
    norm.mean.assign(input_dim, 0.0);
    norm.std.assign(input_dim, 1.0);
    for (int s = 0; s < n_train; ++s) {
        for (int i = 0; i < input_dim; ++i) {
            norm.mean[i] += x_train[static_cast<std::size_t>(s) * input_dim + i];
        }
    }
    for (auto& v : norm.mean) v /= n_train;
    std::vector<double> var(input_dim, 0.0);
    for (int s = 0; s < n_train; ++s) {
        for (int i = 0; i < input_dim; ++i) {
            const double d = x_train[static_cast<std::size_t>(s) * input_dim + i] - norm.mean[i];
            var[i] += d * d;
        }
    }
    for (int i = 0; i < input_dim; ++i) {
        const double sd = std::sqrt(var[i] / n_train);
        norm.std[i] = sd < 1e-12 ? 1.0 : sd;
    }

    auto standardize = [&](const std::vector<double>& rows, int count) {
        std::vector<double> out(rows.size());
        for (int s = 0; s < count; ++s) {
            for (int i = 0; i < input_dim; ++i) {
                const std::size_t idx = static_cast<std::size_t>(s) * input_dim + i;
                out[idx] = (rows[idx] - norm.mean[i]) / norm.std[i];
            }
        }
        return out;
    };
    const std::vector<double> xs_train = standardize(x_train, n_train);
    const std::vector<double> xs_val = standardize(x_val, n_val);

    PhiloxRng rng(cfg.seed, static_cast<std::uint64_t>(qubit_index));
    MlpModel model = init_mlp(input_dim, n_classes, qubit_index, rng);
    model.norm = norm;

    AdamState adam(model);
    std::vector<std::vector<double>> grad_w(3), grad_b(3);
    for (int layer = 0; layer < 3; ++layer) {
        grad_w[layer].resize(model.weights[layer].size());
        grad_b[layer].resize(model.biases[layer].size());
    }

    TrainResult result;
    result.model = model;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;

    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> batch_rows;
    std::vector<int> batch_labels;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        // deterministic shuffle from the training stream
        for (int i = n_train - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[i], order[j]);
        }
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n_train; start += cfg.batch_size) {
            const int count = std::min(cfg.batch_size, n_train - start);
            batch_rows.resize(static_cast<std::size_t>(count) * input_dim);
            batch_labels.resize(count);
            for (int b = 0; b < count; ++b) {
                const int src = order[start + b];
                std::copy_n(xs_train.begin() + static_cast<std::size_t>(src) * input_dim, input_dim,
                            batch_rows.begin() + static_cast<std::size_t>(b) * input_dim);
                batch_labels[b] = y_train[src];
            }
            const double loss =
                mlp_loss_and_grad(model, batch_rows.data(), batch_labels.data(), count, grad_w, grad_b);
            if (!std::isfinite(loss)) {
                throw NumericError("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch));
            }
            adam_step(model, adam, grad_w, grad_b, cfg.learning_rate);
            epoch_loss += loss * count;
            ++batches;
        }
        result.train_loss.push_back(epoch_loss / n_train);

        const double val = mean_loss(model, xs_val, y_val);
        if (!std::isfinite(val)) {
            throw NumericError("training diverged: non-finite validation loss at epoch " +
                               std::to_string(epoch));
        }
        result.val_loss.push_back(val);
        if (val < result.best_val_loss) {
            result.best_val_loss = val;
            result.best_epoch = epoch;
            result.model = model;  // snapshot of the best weights
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (stale_epochs >= cfg.patience) break;
        }
    }
    result.model.norm = norm;
    return result;
}

}  // namespace qrd
