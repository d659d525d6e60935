#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qrd/errors.hpp"
#include "qrd/mlp.hpp"
#include "qrd/rng.hpp"

using namespace qrd;

TEST_CASE("layer sizes and parameter counts follow the floor formula") {
    CHECK(mlp_layer_sizes(45, 3) == std::array<int, 4>{45, 22, 11, 3});
    CHECK(mlp_param_count(45, 3) == 1301);
    CHECK(mlp_layer_sizes(9, 3) == std::array<int, 4>{9, 4, 2, 3});
    CHECK(mlp_param_count(9, 3) == 59);
    CHECK(mlp_layer_sizes(4, 3) == std::array<int, 4>{4, 2, 1, 3});
    CHECK(mlp_param_count(4, 3) == 19);
    CHECK(mlp_param_count(90, 3) == 5176);

    PhiloxRng rng(1, 0);
    MlpModel m = init_mlp(45, 3, 0, rng);
    CHECK(m.parameter_count() == 1301);
}

TEST_CASE("zero model infers the uniform distribution with tie toward level 0") {
    PhiloxRng rng(1, 0);
    MlpModel m = init_mlp(8, 3, 0, rng);
    for (auto& w : m.weights)
        for (auto& v : w) v = 0.0;
    InferResult r = infer(m, std::vector<double>(8, 0.7));
    CHECK(r.label == 0);
    for (int c = 0; c < 3; ++c) CHECK(r.probs[c] == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("dominant logit wins") {
    PhiloxRng rng(1, 0);
    MlpModel m = init_mlp(8, 3, 0, rng);
    for (auto& w : m.weights)
        for (auto& v : w) v = 0.0;
    m.biases[2] = {0.0, 10.0, 0.0};
    InferResult r = infer(m, std::vector<double>(8, 0.0));
    CHECK(r.label == 1);
    CHECK(r.probs[1] > 0.99);
}

TEST_CASE("softmax probabilities sum to one over random models") {
    PhiloxRng rng(77, 0);
    for (int trial = 0; trial < 10000; ++trial) {
        MlpModel m = init_mlp(8, 3, 0, rng);
        std::vector<double> x(8);
        for (auto& v : x) v = 4.0 * rng.normal();
        InferResult r = infer(m, x);
        double sum = 0.0;
        for (const double p : r.probs) sum += p;
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("adding a constant to final-layer logits leaves probabilities unchanged") {
    PhiloxRng rng(3, 0);
    MlpModel m = init_mlp(8, 3, 0, rng);
    std::vector<double> x(8);
    for (auto& v : x) v = rng.normal();
    const InferResult base = infer(m, x);
    MlpModel shifted = m;
    for (auto& b : shifted.biases[2]) b += 123.456;
    const InferResult moved = infer(shifted, x);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(base.probs[c] - moved.probs[c]) <= 1e-12);
}

TEST_CASE("analytic gradients match central finite differences") {
    // P=8 nets, random weights and batches; relative error <= 1e-4. Biases
    // are randomized as well: with zero biases a sample whose whole hidden
    // layer is dead puts the next preactivation exactly on the ReLU kink,
    // where a central difference cannot match the subgradient.
    PhiloxRng rng(2024, 0);
    for (int trial = 0; trial < 5; ++trial) {
        MlpModel m = init_mlp(8, 3, 0, rng);
        for (auto& b : m.biases)
            for (auto& v : b) v = 0.5 * rng.normal();
        const int count = 6;
        std::vector<double> rows(8 * count);
        std::vector<int> labels(count);
        for (auto& v : rows) v = rng.normal();
        for (auto& y : labels) y = static_cast<int>(rng.uniform_below(3));

        std::vector<std::vector<double>> gw(3), gb(3);
        for (int layer = 0; layer < 3; ++layer) {
            gw[layer].resize(m.weights[layer].size());
            gb[layer].resize(m.biases[layer].size());
        }
        mlp_loss_and_grad(m, rows.data(), labels.data(), count, gw, gb);

        const double h = 1e-5;
        auto loss_of = [&](const MlpModel& model) {
            std::vector<std::vector<double>> tw(3), tb(3);
            for (int layer = 0; layer < 3; ++layer) {
                tw[layer].resize(model.weights[layer].size());
                tb[layer].resize(model.biases[layer].size());
            }
            return mlp_loss_and_grad(model, rows.data(), labels.data(), count, tw, tb);
        };
        for (int layer = 0; layer < 3; ++layer) {
            for (std::size_t i = 0; i < m.weights[layer].size(); ++i) {
                MlpModel up = m, dn = m;
                up.weights[layer][i] += h;
                dn.weights[layer][i] -= h;
                const double fd = (loss_of(up) - loss_of(dn)) / (2.0 * h);
                const double an = gw[layer][i];
                const double rel = std::abs(an - fd) / (std::abs(an) + std::abs(fd) + 1e-8);
                CHECK(rel <= 1e-4);
            }
            for (std::size_t i = 0; i < m.biases[layer].size(); ++i) {
                MlpModel up = m, dn = m;
                up.biases[layer][i] += h;
                dn.biases[layer][i] -= h;
                const double fd = (loss_of(up) - loss_of(dn)) / (2.0 * h);
                const double an = gb[layer][i];
                const double rel = std::abs(an - fd) / (std::abs(an) + std::abs(fd) + 1e-8);
                CHECK(rel <= 1e-4);
            }
        }
    }
}

namespace {

void blob_data(PhiloxRng& rng, int per_class, std::vector<double>& rows, std::vector<int>& labels) {
    const double centers[3][2] = {{0.0, 0.0}, {8.0, 0.0}, {0.0, 8.0}};
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < per_class; ++i) {
            // 8-d features: first two informative, rest noise
            rows.push_back(centers[c][0] + rng.normal());
            rows.push_back(centers[c][1] + rng.normal());
            for (int d = 2; d < 8; ++d) rows.push_back(rng.normal());
            labels.push_back(c);
        }
    }
}

}  // namespace

TEST_CASE("training separates shifted blobs to 99%+ validation accuracy") {
    PhiloxRng rng(9, 0);
    std::vector<double> x_train, x_val;
    std::vector<int> y_train, y_val;
    blob_data(rng, 400, x_train, y_train);
    blob_data(rng, 120, x_val, y_val);

    TrainConfig cfg;
    cfg.seed = 7;
    TrainResult r = train_mlp(x_train, y_train, x_val, y_val, 8, 3, cfg);

    int correct = 0;
    for (std::size_t s = 0; s < y_val.size(); ++s) {
        std::vector<double> row(x_val.begin() + s * 8, x_val.begin() + (s + 1) * 8);
        if (infer(r.model, row).label == y_val[s]) ++correct;
    }
    CHECK(static_cast<double>(correct) / y_val.size() >= 0.99);
    CHECK(r.best_val_loss == doctest::Approx(*std::min_element(r.val_loss.begin(), r.val_loss.end())));
    for (const double loss : r.train_loss) CHECK(std::isfinite(loss));
}

TEST_CASE("training is deterministic in seed and data") {
    PhiloxRng rng(10, 0);
    std::vector<double> x_train, x_val;
    std::vector<int> y_train, y_val;
    blob_data(rng, 60, x_train, y_train);
    blob_data(rng, 30, x_val, y_val);
    TrainConfig cfg;
    cfg.seed = 3;
    cfg.max_epochs = 20;
    TrainResult a = train_mlp(x_train, y_train, x_val, y_val, 8, 3, cfg);
    TrainResult b = train_mlp(x_train, y_train, x_val, y_val, 8, 3, cfg);
    for (int layer = 0; layer < 3; ++layer) {
        REQUIRE(a.model.weights[layer] == b.model.weights[layer]);
        REQUIRE(a.model.biases[layer] == b.model.biases[layer]);
    }
    CHECK(a.best_epoch == b.best_epoch);
}

TEST_CASE("a class missing from the training labels is an error") {
    std::vector<double> x(8 * 10, 0.5);
    std::vector<int> y(10, 0);
    y[5] = 1;  // class 2 never appears
    std::vector<double> xv(8 * 4, 0.5);
    std::vector<int> yv(4, 0);
    TrainConfig cfg;
    CHECK_THROWS_AS(train_mlp(x, y, xv, yv, 8, 3, cfg), DataError);
}

TEST_CASE("stored normalization reproduces the training-time transform") {
    PhiloxRng rng(11, 0);
    std::vector<double> x_train, x_val;
    std::vector<int> y_train, y_val;
    blob_data(rng, 50, x_train, y_train);
    blob_data(rng, 20, x_val, y_val);
    TrainConfig cfg;
    cfg.seed = 5;
    cfg.max_epochs = 5;
    TrainResult r = train_mlp(x_train, y_train, x_val, y_val, 8, 3, cfg);

    // recompute the training statistics independently
    const int n = static_cast<int>(y_train.size());
    for (int i = 0; i < 8; ++i) {
        double mean = 0.0;
        for (int s = 0; s < n; ++s) mean += x_train[s * 8 + i];
        mean /= n;
        double var = 0.0;
        for (int s = 0; s < n; ++s) {
            const double d = x_train[s * 8 + i] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / n);
        CHECK(r.model.norm.mean[i] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(r.model.norm.std[i] == doctest::Approx(sd).epsilon(1e-12));
    }

    // constant feature: std floored to 1, standardized value stays finite
    std::vector<double> xc(8 * 12, 0.0);
    std::vector<int> yc(12);
    for (int s = 0; s < 12; ++s) {
        yc[s] = s % 3;
        xc[s * 8 + 0] = 3.0;  // constant column
        xc[s * 8 + 1] = static_cast<double>(yc[s]);
        for (int dd = 2; dd < 8; ++dd) xc[s * 8 + dd] = 0.1 * s + dd;
    }
    TrainConfig cfg2;
    cfg2.seed = 6;
    cfg2.max_epochs = 2;
    TrainResult rc = train_mlp(xc, yc, xc, yc, 8, 3, cfg2);
    CHECK(rc.model.norm.std[0] == 1.0);
    CHECK(rc.model.norm.mean[0] == doctest::Approx(3.0));
}

TEST_CASE("feature width mismatch is rejected at inference") {
    PhiloxRng rng(1, 0);
    MlpModel m = init_mlp(8, 3, 0, rng);
    CHECK_THROWS_AS(infer(m, std::vector<double>(7, 0.0)), DataError);
}
