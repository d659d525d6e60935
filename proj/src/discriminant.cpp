#include "qrd/discriminant.hpp"

#include <cmath>
#include <string>

#include "qrd/errors.hpp"

namespace qrd {

namespace {

std::array<double, 4> regularize(std::array<double, 4> cov) {
    const double lambda = 1e-6 * (cov[0] + cov[3]) / 2.0;
    cov[0] += lambda;
    cov[3] += lambda;
    return cov;
}

double det2(const std::array<double, 4>& m) { return m[0] * m[3] - m[1] * m[2]; }

}  // namespace

DiscriminantModel train_discriminant(DiscriminantKind kind,
                                     const std::vector<std::array<double, 2>>& x,
                                     const std::vector<int>& y, int n_classes,
                                     int qubit_index) {
    if (x.size() != y.size()) throw DataError("feature/label count mismatch");
    if (n_classes < 2) throw ConfigError("need at least 2 classes");

    DiscriminantModel model;
    model.kind = kind;
    model.qubit_index = qubit_index;
    model.n_classes = n_classes;
    model.means.assign(n_classes, {0.0, 0.0});
    model.covariances.assign(n_classes, {0.0, 0.0, 0.0, 0.0});
    model.log_priors.assign(n_classes, 0.0);

    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const int c = y[i];
        if (c < 0 || c >= n_classes) throw DataError("label out of range");
        model.means[c][0] += x[i][0];
        model.means[c][1] += x[i][1];
        ++counts[c];
    }
    for (int c = 0; c < n_classes; ++c) {
        if (counts[c] < 2) {
            throw DataError("class " + std::to_string(c) + " has fewer than 2 samples");
        }
        model.means[c][0] /= static_cast<double>(counts[c]);
        model.means[c][1] /= static_cast<double>(counts[c]);
    }

    std::array<double, 4> pooled{};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const int c = y[i];
        const double d0 = x[i][0] - model.means[c][0];
        const double d1 = x[i][1] - model.means[c][1];
        model.covariances[c][0] += d0 * d0;
        model.covariances[c][1] += d0 * d1;
        model.covariances[c][2] += d0 * d1;
        model.covariances[c][3] += d1 * d1;
    }
    for (int k = 0; k < 4; ++k) {
        for (int c = 0; c < n_classes; ++c) pooled[k] += model.covariances[c][k];
    }
    const double pooled_denom = static_cast<double>(x.size()) - n_classes;
    for (int k = 0; k < 4; ++k) pooled[k] /= pooled_denom;
    pooled = regularize(pooled);

    for (int c = 0; c < n_classes; ++c) {
        if (kind == DiscriminantKind::Lda) {
            model.covariances[c] = pooled;
        } else {
            for (int k = 0; k < 4; ++k) {
                model.covariances[c][k] /= static_cast<double>(counts[c] - 1);
            }
            model.covariances[c] = regularize(model.covariances[c]);
        }
        if (det2(model.covariances[c]) <= 0.0) {
            throw NumericError("singular covariance for class " + std::to_string(c) +
                               " even after regularization");
        }
        model.log_priors[c] =
            std::log(static_cast<double>(counts[c]) / static_cast<double>(x.size()));
    }
    return model;
}

std::vector<double> discriminant_scores(const DiscriminantModel& model,
                                        const std::array<double, 2>& x) {
    std::vector<double> scores(model.n_classes);
    for (int c = 0; c < model.n_classes; ++c) {
        const auto& cov = model.covariances[c];
        const double det = det2(cov);
        const double inv00 = cov[3] / det;
        const double inv01 = -cov[1] / det;
        const double inv11 = cov[0] / det;
        const double d0 = x[0] - model.means[c][0];
        const double d1 = x[1] - model.means[c][1];
        const double maha = d0 * d0 * inv00 + 2.0 * d0 * d1 * inv01 + d1 * d1 * inv11;
        scores[c] = -0.5 * maha - 0.5 * std::log(det) + model.log_priors[c];
    }
    return scores;
}

int classify(const DiscriminantModel& model, const std::array<double, 2>& x) {
    const auto scores = discriminant_scores(model, x);
    int best = 0;
    for (int c = 1; c < model.n_classes; ++c) {
        if (scores[c] > scores[best]) best = c;
    }
    return best;
}

}  // namespace qrd
