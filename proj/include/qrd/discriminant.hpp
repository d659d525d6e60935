#pragma once

#include <array>
#include <vector>

namespace qrd {

enum class DiscriminantKind { Lda, Qda };

// Gaussian discriminant on 2-d MTV features (real, imag). LDA uses the
// pooled covariance for every class; QDA keeps per-class covariances. Both
// are regularized by lambda * I with lambda = 1e-6 * trace / dim.
struct DiscriminantModel {
    DiscriminantKind kind = DiscriminantKind::Lda;
    int qubit_index = 0;
    int n_classes = 0;
    std::vector<std::array<double, 2>> means;
    std::vector<std::array<double, 4>> covariances;  // row-major 2x2, per class
    std::vector<double> log_priors;
};

DiscriminantModel train_discriminant(DiscriminantKind kind,
                                     const std::vector<std::array<double, 2>>& x,
                                     const std::vector<int>& y, int n_classes,
                                     int qubit_index = 0);

// Maximum Gaussian log-likelihood plus log prior; ties break toward the
// lower class index.
int classify(const DiscriminantModel& model, const std::array<double, 2>& x);
std::vector<double> discriminant_scores(const DiscriminantModel& model,
                                        const std::array<double, 2>& x);

}  // namespace qrd
