#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qrd/dsp.hpp"
#include "qrd/mlp.hpp"
#include "qrd/sim.hpp"

namespace qrd {

// rows = true level, cols = predicted level
using Confusion = std::array<std::array<std::int64_t, 3>, 3>;

double fidelity(const Confusion& confusion);

// Geometric mean of per-qubit fidelities (F_nQ). Entries must be positive.
double geomean_fidelity(const std::vector<double>& fidelities);

// Precision/recall with level 2 as the positive class. A zero denominator
// yields 1.0 when there are no false predictions of the positive class,
// otherwise 0.0.
std::pair<double, double> leakage_metrics(const std::vector<int>& predictions,
                                          const std::vector<int>& truths);

struct SweepRow {
    int n_keep = 0;
    double mean_fidelity = 0.0;
    std::vector<double> per_qubit;
};

// Truncates the bank to each n_keep, recomputes test-split features and runs
// the unmodified models; no retraining. Truth is the effective initial level.
std::vector<SweepRow> duration_sweep(const TraceDataset& dataset, const MatchedFilterBank& bank,
                                     const std::vector<MlpModel>& models,
                                     const std::vector<int>& n_keep_list, int threads = 0);

struct ScalingRow {
    int n_qubits = 0;
    int n_levels = 0;
    int input_size = 0;             // P = n * 3 * k(k-1)/2
    std::int64_t per_qubit_params = 0;
    std::int64_t total_params = 0;  // n * per_qubit_params
    std::string monolithic_outputs; // k^n, exact decimal
    std::int64_t reference_params = 0;  // 686000 at (5,3), else 0
};

std::vector<ScalingRow> scaling_report(const std::vector<int>& n_list,
                                       const std::vector<int>& k_list);

// Exact base^exp as a decimal string.
std::string pow_bigint(int base, int exp);

inline constexpr std::int64_t kReferenceFnnParams = 686000;

}  // namespace qrd
