#include "qrd/eval.hpp"

#include <algorithm>
#include <cmath>

#include "qrd/errors.hpp"
#include "qrd/parallel.hpp"

namespace qrd {

double fidelity(const Confusion& confusion) {
    std::int64_t diag = 0, total = 0;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            if (confusion[r][c] < 0) throw DataError("negative confusion count");
            total += confusion[r][c];
            if (r == c) diag += confusion[r][c];
        }
    }
    if (total == 0) throw DataError("fidelity of an all-zero confusion matrix");
    return static_cast<double>(diag) / static_cast<double>(total);
}

double geomean_fidelity(const std::vector<double>& fidelities) {
    if (fidelities.empty()) throw DataError("geomean of an empty list");
    double log_sum = 0.0;
    for (const double f : fidelities) {
        if (!(f > 0.0)) throw DataError("geomean requires positive fidelities");
        log_sum += std::log(f);
    }
    return std::exp(log_sum / static_cast<double>(fidelities.size()));
}

std::pair<double, double> leakage_metrics(const std::vector<int>& predictions,
                                          const std::vector<int>& truths) {
    if (predictions.size() != truths.size()) throw DataError("prediction/truth length mismatch");
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool p2 = predictions[i] == 2;
        const bool t2 = truths[i] == 2;
        tp += (p2 && t2) ? 1 : 0;
        fp += (p2 && !t2) ? 1 : 0;
        fn += (!p2 && t2) ? 1 : 0;
    }
    const double precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp);
    double recall;
    if (tp + fn == 0) {
        recall = fp == 0 ? 1.0 : 0.0;
    } else {
        recall = static_cast<double>(tp) / (tp + fn);
    }
    return {precision, recall};
}

std::vector<SweepRow> duration_sweep(const TraceDataset& dataset, const MatchedFilterBank& bank,
                                     const std::vector<MlpModel>& models,
                                     const std::vector<int>& n_keep_list, int threads) {
    const int n_qubits = dataset.device.num_qubits();
    if (static_cast<int>(models.size()) != n_qubits) throw DataError("one model per qubit required");
    for (std::size_t i = 1; i < n_keep_list.size(); ++i) {
        if (n_keep_list[i] <= n_keep_list[i - 1]) throw ConfigError("n_keep list must be ascending");
    }

    std::vector<std::size_t> test_shots;
    for (std::size_t j = 0; j < dataset.shots.size(); ++j) {
        if (dataset.split[j] == Split::Test) test_shots.push_back(j);
    }
    if (test_shots.empty()) throw DataError("dataset has no test split");

    const CarrierTable carriers(dataset.device);
    std::vector<SweepRow> rows;
    for (const int n_keep : n_keep_list) {
        const MatchedFilterBank cut = truncate_bank(bank, n_keep);
        std::vector<Confusion> confusion(n_qubits, Confusion{});
        std::vector<std::vector<int>> predicted(test_shots.size(), std::vector<int>(n_qubits));
        parallel_for(test_shots.size(), threads, [&](std::size_t idx) {
            const RawShot& shot = dataset.shots[test_shots[idx]];
            const FeatureVector features = apply_bank(cut, shot, carriers, n_keep);
            for (int q = 0; q < n_qubits; ++q) {
                predicted[idx][q] = infer(models[q], features).label;
            }
        });
        for (std::size_t idx = 0; idx < test_shots.size(); ++idx) {
            const RawShot& shot = dataset.shots[test_shots[idx]];
            for (int q = 0; q < n_qubits; ++q) {
                confusion[q][shot.truth.qubits[q].initial][predicted[idx][q]] += 1;
            }
        }
        SweepRow row;
        row.n_keep = n_keep;
        for (int q = 0; q < n_qubits; ++q) row.per_qubit.push_back(fidelity(confusion[q]));
        double sum = 0.0;
        for (const double f : row.per_qubit) sum += f;
        row.mean_fidelity = sum / n_qubits;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string pow_bigint(int base, int exp) {
    if (base < 0 || exp < 0) throw ConfigError("pow_bigint requires non-negative arguments");
    std::vector<std::uint32_t> digits = {1};  // little-endian decimal digits
    for (int e = 0; e < exp; ++e) {
        std::uint64_t carry = 0;
        for (auto& d : digits) {
            const std::uint64_t v = static_cast<std::uint64_t>(d) * base + carry;
            d = static_cast<std::uint32_t>(v % 10);
            carry = v / 10;
        }
        while (carry > 0) {
            digits.push_back(static_cast<std::uint32_t>(carry % 10));
            carry /= 10;
        }
    }
    std::string out;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        out.push_back(static_cast<char>('0' + *it));
    }
    return out;
}

std::vector<ScalingRow> scaling_report(const std::vector<int>& n_list,
                                       const std::vector<int>& k_list) {
    std::vector<ScalingRow> rows;
    for (const int k : k_list) {
        if (k < 2) throw ConfigError("k must be >= 2");
        for (const int n : n_list) {
            if (n < 1) throw ConfigError("n must be >= 1");
            ScalingRow row;
            row.n_qubits = n;
            row.n_levels = k;
            row.input_size = n * 3 * (k * (k - 1) / 2);
            row.per_qubit_params = mlp_param_count(row.input_size, k);
            row.total_params = static_cast<std::int64_t>(n) * row.per_qubit_params;
            row.monolithic_outputs = pow_bigint(k, n);
            if (n == 5 && k == 3) row.reference_params = kReferenceFnnParams;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace qrd
