#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "qrd/sim.hpp"

namespace qrd {

struct BasebandTrace {
    int qubit_index = 0;
    std::vector<Complex> samples;
};

// Fixed per-qubit kernel order; features are laid out qubit-major in this
// kind order, so feature index = 9 * qubit + kind.
enum class KernelKind : int {
    Qmf01 = 0,
    Qmf02 = 1,
    Qmf12 = 2,
    Rmf10 = 3,
    Rmf20 = 4,
    Rmf21 = 5,
    Emf01 = 6,
    Emf02 = 7,
    Emf12 = 8,
};

inline constexpr int kKernelsPerQubit = 9;

const char* kernel_kind_name(KernelKind kind);        // e.g. "QMF(0|1)", "RMF(1->0)"
KernelKind kernel_kind_from_name(const std::string&);

struct MatchedFilterKernel {
    KernelKind kind = KernelKind::Qmf01;
    int qubit_index = 0;
    bool zero = false;  // class too small; feature is constant 0
    std::vector<Complex> taps;
};

struct MatchedFilterBank {
    int n_qubits = 0;
    int kernel_length = 0;
    std::string source_dataset_id;       // CRC32 hex of the source dataset file, or ""
    std::vector<MatchedFilterKernel> kernels;  // 9 per qubit, qubit-major

    const MatchedFilterKernel& kernel(int qubit, KernelKind kind) const {
        return kernels[static_cast<std::size_t>(qubit) * kKernelsPerQubit +
                       static_cast<int>(kind)];
    }
    int feature_dim() const { return n_qubits * kKernelsPerQubit; }
};

using FeatureVector = std::vector<double>;

// z[t] = (i[t] + i q[t]) * exp(-i 2 pi f_q t / fs) for t < n_keep. No
// decimation or low-pass; integration happens in the filter dot product.
BasebandTrace demodulate(const RawShot& shot, const DeviceConfig& device, int qubit_index,
                         int n_keep);
BasebandTrace demodulate(const RawShot& shot, const CarrierTable& carriers, int qubit_index,
                         int n_keep);

// Temporal mean of the trace.
Complex mtv(const BasebandTrace& trace);

// Streaming per-bin mean/variance accumulator with a pairwise reduction tree
// over the push order, so results do not depend on chunking.
class TraceStats {
public:
    void push(const std::vector<Complex>& trace);
    std::size_t count() const { return count_; }
    int length() const;
    // Per-bin complex mean and total variance (unbiased; var(re) + var(im)).
    std::vector<Complex> mean() const;
    std::vector<double> variance() const;

private:
    struct Node {
        std::size_t weight;
        std::vector<Complex> sum;
        std::vector<double> sum_re2, sum_im2;
    };
    void merge_top();
    std::vector<Node> stack_;
    std::size_t count_ = 0;
};

// K[t] = (mu_b[t] - mu_a[t]) / (var_b[t] - var_a[t] + eps_sign) with
// eps = 1e-12 * max_t |var_b - var_a|; bins whose denominator is exactly zero
// fall back to the plain mean difference.
MatchedFilterKernel build_kernel(const std::vector<std::vector<Complex>>& traces_a,
                                 const std::vector<std::vector<Complex>>& traces_b);
MatchedFilterKernel build_kernel_from_stats(const TraceStats& a, const TraceStats& b);

struct ErrorTag {
    bool tagged = false;
    int from = 0;
    int to = 0;
};

// A trace whose label is s but whose MTV lies strictly nearer to the centroid
// of s' != s is tagged as the s -> s' error class. labels[shot][qubit],
// centroids[qubit][level]; full-length traces are used.
std::vector<std::vector<ErrorTag>> tag_error_traces(
    const TraceDataset& dataset, const std::vector<std::vector<int>>& labels,
    const std::vector<std::array<Complex, 3>>& centroids, int threads = 0);

struct BankOptions {
    int min_error_traces = 20;          // smaller error classes get a zero kernel
    std::vector<bool> include;          // per-shot mask; empty = all shots
    std::string source_dataset_id;
};

// QMF(a|b): level-a vs level-b traces. RMF/EMF(s->s'): untagged level-s
// traces vs traces tagged s->s'. Levels come from `labels`.
MatchedFilterBank build_filter_bank(const TraceDataset& dataset,
                                    const std::vector<std::vector<int>>& labels,
                                    const std::vector<std::vector<ErrorTag>>& tags,
                                    const BankOptions& opts = {}, int threads = 0);

// feature[9q + kind] = Re(sum_t conj(K[t]) z_q[t]) / n_keep.
FeatureVector apply_bank(const MatchedFilterBank& bank, const RawShot& shot,
                         const DeviceConfig& device, int n_keep);
FeatureVector apply_bank(const MatchedFilterBank& bank, const RawShot& shot,
                         const CarrierTable& carriers, int n_keep);

MatchedFilterBank truncate_bank(const MatchedFilterBank& bank, int n_keep);

void write_bank(const MatchedFilterBank& bank, const std::string& path);
MatchedFilterBank read_bank(const std::string& path);

}  // namespace qrd
