#include "qrd/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "qrd/errors.hpp"
#include "qrd/parallel.hpp"
#include "qrd/serialize.hpp"

namespace qrd {

namespace {

constexpr const char* kKindNames[kKernelsPerQubit] = {
    "QMF(0|1)", "QMF(0|2)", "QMF(1|2)", "RMF(1->0)", "RMF(2->0)",
    "RMF(2->1)", "EMF(0->1)", "EMF(0->2)", "EMF(1->2)",
};

// (from, to) pairs for the six error kernels, in kind order Rmf10..Emf12.
constexpr int kErrorTransitions[6][2] = {{1, 0}, {2, 0}, {2, 1}, {0, 1}, {0, 2}, {1, 2}};

KernelKind error_kind(int from, int to) {
    for (int k = 0; k < 6; ++k) {
        if (kErrorTransitions[k][0] == from && kErrorTransitions[k][1] == to) {
            return static_cast<KernelKind>(static_cast<int>(KernelKind::Rmf10) + k);
        }
    }
    throw NumericError("no error kernel for transition " + std::to_string(from) + "->" +
                       std::to_string(to));
}

}  // namespace

const char* kernel_kind_name(KernelKind kind) { return kKindNames[static_cast<int>(kind)]; }

KernelKind kernel_kind_from_name(const std::string& name) {
    for (int k = 0; k < kKernelsPerQubit; ++k) {
        if (name == kKindNames[k]) return static_cast<KernelKind>(k);
    }
    throw DataError("unknown kernel kind '" + name + "'");
}

BasebandTrace demodulate(const RawShot& shot, const CarrierTable& carriers, int qubit_index,
                         int n_keep) {
    const auto& carrier = carriers.carrier(qubit_index);
    const int n = static_cast<int>(shot.i_samples.size());
    if (n_keep < 1 || n_keep > n) {
        throw ConfigError("n_keep " + std::to_string(n_keep) + " out of range [1, " +
                          std::to_string(n) + "]");
    }
    BasebandTrace trace;
    trace.qubit_index = qubit_index;
    trace.samples.resize(n_keep);
    for (int t = 0; t < n_keep; ++t) {
        const Complex raw{static_cast<double>(shot.i_samples[t]),
                          static_cast<double>(shot.q_samples[t])};
        trace.samples[t] = raw * std::conj(carrier[t]);
    }
    return trace;
}

BasebandTrace demodulate(const RawShot& shot, const DeviceConfig& device, int qubit_index,
                         int n_keep) {
    if (qubit_index < 0 || qubit_index >= device.num_qubits()) {
        throw ConfigError("qubit index out of range");
    }
    return demodulate(shot, CarrierTable(device), qubit_index, n_keep);
}

Complex mtv(const BasebandTrace& trace) {
    if (trace.samples.empty()) throw DataError("mtv of empty trace");
    Complex sum{0.0, 0.0};
    for (const Complex& z : trace.samples) sum += z;
    return sum / static_cast<double>(trace.samples.size());
}

void TraceStats::push(const std::vector<Complex>& trace) {
    if (!stack_.empty() && stack_.back().sum.size() != trace.size()) {
        throw DataError("trace length mismatch in statistics accumulator");
    }
    Node node;
    node.weight = 1;
    node.sum = trace;
    node.sum_re2.resize(trace.size());
    node.sum_im2.resize(trace.size());
    for (std::size_t t = 0; t < trace.size(); ++t) {
        node.sum_re2[t] = trace[t].real() * trace[t].real();
        node.sum_im2[t] = trace[t].imag() * trace[t].imag();
    }
    stack_.push_back(std::move(node));
    ++count_;
    merge_top();
}

void TraceStats::merge_top() {
    while (stack_.size() >= 2 &&
           stack_[stack_.size() - 1].weight == stack_[stack_.size() - 2].weight) {
        Node top = std::move(stack_.back());
        stack_.pop_back();
        Node& dst = stack_.back();
        dst.weight += top.weight;
        for (std::size_t t = 0; t < dst.sum.size(); ++t) {
            dst.sum[t] += top.sum[t];
            dst.sum_re2[t] += top.sum_re2[t];
            dst.sum_im2[t] += top.sum_im2[t];
        }
    }
}

int TraceStats::length() const {
    return stack_.empty() ? 0 : static_cast<int>(stack_.front().sum.size());
}

std::vector<Complex> TraceStats::mean() const {
    if (count_ == 0) throw DataError("no traces accumulated");
    const int n = length();
    std::vector<Complex> m(n, Complex{0.0, 0.0});
    // Final cross-node merge from deepest (latest) to shallowest keeps the
    // pairwise tree order fixed by push index.
    for (int t = 0; t < n; ++t) {
        Complex s{0.0, 0.0};
        for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) s += it->sum[t];
        m[t] = s / static_cast<double>(count_);
    }
    return m;
}

std::vector<double> TraceStats::variance() const {
    if (count_ < 2) throw DataError("variance needs at least 2 traces");
    const int n = length();
    const auto m = mean();
    std::vector<double> v(n);
    const double denom = static_cast<double>(count_ - 1);
    for (int t = 0; t < n; ++t) {
        double re2 = 0.0, im2 = 0.0;
        for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
            re2 += it->sum_re2[t];
            im2 += it->sum_im2[t];
        }
        const double var_re = (re2 - static_cast<double>(count_) * m[t].real() * m[t].real()) / denom;
        const double var_im = (im2 - static_cast<double>(count_) * m[t].imag() * m[t].imag()) / denom;
        double var = std::max(0.0, var_re) + std::max(0.0, var_im);
        // Residues below 1e-12 of the bin's mean power are accumulation dust
        // from identical traces; treat them as exact zeros so degenerate bins
        // take the mean-difference fallback instead of a 1/dust denominator.
        if (var < 1e-12 * std::norm(m[t])) var = 0.0;
        v[t] = var;
    }
    return v;
}

MatchedFilterKernel build_kernel_from_stats(const TraceStats& a, const TraceStats& b) {
    if (a.count() < 2 || b.count() < 2) {
        throw DataError("build_kernel needs at least 2 traces per class");
    }
    if (a.length() != b.length()) throw DataError("build_kernel class length mismatch");

    const auto mu_a = a.mean();
    const auto mu_b = b.mean();
    const auto var_a = a.variance();
    const auto var_b = b.variance();
    const int n = a.length();

    double max_abs_dvar = 0.0;
    for (int t = 0; t < n; ++t) max_abs_dvar = std::max(max_abs_dvar, std::abs(var_b[t] - var_a[t]));
    const double eps = 1e-12 * max_abs_dvar;

    MatchedFilterKernel k;
    k.taps.resize(n);
    for (int t = 0; t < n; ++t) {
        const Complex num = mu_b[t] - mu_a[t];
        const double dvar = var_b[t] - var_a[t];
        const double denom = dvar + (dvar > 0.0 ? eps : (dvar < 0.0 ? -eps : 0.0));
        k.taps[t] = denom == 0.0 ? num : num / denom;
    }
    return k;
}

MatchedFilterKernel build_kernel(const std::vector<std::vector<Complex>>& traces_a,
                                 const std::vector<std::vector<Complex>>& traces_b) {
    TraceStats a, b;
    for (const auto& tr : traces_a) a.push(tr);
    for (const auto& tr : traces_b) {
        if (!traces_a.empty() && tr.size() != traces_a.front().size()) {
            throw DataError("build_kernel class length mismatch");
        }
        b.push(tr);
    }
    return build_kernel_from_stats(a, b);
}

std::vector<std::vector<ErrorTag>> tag_error_traces(
    const TraceDataset& dataset, const std::vector<std::vector<int>>& labels,
    const std::vector<std::array<Complex, 3>>& centroids, int threads) {
    const int n_qubits = dataset.device.num_qubits();
    const std::size_t n_shots = dataset.shots.size();
    if (labels.size() != n_shots) throw DataError("labels do not match shot count");
    if (static_cast<int>(centroids.size()) != n_qubits) {
        throw DataError("missing centroid set for some qubit");
    }
    const CarrierTable carriers(dataset.device);
    const int n_samples = dataset.device.num_samples();

    std::vector<std::vector<ErrorTag>> tags(n_shots, std::vector<ErrorTag>(n_qubits));
    parallel_for(n_shots, threads, [&](std::size_t j) {
        for (int q = 0; q < n_qubits; ++q) {
            const Complex point = mtv(demodulate(dataset.shots[j], carriers, q, n_samples));
            const int own = labels[j][q];
            const double own_dist = std::abs(point - centroids[q][own]);
            int best = own;
            double best_dist = own_dist;
            for (int s = 0; s < 3; ++s) {
                if (s == own) continue;
                const double dist = std::abs(point - centroids[q][s]);
                if (dist < best_dist) {
                    best = s;
                    best_dist = dist;
                }
            }
            if (best != own && best_dist < own_dist) {
                tags[j][q] = ErrorTag{true, own, best};
            }
        }
    });
    return tags;
}

MatchedFilterBank build_filter_bank(const TraceDataset& dataset,
                                    const std::vector<std::vector<int>>& labels,
                                    const std::vector<std::vector<ErrorTag>>& tags,
                                    const BankOptions& opts, int threads) {
    const int n_qubits = dataset.device.num_qubits();
    const std::size_t n_shots = dataset.shots.size();
    if (labels.size() != n_shots || tags.size() != n_shots) {
        throw DataError("labels/tags do not match shot count");
    }
    if (!opts.include.empty() && opts.include.size() != n_shots) {
        throw DataError("include mask does not match shot count");
    }
    const int n_samples = dataset.device.num_samples();
    const CarrierTable carriers(dataset.device);

    MatchedFilterBank bank;
    bank.n_qubits = n_qubits;
    bank.kernel_length = n_samples;
    bank.source_dataset_id = opts.source_dataset_id;
    bank.kernels.resize(static_cast<std::size_t>(n_qubits) * kKernelsPerQubit);

    std::vector<int> qubit_ids(n_qubits);
    for (int q = 0; q < n_qubits; ++q) qubit_ids[q] = q;

    parallel_for(n_qubits, threads, [&](std::size_t qi) {
        const int q = static_cast<int>(qi);
        // Per level: every trace of the level, and the untagged subset.
        TraceStats level_all[3], level_clean[3];
        TraceStats tagged[6];
        for (std::size_t j = 0; j < n_shots; ++j) {
            if (!opts.include.empty() && !opts.include[j]) continue;
            const auto trace = demodulate(dataset.shots[j], carriers, q, n_samples).samples;
            const int level = labels[j][q];
            if (level < 0 || level > 2) throw DataError("labels must be 0, 1 or 2");
            level_all[level].push(trace);
            const ErrorTag& tag = tags[j][q];
            if (tag.tagged) {
                const int kind = static_cast<int>(error_kind(tag.from, tag.to)) -
                                 static_cast<int>(KernelKind::Rmf10);
                tagged[kind].push(trace);
            } else {
                level_clean[level].push(trace);
            }
        }

        int represented = 0;
        for (int s = 0; s < 3; ++s) represented += level_all[s].count() >= 2 ? 1 : 0;
        if (represented < 2) {
            throw DataError("qubit " + std::to_string(q) + " has fewer than 2 levels represented");
        }

        auto put = [&](KernelKind kind, MatchedFilterKernel&& k) {
            k.kind = kind;
            k.qubit_index = q;
            bank.kernels[static_cast<std::size_t>(q) * kKernelsPerQubit +
                         static_cast<int>(kind)] = std::move(k);
        };
        auto zero_kernel = [&](KernelKind kind) {
            MatchedFilterKernel k;
            k.zero = true;
            k.taps.assign(n_samples, Complex{0.0, 0.0});
            put(kind, std::move(k));
        };

        // QMF(a|b): class a vs class b.
        const std::pair<int, int> qmf_pairs[3] = {{0, 1}, {0, 2}, {1, 2}};
        for (int p = 0; p < 3; ++p) {
            const auto [a, b] = qmf_pairs[p];
            const KernelKind kind = static_cast<KernelKind>(p);
            if (level_all[a].count() < 2 || level_all[b].count() < 2) {
                zero_kernel(kind);
            } else {
                put(kind, build_kernel_from_stats(level_all[a], level_all[b]));
            }
        }

        // RMF/EMF(s->s'): untagged level-s traces vs tagged s->s' traces.
        for (int e = 0; e < 6; ++e) {
            const KernelKind kind =
                static_cast<KernelKind>(static_cast<int>(KernelKind::Rmf10) + e);
            const int src = kErrorTransitions[e][0];
            if (tagged[e].count() < static_cast<std::size_t>(opts.min_error_traces) ||
                level_clean[src].count() < 2) {
                zero_kernel(kind);
            } else {
                put(kind, build_kernel_from_stats(level_clean[src], tagged[e]));
            }
        }
    });
    return bank;
}

FeatureVector apply_bank(const MatchedFilterBank& bank, const RawShot& shot,
                         const CarrierTable& carriers, int n_keep) {
    if (n_keep < 1 || n_keep > bank.kernel_length) {
        throw ConfigError("n_keep exceeds kernel length");
    }
    FeatureVector features(bank.feature_dim());
    for (int q = 0; q < bank.n_qubits; ++q) {
        const BasebandTrace trace = demodulate(shot, carriers, q, n_keep);
        for (int k = 0; k < kKernelsPerQubit; ++k) {
            const auto& kernel = bank.kernels[static_cast<std::size_t>(q) * kKernelsPerQubit + k];
            double acc = 0.0;
            if (!kernel.zero) {
                for (int t = 0; t < n_keep; ++t) {
                    const Complex prod = std::conj(kernel.taps[t]) * trace.samples[t];
                    acc += prod.real();
                }
            }
            features[static_cast<std::size_t>(q) * kKernelsPerQubit + k] =
                acc / static_cast<double>(n_keep);
        }
    }
    return features;
}

FeatureVector apply_bank(const MatchedFilterBank& bank, const RawShot& shot,
                         const DeviceConfig& device, int n_keep) {
    if (device.num_qubits() != bank.n_qubits) {
        throw DataError("bank/device qubit count mismatch: bank has " +
                        std::to_string(bank.n_qubits) + ", device has " +
                        std::to_string(device.num_qubits()));
    }
    return apply_bank(bank, shot, CarrierTable(device), n_keep);
}

MatchedFilterBank truncate_bank(const MatchedFilterBank& bank, int n_keep) {
    if (n_keep < 1 || n_keep > bank.kernel_length) {
        throw ConfigError("n_keep " + std::to_string(n_keep) + " out of range [1, " +
                          std::to_string(bank.kernel_length) + "]");
    }
    MatchedFilterBank out = bank;
    out.kernel_length = n_keep;
    for (auto& k : out.kernels) k.taps.resize(n_keep);
    return out;
}

void write_bank(const MatchedFilterBank& bank, const std::string& path) {
    Json j;
    j["format"] = "qrd-filter-bank";
    j["version"] = 1;
    j["n_qubits"] = bank.n_qubits;
    j["kernel_length"] = bank.kernel_length;
    j["source_dataset_id"] = bank.source_dataset_id;
    Json kernels = Json::array();
    for (const auto& k : bank.kernels) {
        Json kj;
        kj["kind"] = kernel_kind_name(k.kind);
        kj["qubit"] = k.qubit_index;
        kj["zero"] = k.zero;
        Json taps = Json::array();
        for (const Complex& c : k.taps) taps.push_back(complex_to_json(c));
        kj["taps"] = std::move(taps);
        kernels.push_back(std::move(kj));
    }
    j["kernels"] = std::move(kernels);

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << j.dump();
    if (!out) throw DataError("write failed for " + path);
}

MatchedFilterBank read_bank(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad bank file: ") + e.what());
    }
    MatchedFilterBank bank;
    try {
        if (j.at("format").get<std::string>() != "qrd-filter-bank") {
            throw DataError("not a filter bank file");
        }
        bank.n_qubits = j.at("n_qubits").get<int>();
        bank.kernel_length = j.at("kernel_length").get<int>();
        bank.source_dataset_id = j.at("source_dataset_id").get<std::string>();
        for (const auto& kj : j.at("kernels")) {
            MatchedFilterKernel k;
            k.kind = kernel_kind_from_name(kj.at("kind").get<std::string>());
            k.qubit_index = kj.at("qubit").get<int>();
            k.zero = kj.at("zero").get<bool>();
            for (const auto& tap : kj.at("taps")) k.taps.push_back(complex_from_json(tap));
            bank.kernels.push_back(std::move(k));
        }
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad bank file: ") + e.what());
    }
    if (bank.kernels.size() != static_cast<std::size_t>(bank.n_qubits) * kKernelsPerQubit) {
        throw DataError("bank kernel count mismatch");
    }
    return bank;
}

}  // namespace qrd
