#include "qrd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "qrd/dataset_io.hpp"
#include "qrd/errors.hpp"
#include "qrd/parallel.hpp"

namespace qrd {

namespace fs = std::filesystem;

namespace {

std::string crc_hex(std::uint32_t crc) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", crc);
    return buf;
}

double stage_seconds(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("stage ") + name + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(std::string("stage ") + name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string("stage ") + name + ": " + e.what());
    }
}

}  // namespace

std::vector<std::vector<int>> RunConfig::resolve_states() const {
    const int n = device.num_qubits();
    if (state_selector == "computational") return computational_states(n);
    if (state_selector == "all") return all_level_states(n);
    if (state_selector == "explicit") {
        if (explicit_states.empty()) throw ConfigError("explicit state list is empty");
        return explicit_states;
    }
    throw ConfigError("unknown state selector '" + state_selector + "'");
}

RunConfig run_config_from_json(const Json& j) {
    RunConfig cfg;
    try {
        if (!j.contains("seed")) throw ConfigError("config is missing the required seed");
        cfg.seed = j.at("seed").get<std::uint64_t>();

        if (j.contains("device")) {
            cfg.device = device_from_json(j.at("device"));
        } else if (j.contains("device_path")) {
            std::ifstream in(j.at("device_path").get<std::string>());
            if (!in) throw ConfigError("cannot open device_path");
            cfg.device = device_from_json(Json::parse(in));
        } else {
            cfg.device = default_device(j.value("n_qubits", 5), derive_seed(cfg.seed, "sim"));
        }
        cfg.device.seed = derive_seed(cfg.seed, "sim");

        cfg.dataset_path = j.value("dataset_path", std::string{});
        cfg.shots_per_state = j.value("shots_per_state", 500);
        if (j.contains("states")) {
            const auto& s = j.at("states");
            if (s.is_string()) {
                cfg.state_selector = s.get<std::string>();
            } else {
                cfg.state_selector = "explicit";
                cfg.explicit_states = s.get<std::vector<std::vector<int>>>();
            }
        }
        if (j.contains("cluster")) {
            cfg.cluster.subsample = j.at("cluster").value("subsample", cfg.cluster.subsample);
            cfg.cluster.restarts = j.at("cluster").value("restarts", cfg.cluster.restarts);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
            cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
            cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
            cfg.train.patience = t.value("patience", cfg.train.patience);
        }
        cfg.train.seed = derive_seed(cfg.seed, "train");
        if (j.contains("sweep")) cfg.sweep = j.at("sweep").get<std::vector<int>>();
        cfg.out_dir = j.value("out", cfg.out_dir);
        const std::string labels = j.value("labels", std::string("cluster"));
        if (labels == "cluster") {
            cfg.labels = LabelSource::Cluster;
        } else if (labels == "truth") {
            cfg.labels = LabelSource::Truth;
        } else {
            throw ConfigError("labels must be 'cluster' or 'truth'");
        }
        cfg.threads = j.value("threads", 0);
        if (j.contains("exclude_qubits")) {
            cfg.exclude_qubits = j.at("exclude_qubits").get<std::vector<int>>();
        }
        cfg.min_error_traces = j.value("min_error_traces", 20);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    } catch (const DataError& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    cfg.train.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("bad config JSON: ") + e.what());
    }
    return run_config_from_json(j);
}

Json run_config_to_json(const RunConfig& cfg) {
    Json j;
    j["seed"] = cfg.seed;
    j["device"] = device_to_json(cfg.device);
    if (!cfg.dataset_path.empty()) j["dataset_path"] = cfg.dataset_path;
    j["shots_per_state"] = cfg.shots_per_state;
    if (cfg.state_selector == "explicit") {
        j["states"] = cfg.explicit_states;
    } else {
        j["states"] = cfg.state_selector;
    }
    j["cluster"] = Json{{"subsample", cfg.cluster.subsample}, {"restarts", cfg.cluster.restarts}};
    j["train"] = Json{{"learning_rate", cfg.train.learning_rate},
                      {"batch_size", cfg.train.batch_size},
                      {"max_epochs", cfg.train.max_epochs},
                      {"patience", cfg.train.patience}};
    j["sweep"] = cfg.sweep;
    j["labels"] = cfg.labels == LabelSource::Cluster ? "cluster" : "truth";
    j["exclude_qubits"] = cfg.exclude_qubits;
    j["min_error_traces"] = cfg.min_error_traces;
    return j;
}

namespace {

Json mlp_to_json(const MlpModel& m) {
    Json j;
    j["qubit"] = m.qubit_index;
    j["layers"] = m.layers;
    j["weights"] = m.weights;
    j["biases"] = m.biases;
    j["norm_mean"] = m.norm.mean;
    j["norm_std"] = m.norm.std;
    return j;
}

MlpModel mlp_from_json(const Json& j) {
    MlpModel m;
    m.qubit_index = j.at("qubit").get<int>();
    const auto layers = j.at("layers").get<std::vector<int>>();
    if (layers.size() != 4) throw DataError("mlp layers must have 4 entries");
    std::copy(layers.begin(), layers.end(), m.layers.begin());
    m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    m.norm.mean = j.at("norm_mean").get<std::vector<double>>();
    m.norm.std = j.at("norm_std").get<std::vector<double>>();
    if (m.weights.size() != 3 || m.biases.size() != 3) throw DataError("mlp needs 3 layers");
    for (int layer = 0; layer < 3; ++layer) {
        const std::size_t expect =
            static_cast<std::size_t>(m.layers[layer]) * m.layers[layer + 1];
        if (m.weights[layer].size() != expect ||
            m.biases[layer].size() != static_cast<std::size_t>(m.layers[layer + 1])) {
            throw DataError("mlp weight shapes do not match layer sizes");
        }
    }
    return m;
}

Json discriminant_to_json(const DiscriminantModel& m) {
    Json j;
    j["kind"] = m.kind == DiscriminantKind::Lda ? "lda" : "qda";
    j["qubit"] = m.qubit_index;
    j["n_classes"] = m.n_classes;
    j["means"] = m.means;
    j["covariances"] = m.covariances;
    j["log_priors"] = m.log_priors;
    return j;
}

DiscriminantModel discriminant_from_json(const Json& j) {
    DiscriminantModel m;
    m.kind = j.at("kind").get<std::string>() == "lda" ? DiscriminantKind::Lda
                                                      : DiscriminantKind::Qda;
    m.qubit_index = j.at("qubit").get<int>();
    m.n_classes = j.at("n_classes").get<int>();
    m.means = j.at("means").get<std::vector<std::array<double, 2>>>();
    m.covariances = j.at("covariances").get<std::vector<std::array<double, 4>>>();
    m.log_priors = j.at("log_priors").get<std::vector<double>>();
    return m;
}

Json cluster_model_to_json(const ClusterModel& model, const ClusterParams& params) {
    Json j;
    j["subsample"] = params.subsample;
    j["restarts"] = params.restarts;
    Json qubits = Json::array();
    for (const auto& q : model.qubits) {
        Json qj;
        qj["centroids"] = Json::array({complex_to_json(q.centroids[0]),
                                       complex_to_json(q.centroids[1]),
                                       complex_to_json(q.centroids[2])});
        qj["cluster_to_level"] = q.cluster_to_level;
        qj["subsample_indices"] = q.subsample_indices;
        qj["bandwidth"] = q.bandwidth;
        qj["seed"] = q.seed;
        qubits.push_back(std::move(qj));
    }
    j["qubits"] = std::move(qubits);
    return j;
}

std::pair<ClusterModel, ClusterParams> cluster_model_from_json(const Json& j) {
    ClusterModel model;
    ClusterParams params;
    params.subsample = j.at("subsample").get<int>();
    params.restarts = j.at("restarts").get<int>();
    for (const auto& qj : j.at("qubits")) {
        QubitClusterModel q;
        for (int c = 0; c < 3; ++c) q.centroids[c] = complex_from_json(qj.at("centroids")[c]);
        const auto map = qj.at("cluster_to_level").get<std::vector<int>>();
        std::copy(map.begin(), map.end(), q.cluster_to_level.begin());
        q.subsample_indices = qj.at("subsample_indices").get<std::vector<int>>();
        q.bandwidth = qj.at("bandwidth").get<double>();
        q.seed = qj.at("seed").get<std::uint64_t>();
        q.subsample = params.subsample;
        model.qubits.push_back(std::move(q));
    }
    return {std::move(model), params};
}

}  // namespace

void write_bundle(const ModelBundle& bundle, const std::string& path) {
    Json j;
    j["format"] = "qrd-model-bundle";
    j["version"] = 1;
    j["n_qubits"] = bundle.n_qubits;
    j["n_samples"] = bundle.n_samples;
    j["seed"] = bundle.seed;
    j["labels"] = bundle.labels == LabelSource::Cluster ? "cluster" : "truth";
    j["train"] = Json{{"learning_rate", bundle.train.learning_rate},
                      {"batch_size", bundle.train.batch_size},
                      {"max_epochs", bundle.train.max_epochs},
                      {"patience", bundle.train.patience},
                      {"seed", bundle.train.seed}};
    j["bank"] = Json{{"path", bundle.bank_path}, {"crc32", bundle.bank_crc32}};
    Json mlps = Json::array();
    for (const auto& m : bundle.mlps) mlps.push_back(mlp_to_json(m));
    j["mlps"] = std::move(mlps);
    j["cluster"] = bundle.cluster ? cluster_model_to_json(*bundle.cluster, bundle.cluster_params)
                                  : Json(nullptr);
    Json lda = Json::array(), qda = Json::array();
    for (const auto& m : bundle.lda) lda.push_back(discriminant_to_json(m));
    for (const auto& m : bundle.qda) qda.push_back(discriminant_to_json(m));
    j["lda"] = std::move(lda);
    j["qda"] = std::move(qda);
    j["qmf_thresholds"] = bundle.qmf_thresholds;

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << j.dump();
    if (!out) throw DataError("write failed for " + path);
}

ModelBundle read_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad bundle file: ") + e.what());
    }
    ModelBundle bundle;
    try {
        if (j.at("format").get<std::string>() != "qrd-model-bundle") {
            throw DataError("not a model bundle file");
        }
        bundle.n_qubits = j.at("n_qubits").get<int>();
        bundle.n_samples = j.at("n_samples").get<int>();
        bundle.seed = j.at("seed").get<std::uint64_t>();
        bundle.labels = j.at("labels").get<std::string>() == "cluster" ? LabelSource::Cluster
                                                                       : LabelSource::Truth;
        const auto& t = j.at("train");
        bundle.train.learning_rate = t.at("learning_rate").get<double>();
        bundle.train.batch_size = t.at("batch_size").get<int>();
        bundle.train.max_epochs = t.at("max_epochs").get<int>();
        bundle.train.patience = t.at("patience").get<int>();
        bundle.train.seed = t.at("seed").get<std::uint64_t>();
        bundle.bank_path = j.at("bank").at("path").get<std::string>();
        bundle.bank_crc32 = j.at("bank").at("crc32").get<std::string>();
        for (const auto& mj : j.at("mlps")) bundle.mlps.push_back(mlp_from_json(mj));
        if (!j.at("cluster").is_null()) {
            auto [model, params] = cluster_model_from_json(j.at("cluster"));
            bundle.cluster = std::move(model);
            bundle.cluster_params = params;
        }
        for (const auto& mj : j.at("lda")) bundle.lda.push_back(discriminant_from_json(mj));
        for (const auto& mj : j.at("qda")) bundle.qda.push_back(discriminant_from_json(mj));
        bundle.qmf_thresholds =
            j.at("qmf_thresholds").get<std::vector<std::array<double, 3>>>();
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad bundle file: ") + e.what());
    }
    return bundle;
}

namespace {

// ---------------------------------------------------------------------------
// pipeline internals
// ---------------------------------------------------------------------------

// mtvs[qubit][shot], full-length demodulation
std::vector<std::vector<Complex>> compute_mtvs(const TraceDataset& ds, int threads) {
    const int n_qubits = ds.device.num_qubits();
    const int n_samples = ds.device.num_samples();
    const CarrierTable carriers(ds.device);
    std::vector<std::vector<Complex>> mtvs(n_qubits, std::vector<Complex>(ds.shots.size()));
    parallel_for(ds.shots.size(), threads, [&](std::size_t j) {
        for (int q = 0; q < n_qubits; ++q) {
            mtvs[q][j] = mtv(demodulate(ds.shots[j], carriers, q, n_samples));
        }
    });
    return mtvs;
}

struct Labeling {
    std::vector<std::vector<int>> labels;              // [shot][qubit]
    std::vector<std::array<Complex, 3>> centroids;     // per qubit, indexed by level
    std::optional<ClusterModel> cluster;
};

Labeling label_by_cluster(const TraceDataset& ds, const std::vector<std::vector<Complex>>& mtvs,
                          const ClusterParams& params, std::uint64_t seed, int threads) {
    const int n_qubits = ds.device.num_qubits();
    const std::uint64_t key = derive_seed(seed, "cluster");
    SpectralParams spectral;
    spectral.kmeans_restarts = params.restarts;

    Labeling out;
    out.labels.assign(ds.shots.size(), std::vector<int>(n_qubits, 0));
    out.centroids.resize(n_qubits);
    ClusterModel model;
    model.qubits.resize(n_qubits);

    std::vector<SpectralResult> results(n_qubits);
    parallel_for(n_qubits, threads, [&](std::size_t q) {
        const std::uint64_t stream_base = static_cast<std::uint64_t>(q) << 20;
        results[q] = spectral_cluster(mtvs[q], std::min<int>(params.subsample,
                                                             static_cast<int>(mtvs[q].size())),
                                      key, stream_base, spectral);
    });

    for (int q = 0; q < n_qubits; ++q) {
        std::vector<int> preps(ds.shots.size());
        for (std::size_t j = 0; j < ds.shots.size(); ++j) preps[j] = ds.shots[j].prep_label[q];
        const auto cluster_to_level = assign_labels(results[q], mtvs[q], preps);

        QubitClusterModel& qm = model.qubits[q];
        qm.centroids = results[q].centroids;
        qm.cluster_to_level = cluster_to_level;
        qm.subsample_indices = results[q].subsample_indices;
        qm.bandwidth = results[q].bandwidth;
        qm.subsample = params.subsample;
        qm.seed = key;

        for (std::size_t j = 0; j < ds.shots.size(); ++j) {
            out.labels[j][q] = cluster_to_level[results[q].assignment[j]];
        }
        for (int c = 0; c < 3; ++c) {
            out.centroids[q][cluster_to_level[c]] = results[q].centroids[c];
        }
    }
    out.cluster = std::move(model);
    return out;
}

Labeling label_by_truth(const TraceDataset& ds, const std::vector<std::vector<Complex>>& mtvs) {
    const int n_qubits = ds.device.num_qubits();
    Labeling out;
    out.labels.assign(ds.shots.size(), std::vector<int>(n_qubits, 0));
    out.centroids.resize(n_qubits);
    for (std::size_t j = 0; j < ds.shots.size(); ++j) {
        for (int q = 0; q < n_qubits; ++q) {
            out.labels[j][q] = ds.shots[j].truth.qubits[q].initial;
        }
    }
    // class-mean centroids from the train+val splits
    for (int q = 0; q < n_qubits; ++q) {
        std::array<Complex, 3> sums{};
        std::array<std::size_t, 3> counts{};
        for (std::size_t j = 0; j < ds.shots.size(); ++j) {
            if (ds.split[j] == Split::Test) continue;
            sums[out.labels[j][q]] += mtvs[q][j];
            ++counts[out.labels[j][q]];
        }
        for (int s = 0; s < 3; ++s) {
            if (counts[s] == 0) {
                throw DataError("qubit " + std::to_string(q) + " has no level-" +
                                std::to_string(s) + " traces for centroid estimation");
            }
            out.centroids[q][s] = sums[s] / static_cast<double>(counts[s]);
        }
    }
    return out;
}

// features[shot] at full kernel length
std::vector<FeatureVector> compute_features(const TraceDataset& ds, const MatchedFilterBank& bank,
                                            int threads) {
    const CarrierTable carriers(ds.device);
    std::vector<FeatureVector> features(ds.shots.size());
    parallel_for(ds.shots.size(), threads, [&](std::size_t j) {
        features[j] = apply_bank(bank, ds.shots[j], carriers, bank.kernel_length);
    });
    return features;
}

struct QmfBaseline {
    std::array<double, 3> theta{};   // theta01, theta02, theta12
    std::array<double, 3> orient{};  // +1 if the feature grows toward the higher level
};

QmfBaseline fit_qmf_baseline(const std::vector<FeatureVector>& features,
                             const std::vector<std::vector<int>>& labels,
                             const std::vector<Split>& split, int qubit) {
    // class-conditional means of the three QMF features on the train split
    std::array<std::array<double, 3>, 3> mean{};   // [level][pair]
    std::array<std::array<std::size_t, 3>, 3> cnt{};
    const std::array<std::pair<int, int>, 3> pairs = {{{0, 1}, {0, 2}, {1, 2}}};
    for (std::size_t j = 0; j < features.size(); ++j) {
        if (split[j] != Split::Train) continue;
        const int level = labels[j][qubit];
        for (int p = 0; p < 3; ++p) {
            mean[level][p] += features[j][static_cast<std::size_t>(qubit) * kKernelsPerQubit + p];
        }
        for (int p = 0; p < 3; ++p) ++cnt[level][p];
    }
    for (int level = 0; level < 3; ++level) {
        for (int p = 0; p < 3; ++p) {
            if (cnt[level][p] > 0) mean[level][p] /= static_cast<double>(cnt[level][p]);
        }
    }
    QmfBaseline base;
    for (int p = 0; p < 3; ++p) {
        const auto [a, b] = pairs[p];
        base.theta[p] = 0.5 * (mean[a][p] + mean[b][p]);
        base.orient[p] = mean[b][p] >= mean[a][p] ? 1.0 : -1.0;
    }
    return base;
}

int qmf_argmax(const QmfBaseline& base, const FeatureVector& features, int qubit) {
    const std::size_t off = static_cast<std::size_t>(qubit) * kKernelsPerQubit;
    const double m01 = base.orient[0] * (features[off + 0] - base.theta[0]);
    const double m02 = base.orient[1] * (features[off + 1] - base.theta[1]);
    const double m12 = base.orient[2] * (features[off + 2] - base.theta[2]);
    const double scores[3] = {-m01 - m02, m01 - m12, m02 + m12};
    int best = 0;
    for (int c = 1; c < 3; ++c) {
        if (scores[c] > scores[best]) best = c;
    }
    return best;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw DataError("write failed for " + path);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void write_report_files(const fs::path& out_dir, const EvalReport& report, const Json& extra) {
    // confusion.csv
    {
        std::string csv = "qubit,true_level,predicted_level,count\n";
        for (std::size_t q = 0; q < report.qubits.size(); ++q) {
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    csv += std::to_string(q) + "," + std::to_string(r) + "," + std::to_string(c) +
                           "," + std::to_string(report.qubits[q].confusion[r][c]) + "\n";
                }
            }
        }
        write_text((out_dir / "confusion.csv").string(), csv);
    }
    // fidelity.csv
    {
        std::string csv =
            "qubit,fidelity,leak_precision,leak_recall,lda_fidelity,qda_fidelity,"
            "qmf_fidelity,cluster_purity,cluster_recall\n";
        for (std::size_t q = 0; q < report.qubits.size(); ++q) {
            const auto& e = report.qubits[q];
            csv += std::to_string(q) + "," + format_double(e.fidelity) + "," +
                   format_double(e.leak_precision) + "," + format_double(e.leak_recall) + "," +
                   format_double(e.lda_fidelity) + "," + format_double(e.qda_fidelity) + "," +
                   format_double(e.qmf_fidelity) + ",";
            csv += e.cluster_purity >= 0.0 ? format_double(e.cluster_purity) : "";
            csv += ",";
            csv += e.cluster_recall >= 0.0 ? format_double(e.cluster_recall) : "";
            csv += "\n";
        }
        write_text((out_dir / "fidelity.csv").string(), csv);
    }
    // sweep.csv
    {
        std::string csv = "n_keep,mean_fidelity";
        for (std::size_t q = 0; q < report.qubits.size(); ++q) {
            csv += ",fidelity_q" + std::to_string(q);
        }
        csv += "\n";
        for (const auto& row : report.sweep) {
            csv += std::to_string(row.n_keep) + "," + format_double(row.mean_fidelity);
            for (const double f : row.per_qubit) csv += "," + format_double(f);
            csv += "\n";
        }
        write_text((out_dir / "sweep.csv").string(), csv);
    }
    // scaling.csv
    {
        std::string csv =
            "n,k,input_size,per_qubit_params,total_params,monolithic_outputs,reference_params\n";
        for (const auto& row : report.scaling) {
            csv += std::to_string(row.n_qubits) + "," + std::to_string(row.n_levels) + "," +
                   std::to_string(row.input_size) + "," + std::to_string(row.per_qubit_params) +
                   "," + std::to_string(row.total_params) + "," + row.monolithic_outputs + ",";
            if (row.reference_params > 0) csv += std::to_string(row.reference_params);
            csv += "\n";
        }
        write_text((out_dir / "scaling.csv").string(), csv);
    }
    // report.json
    {
        Json j = extra;
        Json qubits = Json::array();
        for (const auto& e : report.qubits) {
            Json qj;
            qj["fidelity"] = e.fidelity;
            qj["confusion"] = e.confusion;
            qj["leak_precision"] = e.leak_precision;
            qj["leak_recall"] = e.leak_recall;
            qj["lda_fidelity"] = e.lda_fidelity;
            qj["qda_fidelity"] = e.qda_fidelity;
            qj["qmf_fidelity"] = e.qmf_fidelity;
            if (e.cluster_purity >= 0.0) {
                qj["cluster_purity"] = e.cluster_purity;
                qj["cluster_recall"] = e.cluster_recall;
            }
            qubits.push_back(std::move(qj));
        }
        j["qubits"] = std::move(qubits);
        j["f_nq"] = report.f_nq;
        j["f_nq_lda"] = report.f_nq_lda;
        j["f_nq_qda"] = report.f_nq_qda;
        j["f_nq_qmf"] = report.f_nq_qmf;
        Json sweep = Json::array();
        for (const auto& row : report.sweep) {
            sweep.push_back(Json{{"n_keep", row.n_keep},
                                 {"mean_fidelity", row.mean_fidelity},
                                 {"per_qubit", row.per_qubit}});
        }
        j["sweep"] = std::move(sweep);
        Json scaling = Json::array();
        for (const auto& row : report.scaling) {
            scaling.push_back(Json{{"n", row.n_qubits},
                                   {"k", row.n_levels},
                                   {"input_size", row.input_size},
                                   {"per_qubit_params", row.per_qubit_params},
                                   {"total_params", row.total_params},
                                   {"monolithic_outputs", row.monolithic_outputs},
                                   {"reference_params", row.reference_params}});
        }
        j["scaling"] = std::move(scaling);
        if (!report.excluded_qubits.empty()) {
            j["error_excluding"] = Json{{"excluded_qubits", report.excluded_qubits},
                                        {"error", report.error_excluding}};
        }
        write_text((out_dir / "report.json").string(), j.dump(2) + "\n");
    }
}

EvalReport evaluate(const TraceDataset& ds, const std::vector<std::vector<Complex>>& mtvs,
                    const std::vector<FeatureVector>& features, const Labeling& labeling,
                    const MatchedFilterBank& bank, const ModelBundle& bundle,
                    const std::vector<QmfBaseline>& qmf, const RunConfig& cfg) {
    const int n_qubits = ds.device.num_qubits();
    EvalReport report;
    report.qubits.resize(n_qubits);

    std::vector<std::size_t> test_shots;
    for (std::size_t j = 0; j < ds.shots.size(); ++j) {
        if (ds.split[j] == Split::Test) test_shots.push_back(j);
    }
    if (test_shots.empty()) throw DataError("dataset has no test split");

    std::vector<std::vector<int>> mlp_pred(n_qubits, std::vector<int>(test_shots.size()));
    std::vector<std::vector<int>> lda_pred(n_qubits, std::vector<int>(test_shots.size()));
    std::vector<std::vector<int>> qda_pred(n_qubits, std::vector<int>(test_shots.size()));
    std::vector<std::vector<int>> qmf_pred(n_qubits, std::vector<int>(test_shots.size()));
    parallel_for(test_shots.size(), cfg.threads, [&](std::size_t idx) {
        const std::size_t j = test_shots[idx];
        for (int q = 0; q < n_qubits; ++q) {
            mlp_pred[q][idx] = infer(bundle.mlps[q], features[j]).label;
            const std::array<double, 2> point = {mtvs[q][j].real(), mtvs[q][j].imag()};
            lda_pred[q][idx] = classify(bundle.lda[q], point);
            qda_pred[q][idx] = classify(bundle.qda[q], point);
            qmf_pred[q][idx] = qmf_argmax(qmf[q], features[j], q);
        }
    });

    std::vector<double> fids, lda_fids, qda_fids, qmf_fids;
    for (int q = 0; q < n_qubits; ++q) {
        QubitEval& e = report.qubits[q];
        Confusion lda_conf{}, qda_conf{}, qmf_conf{};
        std::vector<int> truths(test_shots.size());
        for (std::size_t idx = 0; idx < test_shots.size(); ++idx) {
            const int truth = ds.shots[test_shots[idx]].truth.qubits[q].initial;
            truths[idx] = truth;
            e.confusion[truth][mlp_pred[q][idx]] += 1;
            lda_conf[truth][lda_pred[q][idx]] += 1;
            qda_conf[truth][qda_pred[q][idx]] += 1;
            qmf_conf[truth][qmf_pred[q][idx]] += 1;
        }
        e.fidelity = fidelity(e.confusion);
        e.lda_fidelity = fidelity(lda_conf);
        e.qda_fidelity = fidelity(qda_conf);
        e.qmf_fidelity = fidelity(qmf_conf);
        const auto [precision, recall] = leakage_metrics(mlp_pred[q], truths);
        e.leak_precision = precision;
        e.leak_recall = recall;

        if (labeling.cluster) {
            // cluster quality over the whole dataset, against ground truth
            std::vector<int> assigned(ds.shots.size()), leaked(ds.shots.size());
            for (std::size_t j = 0; j < ds.shots.size(); ++j) {
                assigned[j] = labeling.labels[j][q];
                leaked[j] = ds.shots[j].truth.qubits[q].leaked() ? 2 : 0;
            }
            const auto [purity, cluster_recall] = leakage_metrics(assigned, leaked);
            e.cluster_purity = purity;
            e.cluster_recall = cluster_recall;
        }

        fids.push_back(e.fidelity);
        lda_fids.push_back(e.lda_fidelity);
        qda_fids.push_back(e.qda_fidelity);
        qmf_fids.push_back(e.qmf_fidelity);
    }
    report.f_nq = geomean_fidelity(fids);
    report.f_nq_lda = geomean_fidelity(lda_fids);
    report.f_nq_qda = geomean_fidelity(qda_fids);
    report.f_nq_qmf = geomean_fidelity(qmf_fids);

    report.sweep = duration_sweep(ds, bank, bundle.mlps, cfg.sweep, cfg.threads);
    report.scaling = scaling_report({1, 2, 3, 5, 10}, {2, 3});

    if (!cfg.exclude_qubits.empty()) {
        report.excluded_qubits = cfg.exclude_qubits;
        double sum = 0.0;
        int used = 0;
        for (int q = 0; q < n_qubits; ++q) {
            if (std::find(cfg.exclude_qubits.begin(), cfg.exclude_qubits.end(), q) !=
                cfg.exclude_qubits.end()) {
                continue;
            }
            sum += report.qubits[q].fidelity;
            ++used;
        }
        if (used == 0) throw ConfigError("exclude_qubits removes every qubit");
        report.error_excluding = 1.0 - sum / used;
    }
    return report;
}

}  // namespace

std::string run_simulate(const RunConfig& cfg) {
    cfg.device.validate();
    fs::create_directories(cfg.out_dir);
    const auto states = cfg.resolve_states();
    const auto t0 = std::chrono::steady_clock::now();
    TraceDataset ds = generate_dataset(cfg.device, states, cfg.shots_per_state, cfg.threads);
    const std::string path = (fs::path(cfg.out_dir) / "dataset.qrt").string();
    write_dataset(ds, path);
    const std::string hash = crc_hex(crc32_file(path));
    std::printf("simulate: %zu shots (%zu states x %d), %.1f s\n", ds.shots.size(), states.size(),
                cfg.shots_per_state, stage_seconds(t0));
    std::printf("simulate: wrote %s crc32 %s\n", path.c_str(), hash.c_str());
    return path;
}

PipelineResult run_pipeline(const RunConfig& cfg) {
    cfg.device.validate();
    fs::create_directories(cfg.out_dir);
    const fs::path out_dir(cfg.out_dir);
    write_text((out_dir / "status.json").string(), Json{{"complete", false}}.dump() + "\n");

    PipelineResult result;

    // dataset
    TraceDataset ds = run_stage("simulate", [&]() {
        if (!cfg.dataset_path.empty()) {
            result.dataset_path = cfg.dataset_path;
            std::printf("pipeline: loading dataset %s\n", cfg.dataset_path.c_str());
            return read_dataset(cfg.dataset_path);
        }
        result.dataset_path = run_simulate(cfg);
        return read_dataset(result.dataset_path);
    });
    const std::string dataset_id = crc_hex(crc32_file(result.dataset_path));

    auto t0 = std::chrono::steady_clock::now();
    const auto mtvs = run_stage("demodulate", [&]() { return compute_mtvs(ds, cfg.threads); });
    std::printf("pipeline: demodulated MTVs in %.1f s\n", stage_seconds(t0));

    t0 = std::chrono::steady_clock::now();
    const Labeling labeling = run_stage("cluster", [&]() {
        return cfg.labels == LabelSource::Cluster
                   ? label_by_cluster(ds, mtvs, cfg.cluster, cfg.seed, cfg.threads)
                   : label_by_truth(ds, mtvs);
    });
    std::printf("pipeline: labels (%s) in %.1f s\n",
                cfg.labels == LabelSource::Cluster ? "cluster" : "truth", stage_seconds(t0));

    t0 = std::chrono::steady_clock::now();
    const auto tags = run_stage("tag-errors", [&]() {
        return tag_error_traces(ds, labeling.labels, labeling.centroids, cfg.threads);
    });

    const MatchedFilterBank bank = run_stage("build-bank", [&]() {
        BankOptions opts;
        opts.min_error_traces = cfg.min_error_traces;
        opts.source_dataset_id = dataset_id;
        opts.include.assign(ds.shots.size(), false);
        for (std::size_t j = 0; j < ds.shots.size(); ++j) {
            opts.include[j] = ds.split[j] == Split::Train;
        }
        return build_filter_bank(ds, labeling.labels, tags, opts, cfg.threads);
    });
    result.bank_path = (out_dir / "bank.json").string();
    write_bank(bank, result.bank_path);
    std::printf("pipeline: filter bank (P=%d) in %.1f s\n", bank.feature_dim(), stage_seconds(t0));

    t0 = std::chrono::steady_clock::now();
    const auto features =
        run_stage("features", [&]() { return compute_features(ds, bank, cfg.threads); });
    std::printf("pipeline: features in %.1f s\n", stage_seconds(t0));

    // per-qubit training, parallel across qubits
    t0 = std::chrono::steady_clock::now();
    const int n_qubits = ds.device.num_qubits();
    ModelBundle bundle;
    bundle.n_qubits = n_qubits;
    bundle.n_samples = bank.kernel_length;
    bundle.seed = cfg.seed;
    bundle.labels = cfg.labels;
    bundle.train = cfg.train;
    bundle.bank_path = "bank.json";
    bundle.bank_crc32 = crc_hex(crc32_file(result.bank_path));
    bundle.cluster = labeling.cluster;
    bundle.cluster_params = cfg.cluster;
    bundle.mlps.resize(n_qubits);
    bundle.lda.resize(n_qubits);
    bundle.qda.resize(n_qubits);
    bundle.qmf_thresholds.resize(n_qubits);
    std::vector<QmfBaseline> qmf(n_qubits);

    run_stage("train", [&]() {
        const int dim = bank.feature_dim();
        std::vector<double> x_train, x_val;
        std::vector<std::size_t> train_rows, val_rows;
        for (std::size_t j = 0; j < ds.shots.size(); ++j) {
            if (ds.split[j] == Split::Train) {
                train_rows.push_back(j);
                x_train.insert(x_train.end(), features[j].begin(), features[j].end());
            } else if (ds.split[j] == Split::Val) {
                val_rows.push_back(j);
                x_val.insert(x_val.end(), features[j].begin(), features[j].end());
            }
        }
        parallel_for(n_qubits, cfg.threads, [&](std::size_t q) {
            std::vector<int> y_train(train_rows.size()), y_val(val_rows.size());
            for (std::size_t i = 0; i < train_rows.size(); ++i) {
                y_train[i] = labeling.labels[train_rows[i]][q];
            }
            for (std::size_t i = 0; i < val_rows.size(); ++i) {
                y_val[i] = labeling.labels[val_rows[i]][q];
            }
            TrainResult tr = train_mlp(x_train, y_train, x_val, y_val, dim, 3, cfg.train,
                                       static_cast<int>(q));
            bundle.mlps[q] = std::move(tr.model);

            std::vector<std::array<double, 2>> points(train_rows.size());
            for (std::size_t i = 0; i < train_rows.size(); ++i) {
                const Complex& m = mtvs[q][train_rows[i]];
                points[i] = {m.real(), m.imag()};
            }
            bundle.lda[q] = train_discriminant(DiscriminantKind::Lda, points, y_train, 3,
                                               static_cast<int>(q));
            bundle.qda[q] = train_discriminant(DiscriminantKind::Qda, points, y_train, 3,
                                               static_cast<int>(q));
            qmf[q] = fit_qmf_baseline(features, labeling.labels, ds.split, static_cast<int>(q));
            bundle.qmf_thresholds[q] = qmf[q].theta;
        });
        return 0;
    });
    std::printf("pipeline: trained %d qubit models in %.1f s\n", n_qubits, stage_seconds(t0));

    result.bundle_path = (out_dir / "bundle.json").string();
    write_bundle(bundle, result.bundle_path);

    t0 = std::chrono::steady_clock::now();
    result.report = run_stage("evaluate", [&]() {
        return evaluate(ds, mtvs, features, labeling, bank, bundle, qmf, cfg);
    });
    std::printf("pipeline: evaluation + sweep in %.1f s\n", stage_seconds(t0));

    Json extra;
    extra["config"] = run_config_to_json(cfg);
    extra["dataset"] = Json{{"path", fs::path(result.dataset_path).filename().string()},
                            {"crc32", dataset_id},
                            {"shots", ds.shots.size()}};
    extra["bank"] = Json{{"path", "bank.json"}, {"crc32", bundle.bank_crc32}};
    extra["label_source"] = cfg.labels == LabelSource::Cluster ? "cluster" : "truth";
    write_report_files(out_dir, result.report, extra);
    result.report_path = (out_dir / "report.json").string();

    write_text((out_dir / "status.json").string(), Json{{"complete", true}}.dump() + "\n");

    std::printf("pipeline: F_nQ %.4f (LDA %.4f, QDA %.4f, QMF %.4f)\n", result.report.f_nq,
                result.report.f_nq_lda, result.report.f_nq_qda, result.report.f_nq_qmf);
    return result;
}

namespace {

MatchedFilterBank load_bundle_bank(const std::string& bundle_path, const ModelBundle& bundle) {
    const fs::path bank_path = fs::path(bundle_path).parent_path() / bundle.bank_path;
    const std::string hash = crc_hex(crc32_file(bank_path.string()));
    if (hash != bundle.bank_crc32) {
        throw DataError("bank file hash " + hash + " does not match bundle record " +
                        bundle.bank_crc32);
    }
    return read_bank(bank_path.string());
}

void check_compat(const ModelBundle& bundle, const TraceDataset& ds, int n_keep) {
    if (bundle.n_qubits != ds.device.num_qubits()) {
        throw DataError("qubit count mismatch: bundle has " + std::to_string(bundle.n_qubits) +
                        ", dataset has " + std::to_string(ds.device.num_qubits()));
    }
    if (n_keep > bundle.n_samples || n_keep > ds.device.num_samples()) {
        throw DataError("kernel length too short: n_keep " + std::to_string(n_keep) +
                        " exceeds kernel length " + std::to_string(bundle.n_samples) +
                        " or trace length " + std::to_string(ds.device.num_samples()));
    }
}

}  // namespace

void run_classify(const std::string& bundle_path, const std::string& dataset_path, int n_keep,
                  const std::string& out_csv, int threads) {
    const ModelBundle bundle = read_bundle(bundle_path);
    const TraceDataset ds = read_dataset(dataset_path);
    if (n_keep <= 0) n_keep = bundle.n_samples;
    check_compat(bundle, ds, n_keep);
    const MatchedFilterBank bank = truncate_bank(load_bundle_bank(bundle_path, bundle), n_keep);
    for (const auto& m : bundle.mlps) {
        if (m.layers[0] != bank.feature_dim()) {
            throw DataError("feature dimension mismatch between bundle and bank");
        }
    }

    const CarrierTable carriers(ds.device);
    const int n_qubits = ds.device.num_qubits();
    std::vector<std::string> lines(ds.shots.size());
    parallel_for(ds.shots.size(), threads, [&](std::size_t j) {
        const FeatureVector features = apply_bank(bank, ds.shots[j], carriers, n_keep);
        std::string line = std::to_string(j);
        for (int q = 0; q < n_qubits; ++q) {
            const InferResult r = infer(bundle.mlps[q], features);
            line += "," + std::to_string(r.label);
            for (const double p : r.probs) line += "," + format_double(p);
        }
        lines[j] = std::move(line);
    });

    std::string csv = "shot";
    for (int q = 0; q < n_qubits; ++q) {
        csv += ",q" + std::to_string(q) + "_label";
        for (int c = 0; c < 3; ++c) {
            csv += ",q" + std::to_string(q) + "_p" + std::to_string(c);
        }
    }
    csv += "\n";
    for (const auto& line : lines) {
        csv += line;
        csv += "\n";
    }
    write_text(out_csv, csv);
    std::printf("classify: wrote %zu rows to %s\n", ds.shots.size(), out_csv.c_str());
}

std::vector<SweepRow> run_sweep(const std::string& bundle_path, const std::string& dataset_path,
                                const std::vector<int>& n_keep_list, const std::string& out_csv,
                                int threads) {
    const ModelBundle bundle = read_bundle(bundle_path);
    const TraceDataset ds = read_dataset(dataset_path);
    if (n_keep_list.empty()) throw ConfigError("sweep list is empty");
    check_compat(bundle, ds, n_keep_list.back());
    const MatchedFilterBank bank = load_bundle_bank(bundle_path, bundle);

    const auto rows = duration_sweep(ds, bank, bundle.mlps, n_keep_list, threads);
    std::string csv = "n_keep,mean_fidelity";
    for (int q = 0; q < ds.device.num_qubits(); ++q) csv += ",fidelity_q" + std::to_string(q);
    csv += "\n";
    for (const auto& row : rows) {
        csv += std::to_string(row.n_keep) + "," + format_double(row.mean_fidelity);
        for (const double f : row.per_qubit) csv += "," + format_double(f);
        csv += "\n";
    }
    write_text(out_csv, csv);
    for (const auto& row : rows) {
        std::printf("sweep: n_keep %d mean fidelity %.4f\n", row.n_keep, row.mean_fidelity);
    }
    return rows;
}

EvalReport run_report(const std::string& bundle_path, const std::string& dataset_path,
                      const RunConfig& cfg) {
    const ModelBundle bundle = read_bundle(bundle_path);
    TraceDataset ds = read_dataset(dataset_path);
    check_compat(bundle, ds, bundle.n_samples);
    const MatchedFilterBank bank = load_bundle_bank(bundle_path, bundle);

    const auto mtvs = compute_mtvs(ds, cfg.threads);
    Labeling labeling;
    if (bundle.labels == LabelSource::Cluster) {
        labeling = label_by_cluster(ds, mtvs, bundle.cluster_params, bundle.seed, cfg.threads);
    } else {
        labeling = label_by_truth(ds, mtvs);
    }
    const auto features = compute_features(ds, bank, cfg.threads);

    std::vector<QmfBaseline> qmf(bundle.n_qubits);
    for (int q = 0; q < bundle.n_qubits; ++q) {
        qmf[q] = fit_qmf_baseline(features, labeling.labels, ds.split, q);
    }

    RunConfig eval_cfg = cfg;
    eval_cfg.labels = bundle.labels;
    EvalReport report = evaluate(ds, mtvs, features, labeling, bank, bundle, qmf, eval_cfg);

    fs::create_directories(cfg.out_dir);
    Json extra;
    extra["dataset"] = Json{{"path", fs::path(dataset_path).filename().string()},
                            {"crc32", crc_hex(crc32_file(dataset_path))},
                            {"shots", ds.shots.size()}};
    extra["bank"] = Json{{"path", bundle.bank_path}, {"crc32", bundle.bank_crc32}};
    extra["label_source"] = bundle.labels == LabelSource::Cluster ? "cluster" : "truth";
    write_report_files(cfg.out_dir, report, extra);
    std::printf("report: F_nQ %.4f\n", report.f_nq);
    return report;
}

}  // namespace qrd
