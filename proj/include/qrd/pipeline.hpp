#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qrd/cluster.hpp"
#include "qrd/discriminant.hpp"
#include "qrd/dsp.hpp"
#include "qrd/eval.hpp"
#include "qrd/mlp.hpp"
#include "qrd/serialize.hpp"
#include "qrd/sim.hpp"

namespace qrd {

enum class LabelSource { Cluster, Truth };

struct ClusterParams {
    int subsample = 1000;
    int restarts = 100;
};

// One seed drives everything: subsystem keys are derive_seed(seed, name) for
// names "sim", "cluster" and "train"; see README for the substream layout.
struct RunConfig {
    DeviceConfig device;
    std::string dataset_path;  // when nonempty, load instead of simulating
    int shots_per_state = 500;
    std::string state_selector = "computational";  // computational | all | explicit
    std::vector<std::vector<int>> explicit_states;
    ClusterParams cluster;
    TrainConfig train;
    std::vector<int> sweep = {100, 200, 300, 400, 500};
    std::string out_dir = "qrd-run";
    std::uint64_t seed = 0;
    LabelSource labels = LabelSource::Cluster;
    int threads = 0;
    std::vector<int> exclude_qubits;
    int min_error_traces = 20;

    std::vector<std::vector<int>> resolve_states() const;
};

RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::string& path);
Json run_config_to_json(const RunConfig& cfg);

// Everything classify/report needs, plus the trained baselines.
struct ModelBundle {
    int n_qubits = 0;
    int n_samples = 0;  // kernel length the bank was built at
    std::uint64_t seed = 0;
    LabelSource labels = LabelSource::Cluster;
    TrainConfig train;
    std::string bank_path;   // relative to the bundle file
    std::string bank_crc32;  // hex
    std::vector<MlpModel> mlps;
    std::optional<ClusterModel> cluster;
    ClusterParams cluster_params;
    std::vector<DiscriminantModel> lda;
    std::vector<DiscriminantModel> qda;
    std::vector<std::array<double, 3>> qmf_thresholds;  // theta01, theta02, theta12
};

void write_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle read_bundle(const std::string& path);

struct QubitEval {
    Confusion confusion{};
    double fidelity = 0.0;
    double leak_precision = 0.0;
    double leak_recall = 0.0;
    double lda_fidelity = 0.0;
    double qda_fidelity = 0.0;
    double qmf_fidelity = 0.0;
    double cluster_purity = -1.0;  // -1 when clustering was not run
    double cluster_recall = -1.0;
};

struct EvalReport {
    std::vector<QubitEval> qubits;
    double f_nq = 0.0;
    double f_nq_lda = 0.0;
    double f_nq_qda = 0.0;
    double f_nq_qmf = 0.0;
    std::vector<SweepRow> sweep;
    std::vector<ScalingRow> scaling;
    std::vector<int> excluded_qubits;
    double error_excluding = -1.0;  // 1 - mean fidelity over non-excluded qubits
};

struct PipelineResult {
    std::string dataset_path;
    std::string bank_path;
    std::string bundle_path;
    std::string report_path;
    EvalReport report;
};

// simulate: generate + write the dataset, print counts and the file hash.
std::string run_simulate(const RunConfig& cfg);

// pipeline: (simulate|load) -> cluster -> tag -> bank -> train -> evaluate
// -> sweep -> write everything under cfg.out_dir.
PipelineResult run_pipeline(const RunConfig& cfg);

// classify: per-shot labels and probabilities as CSV.
void run_classify(const std::string& bundle_path, const std::string& dataset_path,
                  int n_keep, const std::string& out_csv, int threads = 0);

// sweep: duration sweep of an existing bundle on a dataset.
std::vector<SweepRow> run_sweep(const std::string& bundle_path, const std::string& dataset_path,
                                const std::vector<int>& n_keep_list, const std::string& out_csv,
                                int threads = 0);

// report: re-evaluate an existing bundle on a dataset, writing report files.
EvalReport run_report(const std::string& bundle_path, const std::string& dataset_path,
                      const RunConfig& cfg);

}  // namespace qrd
