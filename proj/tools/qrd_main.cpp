#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrd/errors.hpp"
#include "qrd/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = -1;
    std::string labels;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON run configuration");
    cmd->add_option("--out", flags.out, "output directory (overrides config)");
    cmd->add_option("--seed", flags.seed, "root seed (overrides config)")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--threads", flags.threads, "worker thread cap, 0 = hardware");
    cmd->add_option("--labels", flags.labels, "training label source: cluster | truth")
        ->check(CLI::IsMember({"cluster", "truth"}));
}

qrd::RunConfig resolve_config(const CommonFlags& flags) {
    qrd::Json j;
    if (!flags.config_path.empty()) {
        std::ifstream in(flags.config_path);
        if (!in) throw qrd::ConfigError("cannot open config " + flags.config_path);
        try {
            j = qrd::Json::parse(in);
        } catch (const qrd::Json::exception& e) {
            throw qrd::ConfigError(std::string("bad config JSON: ") + e.what());
        }
    }
    // flag overrides take precedence over config fields
    if (flags.seed_set) j["seed"] = flags.seed;
    if (!flags.out.empty()) j["out"] = flags.out;
    if (flags.threads >= 0) j["threads"] = flags.threads;
    if (!flags.labels.empty()) j["labels"] = flags.labels;
    return qrd::run_config_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qutrit readout discrimination toolkit"};
    app.require_subcommand(1);

    CommonFlags sim_flags, pipe_flags, report_flags;
    std::string bundle_path, dataset_path, out_csv;
    int n_keep = 0;
    std::vector<int> sweep_list;
    int tool_threads = 0;

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic readout dataset");
    add_common(simulate, sim_flags);

    auto* pipeline = app.add_subcommand(
        "pipeline", "simulate (or load), cluster, build filters, train, evaluate");
    add_common(pipeline, pipe_flags);

    auto* classify = app.add_subcommand("classify", "label every shot of a dataset");
    classify->add_option("--bundle", bundle_path, "model bundle JSON")->required();
    classify->add_option("--dataset", dataset_path, "dataset file")->required();
    classify->add_option("--out", out_csv, "output CSV path")->required();
    classify->add_option("--n-keep", n_keep, "samples to keep (default: full length)");
    classify->add_option("--threads", tool_threads, "worker thread cap, 0 = hardware");

    auto* sweep = app.add_subcommand("sweep", "readout-duration sweep of a trained bundle");
    sweep->add_option("--bundle", bundle_path, "model bundle JSON")->required();
    sweep->add_option("--dataset", dataset_path, "dataset file")->required();
    sweep->add_option("--out", out_csv, "output CSV path")->required();
    sweep->add_option("--n-keep", sweep_list, "ascending n_keep list")->required();
    sweep->add_option("--threads", tool_threads, "worker thread cap, 0 = hardware");

    auto* report = app.add_subcommand("report", "re-evaluate a trained bundle on a dataset");
    report->add_option("--bundle", bundle_path, "model bundle JSON")->required();
    report->add_option("--dataset", dataset_path, "dataset file")->required();
    add_common(report, report_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) {
            qrd::run_simulate(resolve_config(sim_flags));
        } else if (pipeline->parsed()) {
            qrd::run_pipeline(resolve_config(pipe_flags));
        } else if (classify->parsed()) {
            qrd::run_classify(bundle_path, dataset_path, n_keep, out_csv, tool_threads);
        } else if (sweep->parsed()) {
            qrd::run_sweep(bundle_path, dataset_path, sweep_list, out_csv, tool_threads);
        } else if (report->parsed()) {
            qrd::run_report(bundle_path, dataset_path, resolve_config(report_flags));
        }
    } catch (const qrd::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const qrd::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 4;
    } catch (const qrd::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
