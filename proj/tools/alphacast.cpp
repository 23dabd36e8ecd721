#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alphacast/alphacast.hpp"

namespace fs = std::filesystem;
using namespace alphacast;

namespace {

struct LoadedRun {
    RunConfig config;
    Dataset dataset;
    std::vector<ForecastModelSpec> pool;
    EvalProfile profile;
    KnowledgeStore store;
    std::string fingerprint;
};

LoadedRun load_run(const std::string& config_path) {
    LoadedRun run;
    run.config = load_run_config(config_path);
    run.dataset = load_dataset(load_manifest(run.config.manifest_path));
    run.pool = effective_pool(run.config);
    const auto [H, L] = resolve_profile(run.config);
    run.profile = {H, L, season_period(run.dataset.frequency), run.config.stride};
    if (!run.config.corpus_dir.empty()) run.store = load_corpus(run.config.corpus_dir);
    run.fingerprint = config_fingerprint(run.config);
    return run;
}

fs::path library_path(const LoadedRun& run) {
    return fs::path(run.config.out_dir) /
           (run.dataset.profile.dataset_name + "_" + run.fingerprint + ".aclb");
}

CaseLibrary obtain_library(const LoadedRun& run, bool force, bool* reused = nullptr) {
    const fs::path path = library_path(run);
    if (!force && fs::exists(path)) {
        try {
            CaseLibrary lib = load_library(path);
            check_library_fresh(lib, run.dataset, run.pool);
            if (reused != nullptr) *reused = true;
            return lib;
        } catch (const Error& e) {
            std::cerr << "cached library unusable (" << e.what() << "); rebuilding\n";
        }
    }
    LibraryBuildConfig cfg;
    cfg.lookback_len = run.profile.lookback_len;
    cfg.horizon_len = run.profile.horizon_len;
    cfg.period = run.profile.period;
    cfg.pool = run.pool;
    cfg.seed = run.config.seed;
    cfg.k_override = run.config.k;
    cfg.znormalize = run.config.znormalize;
    CaseLibrary lib = build_case_library(run.dataset, cfg);
    for (const auto& w : lib.warnings) std::cerr << "warning: " << w << "\n";
    fs::create_directories(path.parent_path());
    save_library(lib, path);
    if (reused != nullptr) *reused = false;
    return lib;
}

int cmd_inspect(const std::string& manifest_path) {
    const Dataset ds = load_dataset(load_manifest(manifest_path));
    std::cout << describe_dataset(ds);
    return 0;
}

int cmd_build(const std::string& config_path, bool force) {
    const LoadedRun run = load_run(config_path);
    bool reused = false;
    obtain_library(run, force, &reused);
    std::cout << (reused ? "reused cached library " : "built library ")
              << library_path(run).string() << "\n";
    return 0;
}

int cmd_forecast(const std::string& config_path, long long anchor_arg) {
    const LoadedRun run = load_run(config_path);
    const CaseLibrary lib = obtain_library(run, false);

    std::size_t anchor;
    if (anchor_arg >= 0) {
        anchor = static_cast<std::size_t>(anchor_arg);
    } else {
        // Default: the first evaluation window of the test split.
        anchor = run.dataset.splits.test.begin + static_cast<std::size_t>(run.profile.lookback_len) - 1;
    }
    ForecastTask task{run.profile.lookback_len, run.profile.horizon_len, anchor,
                      "Forecast the next " + std::to_string(run.profile.horizon_len) +
                          " values of " + run.dataset.endogenous.name + "."};

    SessionConfig sc = session_config_from(run.config);
    const BackendPtr generator = make_backend(run.config.generator, run.config.remote);
    const BackendPtr reflector = make_backend(run.config.reflector, run.config.remote);
    const ForecastSession session =
        run_session(task, run.dataset, &lib, run.store, generator, reflector, sc);

    std::cout << "forecast:\n";
    for (double v : session.final_forecast) std::cout << "  " << fmt17(v) << "\n";
    if (!session.final_explanation.empty())
        std::cout << "explanation: " << session.final_explanation << "\n";
    for (const auto& w : session.warnings) std::cerr << "warning: " << w << "\n";

    fs::create_directories(run.config.out_dir);
    const fs::path log_path = fs::path(run.config.out_dir) /
                              (run.dataset.profile.dataset_name + "_session_" +
                               std::to_string(anchor) + "_" + run.fingerprint + ".json");
    std::ofstream log(log_path);
    log << session_to_json(session).dump(2) << "\n";
    std::cout << "session log: " << log_path.string() << "\n";
    return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& method) {
    const LoadedRun run = load_run(config_path);

    MethodRunner runner;
    std::unique_ptr<CaseLibrary> lib;
    if (method == "alphacast" || method == "auxiliary") {
        lib = std::make_unique<CaseLibrary>(obtain_library(run, false));
    }
    if (method == "alphacast") {
        SessionConfig sc = session_config_from(run.config);
        const BackendPtr generator = make_backend(run.config.generator, run.config.remote);
        const BackendPtr reflector = make_backend(run.config.reflector, run.config.remote);
        runner = make_session_runner(run.dataset, lib.get(), run.store, generator, reflector, sc);
    } else if (method == "auxiliary") {
        RetrievalConfig rc;
        rc.top_n = run.config.retrieval_top_n;
        runner = make_auxiliary_runner(*lib, rc);
    } else if (const auto id = model_from_name(method)) {
        runner = make_baseline_runner({*id, {}}, run.profile.period);
    } else {
        std::cerr << "unknown method '" << method << "'; expected alphacast, auxiliary, or one of:";
        for (const auto& name : kModelNames) std::cerr << " " << name;
        std::cerr << "\n";
        return 2;
    }

    const EvalReport report = evaluate_method(run.dataset, run.profile, method, runner,
                                              run.fingerprint, run.config.ablation_flags);
    const auto [summary_path, csv_path] = write_report(report, run.config.out_dir);
    std::cout << "mse: " << fmt17(report.mse_value) << "\n";
    std::cout << "mae: " << fmt17(report.mae_value) << "\n";
    std::cout << "windows: " << report.records.size() << "\n";
    std::cout << "summary: " << summary_path.string() << "\n";
    std::cout << "windows file: " << csv_path.string() << "\n";
    if (report.partial) {
        std::cerr << "partial report: at least one window failed\n";
        return 1;
    }
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& flags_arg) {
    const LoadedRun run = load_run(config_path);
    const CaseLibrary lib = obtain_library(run, false);

    std::vector<std::string> flags;
    if (flags_arg == "all") {
        flags = known_ablation_flags();
    } else {
        std::string cur;
        for (char c : flags_arg + ",") {
            if (c == ',') {
                if (!cur.empty()) flags.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
    }

    const SessionConfig base = session_config_from(run.config);
    const BackendPtr generator = make_backend(run.config.generator, run.config.remote);
    const BackendPtr reflector = make_backend(run.config.reflector, run.config.remote);
    const auto outcomes = run_ablation_matrix(run.dataset, run.profile, base, flags, &lib,
                                              run.store, generator, reflector, run.fingerprint);

    bool any_partial = false;
    std::vector<ForecastSession> all_sessions;
    for (const auto& cell : outcomes) {
        write_report(cell.report, run.config.out_dir);
        any_partial = any_partial || cell.report.partial;
        if (cell.label == "full")
            for (const auto& s : cell.sessions) all_sessions.push_back(s);
    }

    const std::string table = render_comparison(outcomes);
    std::cout << table;
    fs::create_directories(run.config.out_dir);
    const fs::path table_path =
        fs::path(run.config.out_dir) /
        (run.dataset.profile.dataset_name + "_ablation_" + run.fingerprint + ".txt");
    std::ofstream(table_path) << table;

    const fs::path usage_path =
        fs::path(run.config.out_dir) /
        (run.dataset.profile.dataset_name + "_feature_usage_" + run.fingerprint + ".csv");
    std::ofstream(usage_path) << render_feature_usage(emit_feature_usage(all_sessions));
    std::cout << "table: " << table_path.string() << "\n";
    std::cout << "feature usage: " << usage_path.string() << "\n";
    return any_partial ? 1 : 0;
}

int cmd_synth(const std::string& shape, const std::string& out_dir, std::uint64_t seed) {
    SyntheticSpec spec = synthetic_shape(shape);
    spec.seed = seed;
    const Dataset ds = make_synthetic_dataset(spec);

    fs::create_directories(out_dir);
    const fs::path csv_path = fs::path(out_dir) / (shape + ".csv");
    write_dataset_csv(ds, csv_path);

    DatasetManifest manifest;
    manifest.data_path = csv_path.filename().string();
    manifest.timestamp_column = "date";
    manifest.endogenous_column = ds.endogenous.name;
    for (const auto& exo : ds.exogenous) manifest.exogenous_columns.push_back(exo.name);
    manifest.frequency = ds.frequency.text;
    manifest.split_sizes = {ds.splits.train.size(), ds.splits.validation.size(),
                            ds.splits.test.size()};
    manifest.profile = ds.profile;
    const fs::path manifest_path = fs::path(out_dir) / (shape + ".manifest.json");
    std::ofstream(manifest_path) << manifest_to_json(manifest).dump(2) << "\n";

    std::cout << "data: " << csv_path.string() << "\n";
    std::cout << "manifest: " << manifest_path.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive forecasting pipeline: feature extraction, case retrieval, "
                 "agent loop, evaluation"};
    app.require_subcommand(1);

    std::string manifest_path, config_path, method = "alphacast", flags_arg = "all";
    std::string shape = "periodic", synth_out = "synth";
    long long anchor = -1;
    std::uint64_t synth_seed = 7;
    bool force = false;

    auto* inspect = app.add_subcommand("inspect", "Describe a dataset");
    inspect->add_option("manifest", manifest_path, "Manifest file")->required();

    auto* build = app.add_subcommand("build", "Build (or reuse) the case library");
    build->add_option("--config", config_path, "Run config file")->required();
    build->add_flag("--force", force, "Rebuild even if a cached library matches");

    auto* forecast = app.add_subcommand("forecast", "Run one forecast session");
    forecast->add_option("--config", config_path, "Run config file")->required();
    forecast->add_option("--anchor", anchor, "Anchor index (default: first test window)");

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a method over the test split");
    evaluate->add_option("--config", config_path, "Run config file")->required();
    evaluate->add_option("--method", method, "alphacast, auxiliary, or a pool model name");

    auto* ablate = app.add_subcommand("ablate", "Run the ablation matrix");
    ablate->add_option("--config", config_path, "Run config file")->required();
    ablate->add_option("--flags", flags_arg, "Comma-separated flags, or 'all'");

    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset and manifest");
    synth->add_option("--shape", shape, "np, etth1, ettm, or periodic");
    synth->add_option("--out-dir", synth_out, "Output directory");
    synth->add_option("--seed", synth_seed, "Generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (inspect->parsed()) return cmd_inspect(manifest_path);
        if (build->parsed()) return cmd_build(config_path, force);
        if (forecast->parsed()) return cmd_forecast(config_path, anchor);
        if (evaluate->parsed()) return cmd_evaluate(config_path, method);
        if (ablate->parsed()) return cmd_ablate(config_path, flags_arg);
        if (synth->parsed()) return cmd_synth(shape, synth_out, synth_seed);
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
        if (e.kind() == ErrorKind::stale_library || e.kind() == ErrorKind::io_error)
            std::cerr << "hint: run `alphacast build --config <file>` first\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
