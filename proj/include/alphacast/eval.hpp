#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "alphacast/agents.hpp"
#include "alphacast/baselines.hpp"
#include "alphacast/caselib.hpp"
#include "alphacast/core.hpp"
#include "alphacast/errors.hpp"

namespace alphacast {

inline double mse(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw Error(ErrorKind::invalid_argument, "mse needs equal non-empty vectors");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!std::isfinite(pred[i]) || !std::isfinite(truth[i]))
            throw Error(ErrorKind::invalid_argument, "mse needs finite inputs");
        const double d = pred[i] - truth[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

inline double mae(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw Error(ErrorKind::invalid_argument, "mae needs equal non-empty vectors");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!std::isfinite(pred[i]) || !std::isfinite(truth[i]))
            throw Error(ErrorKind::invalid_argument, "mae needs finite inputs");
        s += std::abs(pred[i] - truth[i]);
    }
    return s / static_cast<double>(pred.size());
}

/// Evaluation window geometry. stride 0 means "use the horizon length", the
/// non-overlapping default.
struct EvalProfile {
    int lookback_len = 0;
    int horizon_len = 0;
    int period = 2;
    int stride = 0;

    int effective_stride() const { return stride > 0 ? stride : horizon_len; }
};

struct WindowRecord {
    std::size_t anchor = 0;
    std::vector<double> truth;
    std::vector<double> pred;
    bool failed = false;
    std::string error;
};

struct EvalReport {
    std::string dataset;
    std::string method;
    std::string fingerprint;
    EvalProfile profile;
    std::vector<WindowRecord> records;
    double mse_value = 0.0;
    double mae_value = 0.0;
    bool partial = false;
    std::vector<std::string> ablation_flags;
    double wall_seconds = 0.0; // in-memory diagnostics only, never serialized
};

/// Produces one forecast for one evaluation window.
using MethodRunner = std::function<std::vector<double>(const ForecastTask&, const TaskInputs&)>;

/// Pooled aggregates: every (window, step) error contributes equally, rather
/// than averaging per-window averages.
inline void recompute_aggregates(EvalReport& report) {
    double se = 0.0, ae = 0.0;
    std::size_t n = 0;
    for (const auto& rec : report.records) {
        if (rec.failed) continue;
        for (std::size_t j = 0; j < rec.truth.size(); ++j) {
            const double d = rec.pred[j] - rec.truth[j];
            se += d * d;
            ae += std::abs(d);
            ++n;
        }
    }
    report.mse_value = n ? se / static_cast<double>(n) : 0.0;
    report.mae_value = n ? ae / static_cast<double>(n) : 0.0;
}

/// Rolling-window evaluation over the test split. Window failures are
/// recorded per row and mark the aggregate partial instead of aborting.
inline EvalReport evaluate_method(const Dataset& dataset, const EvalProfile& profile,
                                  const std::string& method_name, const MethodRunner& runner,
                                  const std::string& fingerprint,
                                  const std::vector<std::string>& ablation_flags = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport report;
    report.dataset = dataset.profile.dataset_name;
    report.method = method_name;
    report.fingerprint = fingerprint;
    report.profile = profile;
    report.ablation_flags = ablation_flags;

    const auto windows = enumerate_windows(dataset.endogenous, dataset.splits.test,
                                           profile.lookback_len, profile.horizon_len,
                                           profile.effective_stride());
    for (const auto& w : windows) {
        WindowRecord rec;
        rec.anchor = w.anchor_index;
        rec.truth = *w.future;
        ForecastTask task{profile.lookback_len, profile.horizon_len, w.anchor_index,
                          "Forecast the next " + std::to_string(profile.horizon_len) +
                              " values of " + dataset.endogenous.name + "."};
        try {
            const TaskInputs inputs = slice_task_inputs(dataset, task);
            rec.pred = runner(task, inputs);
            if (rec.pred.size() != rec.truth.size())
                throw Error(ErrorKind::invalid_argument,
                            "method returned " + std::to_string(rec.pred.size()) +
                                " values, expected " + std::to_string(rec.truth.size()));
            for (double v : rec.pred)
                if (!std::isfinite(v))
                    throw Error(ErrorKind::invalid_argument, "method returned non-finite value");
        } catch (const Error& e) {
            rec.failed = true;
            rec.error = e.what();
            rec.pred.clear();
            report.partial = true;
        }
        report.records.push_back(std::move(rec));
    }
    recompute_aggregates(report);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

/// Window-local statistical baseline as a method.
inline MethodRunner make_baseline_runner(ForecastModelSpec spec, int period) {
    return [spec, period](const ForecastTask& task, const TaskInputs& inputs) {
        return fit_predict(spec, inputs.endo_lookback, task.horizon_len, period);
    };
}

/// Retrieval-only method: the case library's auxiliary forecast with no
/// reasoning loop on top.
inline MethodRunner make_auxiliary_runner(const CaseLibrary& library,
                                          RetrievalConfig retrieval = {}) {
    return [&library, retrieval](const ForecastTask&, const TaskInputs& inputs) {
        return retrieve(library, inputs.endo_lookback, retrieval).auxiliary_forecast;
    };
}

/// Full pipeline method. When `sessions_out` is given, every completed
/// session is appended there (feature-usage tables, prompt audits).
inline MethodRunner make_session_runner(const Dataset& dataset, const CaseLibrary* library,
                                        const KnowledgeStore& store, BackendPtr generator,
                                        BackendPtr reflector, SessionConfig cfg,
                                        std::vector<ForecastSession>* sessions_out = nullptr) {
    return [&dataset, library, &store, generator, reflector, cfg,
            sessions_out](const ForecastTask& task, const TaskInputs&) {
        ForecastSession session =
            run_session(task, dataset, library, store, generator, reflector, cfg);
        std::vector<double> forecast = session.final_forecast;
        if (sessions_out != nullptr) sessions_out->push_back(std::move(session));
        return forecast;
    };
}

// ---------------------------------------------------------------------------
// Report files: `<dataset>_<method>_<fingerprint>.summary` with structured
// key-values, and a `.windows.csv` with one row per (window, step) at full
// precision, so aggregates are recomputable from disk.
// ---------------------------------------------------------------------------

inline std::string report_basename(const EvalReport& report) {
    return report.dataset + "_" + report.method + "_" + report.fingerprint;
}

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::pair<std::filesystem::path, std::filesystem::path>
write_report(const EvalReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto summary_path = dir / (report_basename(report) + ".summary");
    const auto csv_path = dir / (report_basename(report) + ".windows.csv");

    std::ofstream summary(summary_path);
    if (!summary) throw Error(ErrorKind::io_error, "cannot write " + summary_path.string());
    std::size_t failures = 0;
    for (const auto& rec : report.records) failures += rec.failed ? 1 : 0;
    summary << "dataset: " << report.dataset << "\n";
    summary << "method: " << report.method << "\n";
    summary << "fingerprint: " << report.fingerprint << "\n";
    summary << "lookback: " << report.profile.lookback_len << "\n";
    summary << "horizon: " << report.profile.horizon_len << "\n";
    summary << "stride: " << report.profile.effective_stride() << "\n";
    summary << "windows: " << report.records.size() << "\n";
    summary << "failed_windows: " << failures << "\n";
    summary << "partial: " << (report.partial ? 1 : 0) << "\n";
    summary << "flags: ";
    if (report.ablation_flags.empty()) {
        summary << "(none)";
    } else {
        for (std::size_t i = 0; i < report.ablation_flags.size(); ++i)
            summary << (i ? "," : "") << report.ablation_flags[i];
    }
    summary << "\n";
    summary << "mse: " << fmt17(report.mse_value) << "\n";
    summary << "mae: " << fmt17(report.mae_value) << "\n";

    std::ofstream csv(csv_path);
    if (!csv) throw Error(ErrorKind::io_error, "cannot write " + csv_path.string());
    csv << "anchor,step,truth,pred\n";
    for (const auto& rec : report.records) {
        if (rec.failed) continue;
        for (std::size_t j = 0; j < rec.truth.size(); ++j)
            csv << rec.anchor << "," << j << "," << fmt17(rec.truth[j]) << ","
                << fmt17(rec.pred[j]) << "\n";
    }
    return {summary_path, csv_path};
}

inline std::map<std::string, std::string> read_summary(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto colon = line.find(": ");
        if (colon == std::string::npos) continue;
        out[line.substr(0, colon)] = line.substr(colon + 2);
    }
    return out;
}

struct WindowRow {
    std::size_t anchor = 0;
    std::size_t step = 0;
    double truth = 0.0;
    double pred = 0.0;
};

inline std::vector<WindowRow> read_windows_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
    std::vector<WindowRow> rows;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        WindowRow row;
        if (std::sscanf(line.c_str(), "%zu,%zu,%lg,%lg", &row.anchor, &row.step, &row.truth,
                        &row.pred) != 4)
            throw Error(ErrorKind::parse_error, path.string() + ": bad row '" + line + "'");
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Ablation matrix.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& known_ablation_flags() {
    static const std::vector<std::string> flags = {
        "no-features", "no-knowledge", "no-caselib",    "no-reflection",
        "no-exo",      "no-timestamps", "no-attributes", "two-stage",
    };
    return flags;
}

/// Applies one named flag to a session configuration.
inline void apply_ablation_flag(SessionConfig& cfg, const std::string& flag) {
    if (flag == "no-features") {
        cfg.mask.insert(Section::features);
    } else if (flag == "no-knowledge") {
        cfg.mask.insert(Section::knowledge);
        cfg.mask.insert(Section::context_events);
    } else if (flag == "no-caselib") {
        cfg.mask.insert(Section::auxiliary);
        cfg.mask.insert(Section::neighbor);
    } else if (flag == "no-reflection") {
        cfg.reflection_enabled = false;
    } else if (flag == "no-exo") {
        cfg.mask.insert(Section::exogenous);
    } else if (flag == "no-timestamps") {
        cfg.mask.insert(Section::timestamps);
    } else if (flag == "no-attributes") {
        cfg.mask.insert(Section::attributes);
    } else if (flag == "two-stage") {
        cfg.two_stage = true;
    } else {
        throw Error(ErrorKind::invalid_argument, "unknown ablation flag '" + flag + "'");
    }
}

struct AblationOutcome {
    std::string label; // "full" or the flag name
    EvalReport report;
    std::vector<ForecastSession> sessions;
};

/// Runs the full model plus one cell per requested flag, all under the same
/// backends, and returns the per-cell reports with their sessions retained
/// for prompt auditing.
inline std::vector<AblationOutcome> run_ablation_matrix(
    const Dataset& dataset, const EvalProfile& profile, const SessionConfig& base,
    const std::vector<std::string>& flags, const CaseLibrary* library,
    const KnowledgeStore& store, const BackendPtr& generator, const BackendPtr& reflector,
    const std::string& fingerprint) {
    std::vector<AblationOutcome> outcomes;
    auto run_cell = [&](const std::string& label, const SessionConfig& cfg,
                        const std::vector<std::string>& cell_flags) {
        AblationOutcome cell;
        cell.label = label;
        const std::string method = label == "full" ? "alphacast" : "alphacast-" + label;
        auto runner = make_session_runner(dataset, library, store, generator, reflector, cfg,
                                          &cell.sessions);
        cell.report = evaluate_method(dataset, profile, method, runner, fingerprint, cell_flags);
        outcomes.push_back(std::move(cell));
    };
    run_cell("full", base, {});
    for (const auto& flag : flags) {
        SessionConfig cfg = base;
        apply_ablation_flag(cfg, flag);
        run_cell(flag, cfg, {flag});
    }
    return outcomes;
}

/// Side-by-side text table in the ablation layout: one row per cell.
inline std::string render_comparison(const std::vector<AblationOutcome>& outcomes) {
    std::size_t width = 4;
    for (const auto& c : outcomes) width = std::max(width, c.label.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width) + 2) << "cell"
        << std::right << std::setw(16) << "MSE" << std::setw(16) << "MAE" << "\n";
    for (const auto& c : outcomes) {
        char msebuf[40], maebuf[40];
        std::snprintf(msebuf, sizeof msebuf, "%.6g", c.report.mse_value);
        std::snprintf(maebuf, sizeof maebuf, "%.6g", c.report.mae_value);
        out << std::left << std::setw(static_cast<int>(width) + 2) << c.label << std::right
            << std::setw(16) << msebuf << std::setw(16) << maebuf << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Feature usage.
// ---------------------------------------------------------------------------

struct FeatureUsage {
    std::map<std::string, double> frequency; // feature name -> [0, 1]
    std::size_t sessions = 0;
};

/// Relative selection frequency per feature: selections summed over every
/// (session, channel), divided by the number of such slots. All-pass
/// selection yields exactly 1.0 everywhere.
inline FeatureUsage emit_feature_usage(const std::vector<ForecastSession>& sessions) {
    FeatureUsage usage;
    usage.sessions = sessions.size();
    if (sessions.empty()) return usage;
    std::map<std::string, std::size_t> counts;
    std::size_t slots = 0;
    for (const auto& s : sessions) {
        slots += s.channel_count;
        for (const auto& entry : s.feature_usage) {
            const auto colon = entry.rfind(':');
            if (colon == std::string::npos) continue;
            ++counts[entry.substr(colon + 1)];
        }
    }
    for (const auto& name : kFeatureNames) {
        const auto it = counts.find(std::string(name));
        usage.frequency[std::string(name)] =
            slots == 0 ? 0.0
                       : static_cast<double>(it == counts.end() ? 0 : it->second) /
                             static_cast<double>(slots);
    }
    return usage;
}

inline std::string render_feature_usage(const FeatureUsage& usage) {
    std::ostringstream out;
    out << "feature,frequency\n";
    for (const auto& name : kFeatureNames) {
        const auto it = usage.frequency.find(std::string(name));
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.6g", it == usage.frequency.end() ? 0.0 : it->second);
        out << name << "," << buf << "\n";
    }
    return out.str();
}

} // namespace alphacast
