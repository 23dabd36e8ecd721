#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphacast/agents.hpp"
#include "alphacast/backend.hpp"
#include "alphacast/baselines.hpp"
#include "alphacast/errors.hpp"
#include "alphacast/eval.hpp"
#include "alphacast/hash.hpp"

namespace alphacast {

/// The complete run description. Everything that influences outputs lives
/// here so the serialized form's hash can fingerprint libraries and reports.
struct RunConfig {
    std::string manifest_path;
    std::string profile = "short"; // short (168,24) | long (96,96) | custom
    int custom_lookback = 0;
    int custom_horizon = 0;
    std::vector<ForecastModelSpec> pool; // empty means the default pool
    std::optional<std::size_t> k;        // absent means the automatic policy
    std::uint64_t seed = 1;
    std::string generator = "stub:echo-auxiliary";
    std::string reflector = "stub:always-accept";
    RemoteBackendConfig remote; // shared by any remote:* backend spec
    std::vector<std::string> ablation_flags;
    int stride = 0; // 0 -> horizon length
    std::string out_dir = "out";
    int max_iterations = 3;
    std::string selection = "static-all";
    std::string corpus_dir;
    std::size_t retrieval_top_n = 16;
    bool znormalize = false;
    int jobs = 0;
};

inline std::pair<int, int> resolve_profile(const RunConfig& cfg) {
    if (cfg.profile == "short") return {168, 24};
    if (cfg.profile == "long") return {96, 96};
    if (cfg.profile == "custom") {
        if (cfg.custom_lookback < 1 || cfg.custom_horizon < 1)
            throw Error(ErrorKind::invalid_argument,
                        "custom profile needs positive lookback and horizon");
        return {cfg.custom_lookback, cfg.custom_horizon};
    }
    throw Error(ErrorKind::invalid_argument, "unknown task profile '" + cfg.profile + "'");
}

inline nlohmann::json pool_to_json(const std::vector<ForecastModelSpec>& pool) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& spec : pool) {
        nlohmann::json row;
        row["model"] = std::string(model_name(spec.id));
        for (const auto& [key, val] : spec.hyperparameters) row[key] = val;
        arr.push_back(std::move(row));
    }
    return arr;
}

inline std::vector<ForecastModelSpec> pool_from_json(const nlohmann::json& arr) {
    std::vector<ForecastModelSpec> pool;
    for (const auto& row : arr) {
        ForecastModelSpec spec;
        const std::string name = row.at("model").get<std::string>();
        const auto id = model_from_name(name);
        if (!id) throw Error(ErrorKind::parse_error, "unknown pool model '" + name + "'");
        spec.id = *id;
        for (const auto& [key, val] : row.items())
            if (key != "model") spec.hyperparameters[key] = val.get<double>();
        pool.push_back(std::move(spec));
    }
    return pool;
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["manifest"] = cfg.manifest_path;
    j["profile"] = cfg.profile;
    if (cfg.profile == "custom") {
        j["lookback"] = cfg.custom_lookback;
        j["horizon"] = cfg.custom_horizon;
    }
    j["pool"] = cfg.pool.empty() ? nlohmann::json("default") : pool_to_json(cfg.pool);
    j["k"] = cfg.k ? nlohmann::json(*cfg.k) : nlohmann::json("auto");
    j["seed"] = cfg.seed;
    j["generator"] = cfg.generator;
    j["reflector"] = cfg.reflector;
    if (cfg.generator.rfind("remote:", 0) == 0 || cfg.reflector.rfind("remote:", 0) == 0) {
        j["remote"] = {{"path", cfg.remote.path},
                       {"model", cfg.remote.model},
                       {"token_env", cfg.remote.token_env},
                       {"timeout_seconds", cfg.remote.timeout_seconds},
                       {"retry_budget", cfg.remote.retry_budget},
                       {"max_in_flight", cfg.remote.max_in_flight},
                       {"temperature", cfg.remote.temperature}};
    }
    j["ablation_flags"] = cfg.ablation_flags;
    j["stride"] = cfg.stride;
    j["out_dir"] = cfg.out_dir;
    j["max_iterations"] = cfg.max_iterations;
    j["selection"] = cfg.selection;
    j["corpus_dir"] = cfg.corpus_dir;
    j["retrieval_top_n"] = cfg.retrieval_top_n;
    j["znormalize"] = cfg.znormalize;
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    try {
        cfg.manifest_path = j.at("manifest").get<std::string>();
        if (j.contains("profile")) cfg.profile = j.at("profile").get<std::string>();
        if (cfg.profile == "custom") {
            cfg.custom_lookback = j.at("lookback").get<int>();
            cfg.custom_horizon = j.at("horizon").get<int>();
        }
        if (j.contains("pool") && j.at("pool").is_array())
            cfg.pool = pool_from_json(j.at("pool"));
        if (j.contains("k") && j.at("k").is_number_integer()) {
            const auto v = j.at("k").get<std::int64_t>();
            if (v < 1)
                throw Error(ErrorKind::parse_error, "run config: k must be a positive integer");
            cfg.k = static_cast<std::size_t>(v);
        }
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("generator")) cfg.generator = j.at("generator").get<std::string>();
        if (j.contains("reflector")) cfg.reflector = j.at("reflector").get<std::string>();
        if (j.contains("remote")) {
            const auto& r = j.at("remote");
            if (r.contains("path")) cfg.remote.path = r.at("path").get<std::string>();
            if (r.contains("model")) cfg.remote.model = r.at("model").get<std::string>();
            if (r.contains("token_env")) cfg.remote.token_env = r.at("token_env").get<std::string>();
            if (r.contains("timeout_seconds"))
                cfg.remote.timeout_seconds = r.at("timeout_seconds").get<int>();
            if (r.contains("retry_budget")) cfg.remote.retry_budget = r.at("retry_budget").get<int>();
            if (r.contains("max_in_flight"))
                cfg.remote.max_in_flight = r.at("max_in_flight").get<int>();
            if (r.contains("temperature")) cfg.remote.temperature = r.at("temperature").get<double>();
        }
        if (j.contains("ablation_flags"))
            cfg.ablation_flags = j.at("ablation_flags").get<std::vector<std::string>>();
        if (j.contains("stride")) cfg.stride = j.at("stride").get<int>();
        if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("max_iterations")) cfg.max_iterations = j.at("max_iterations").get<int>();
        if (j.contains("selection")) cfg.selection = j.at("selection").get<std::string>();
        if (j.contains("corpus_dir")) cfg.corpus_dir = j.at("corpus_dir").get<std::string>();
        if (j.contains("retrieval_top_n"))
            cfg.retrieval_top_n = j.at("retrieval_top_n").get<std::size_t>();
        if (j.contains("znormalize")) cfg.znormalize = j.at("znormalize").get<bool>();
        if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse_error, std::string("run config: ") + e.what());
    }
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io_error, "cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse_error, path.string() + ": " + e.what());
    }
    RunConfig cfg = run_config_from_json(j);
    std::filesystem::path mp(cfg.manifest_path);
    if (mp.is_relative()) cfg.manifest_path = (path.parent_path() / mp).string();
    if (!cfg.corpus_dir.empty()) {
        std::filesystem::path cp(cfg.corpus_dir);
        if (cp.is_relative()) cfg.corpus_dir = (path.parent_path() / cp).string();
    }
    return cfg;
}

/// Hash of the canonical serialized config (keys sorted by the JSON library),
/// rendered as 16 hex characters. Embedded in library files and report names.
inline std::string config_fingerprint(const RunConfig& cfg) {
    return to_hex(hash_string(run_config_to_json(cfg).dump()));
}

inline std::vector<ForecastModelSpec> effective_pool(const RunConfig& cfg) {
    return cfg.pool.empty() ? default_pool() : cfg.pool;
}

/// Derives the per-session agent configuration from the run config.
inline SessionConfig session_config_from(const RunConfig& cfg) {
    SessionConfig sc;
    sc.max_iterations = cfg.max_iterations;
    const auto policy = selection_policy_from_name(cfg.selection);
    if (!policy)
        throw Error(ErrorKind::invalid_argument, "unknown selection policy '" + cfg.selection + "'");
    sc.selection = *policy;
    sc.retrieval.top_n = cfg.retrieval_top_n;
    for (const auto& flag : cfg.ablation_flags) apply_ablation_flag(sc, flag);
    return sc;
}

namespace detail {

inline std::vector<std::string> read_scripted_replies(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io_error, "cannot open script " + path.string());
    std::vector<std::string> replies;
    std::string cur, line;
    while (std::getline(in, line)) {
        if (line == "---") {
            replies.push_back(cur);
            cur.clear();
        } else {
            cur += line;
            cur += '\n';
        }
    }
    if (!cur.empty()) replies.push_back(cur);
    return replies;
}

} // namespace detail

/// Backend factory for the command-line spec grammar:
///   stub:echo-auxiliary | stub:always-accept | stub:always-revise |
///   stub:failing | stub:scripted:<file> | stub:scripted-reflector:<n> |
///   remote:<base_url>
inline BackendPtr make_backend(const std::string& spec, const RemoteBackendConfig& remote_base) {
    if (spec == "stub:echo-auxiliary") return std::make_shared<EchoAuxiliaryBackend>();
    if (spec == "stub:always-accept") return std::make_shared<AlwaysAcceptBackend>();
    if (spec == "stub:always-revise") return std::make_shared<AlwaysReviseBackend>();
    if (spec == "stub:failing") return std::make_shared<FailingBackend>();
    if (spec.rfind("stub:scripted-reflector:", 0) == 0) {
        const std::string arg = spec.substr(24);
        try {
            return std::make_shared<ScriptedReflectorBackend>(std::stoul(arg));
        } catch (const std::exception&) {
            throw Error(ErrorKind::invalid_argument,
                        "bad reject count in backend spec '" + spec + "'");
        }
    }
    if (spec.rfind("stub:scripted:", 0) == 0)
        return std::make_shared<ScriptedBackend>(detail::read_scripted_replies(spec.substr(14)));
    if (spec.rfind("remote:", 0) == 0) {
        RemoteBackendConfig cfg = remote_base;
        cfg.base_url = spec.substr(7);
        if (cfg.base_url.empty())
            throw Error(ErrorKind::invalid_argument, "remote backend spec needs a base URL");
        return std::make_shared<RemoteBackend>(cfg);
    }
    throw Error(ErrorKind::invalid_argument, "unknown backend spec '" + spec + "'");
}

} // namespace alphacast
