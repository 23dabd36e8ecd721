#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alphacast/baselines.hpp"
#include "alphacast/core.hpp"
#include "alphacast/errors.hpp"
#include "alphacast/kmeans.hpp"

namespace alphacast {

/// One training window paired with its best-fitting pool model: the lookback,
/// the realized future, the winning model and the full per-model MSE table
/// (pool-indexed; absent entries mean the model was unavailable there).
struct Case {
    std::uint64_t case_id = 0;
    std::vector<double> lookback;
    std::vector<double> future;
    std::uint32_t best_index = 0;
    std::vector<std::optional<double>> per_model_mse;
    std::uint32_t cluster_id = 0;

    const ForecastModelSpec& best_model(const std::vector<ForecastModelSpec>& pool) const {
        return pool[best_index];
    }
};

struct CaseLibrary {
    std::vector<Case> cases;
    ClusterModel cluster_model;
    std::vector<ForecastModelSpec> pool;
    std::uint32_t lookback_len = 0;
    std::uint32_t horizon_len = 0;
    int period = 2;
    bool znormalized = false;
    std::uint64_t dataset_fingerprint = 0;
    std::uint64_t pool_fingerprint_ = 0;
    std::vector<std::string> warnings; // build-time notes; not serialized
};

struct LibraryBuildConfig {
    int lookback_len = 0;
    int horizon_len = 0;
    int period = 2;
    std::vector<ForecastModelSpec> pool;
    std::uint64_t seed = 0;
    std::optional<std::size_t> k_override; // default_k_policy when absent
    bool znormalize = false;
    KMeansConfig kmeans;
};

namespace detail {

inline std::vector<double> znorm(std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(x.size()));
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sd > 0.0 ? (x[i] - mean) / sd : 0.0;
    return out;
}

} // namespace detail

/// Builds the full case library from the training split: one case per window
/// at stride 1, pool evaluation and best-model labeling per case, then
/// clustering of the lookbacks. Deterministic for fixed (dataset, pool, seed).
inline CaseLibrary build_case_library(const Dataset& dataset, const LibraryBuildConfig& cfg) {
    if (cfg.pool.empty()) throw Error(ErrorKind::invalid_argument, "empty model pool");
    const auto H = static_cast<std::size_t>(cfg.lookback_len);
    const auto L = static_cast<std::size_t>(cfg.horizon_len);
    const auto windows =
        enumerate_windows(dataset.endogenous, dataset.splits.train, cfg.lookback_len,
                          cfg.horizon_len, 1);

    CaseLibrary lib;
    lib.pool = cfg.pool;
    lib.lookback_len = static_cast<std::uint32_t>(H);
    lib.horizon_len = static_cast<std::uint32_t>(L);
    lib.period = cfg.period;
    lib.znormalized = cfg.znormalize;
    lib.dataset_fingerprint = dataset.fingerprint();
    lib.pool_fingerprint_ = pool_fingerprint(cfg.pool);

    lib.cases.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        const auto eval = evaluate_pool(w.lookback, *w.future, cfg.pool, cfg.period);
        Case c;
        c.case_id = i;
        c.lookback = w.lookback;
        c.future = *w.future;
        c.best_index = static_cast<std::uint32_t>(eval.best_index);
        c.per_model_mse = eval.mse;
        lib.cases.push_back(std::move(c));
    }

    std::size_t k = cfg.k_override ? *cfg.k_override : default_k_policy(lib.cases.size());
    if (k > lib.cases.size()) {
        lib.warnings.push_back("k " + std::to_string(k) + " clamped to case count " +
                               std::to_string(lib.cases.size()));
        k = lib.cases.size();
    }
    std::vector<std::vector<double>> points;
    points.reserve(lib.cases.size());
    for (const auto& c : lib.cases)
        points.push_back(cfg.znormalize ? detail::znorm(c.lookback) : c.lookback);
    lib.cluster_model = kmeans(points, k, cfg.seed, cfg.kmeans);
    for (std::size_t i = 0; i < lib.cases.size(); ++i)
        lib.cases[i].cluster_id = lib.cluster_model.assignments[i];
    return lib;
}

struct RetrievalConfig {
    std::size_t top_n = 16;
    double epsilon = 1e-8;
};

/// Everything the prompt needs from the library for one query window: the
/// chosen cluster, the weighted auxiliary forecast with its per-case weights,
/// and the globally nearest case.
struct RetrievalResult {
    std::uint32_t cluster_id = 0;
    std::vector<double> auxiliary_forecast;
    std::map<std::uint64_t, double> weights; // case_id -> weight, sums to 1
    const Case* neighbor = nullptr;
    double neighbor_distance = 0.0;
    std::vector<std::string> warnings;
};

/// Retrieval: nearest center (Euclidean), inverse-distance weights over
/// the top-n intra-cluster cases, auxiliary forecast as the
/// weighted sum of each contributing case's labeled model re-fitted on the
/// query. The neighbor scan ranges over the whole library.
inline RetrievalResult retrieve(const CaseLibrary& lib, std::span<const double> query,
                                const RetrievalConfig& cfg = {}) {
    if (query.size() != lib.lookback_len)
        throw Error(ErrorKind::invalid_argument,
                    "query length " + std::to_string(query.size()) + ", library lookback " +
                        std::to_string(lib.lookback_len));
    if (lib.cases.empty()) throw Error(ErrorKind::invalid_argument, "empty case library");

    RetrievalResult res;
    const std::vector<double> cluster_query =
        lib.znormalized ? detail::znorm(query) : std::vector<double>(query.begin(), query.end());

    double best_center = std::numeric_limits<double>::infinity();
    for (std::uint32_t j = 0; j < lib.cluster_model.k; ++j) {
        const double d = detail::sq_dist(cluster_query, lib.cluster_model.centers[j]);
        if (d < best_center) {
            best_center = d;
            res.cluster_id = j;
        }
    }

    auto raw_dist = [&](const Case& c) {
        double s = 0.0;
        for (std::size_t i = 0; i < query.size(); ++i) {
            const double d = query[i] - c.lookback[i];
            s += d * d;
        }
        return std::sqrt(s);
    };

    // Global nearest neighbor; ties keep the earlier case.
    double best_nn = std::numeric_limits<double>::infinity();
    for (const auto& c : lib.cases) {
        const double d = raw_dist(c);
        if (d < best_nn) {
            best_nn = d;
            res.neighbor = &c;
        }
    }
    res.neighbor_distance = best_nn;

    // Contributors: top-n members of the chosen cluster by ascending distance.
    std::vector<std::pair<double, const Case*>> members;
    for (const auto& c : lib.cases)
        if (c.cluster_id == res.cluster_id) members.emplace_back(raw_dist(c), &c);
    std::stable_sort(members.begin(), members.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    if (members.size() > cfg.top_n) members.resize(cfg.top_n);

    std::vector<double> weights;
    std::vector<const Case*> contributors;
    double total = 0.0;
    for (const auto& [d, c] : members) {
        const double w = 1.0 / (cfg.epsilon + d);
        weights.push_back(w);
        contributors.push_back(c);
        total += w;
    }
    for (double& w : weights) w /= total;

    // One fit per distinct model spec; unavailable models drop their cases.
    const auto L = static_cast<int>(lib.horizon_len);
    std::map<std::uint32_t, std::vector<double>> fitted;
    std::vector<bool> keep(contributors.size(), true);
    for (std::size_t i = 0; i < contributors.size(); ++i) {
        const std::uint32_t mi = contributors[i]->best_index;
        if (fitted.count(mi)) continue;
        try {
            fitted[mi] = fit_predict(lib.pool[mi], query, L, lib.period);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::model_unavailable) throw;
            res.warnings.push_back(std::string(model_name(lib.pool[mi].id)) +
                                   " unavailable on this query; contributors dropped");
        }
    }
    double kept_total = 0.0;
    for (std::size_t i = 0; i < contributors.size(); ++i) {
        keep[i] = fitted.count(contributors[i]->best_index) > 0;
        if (keep[i]) kept_total += weights[i];
    }
    if (kept_total <= 0.0) {
        res.warnings.push_back("all contributing models unavailable; auxiliary falls back to naive_last");
        res.auxiliary_forecast = fit_predict({ModelId::naive_last, {}}, query, L, lib.period);
        return res;
    }
    res.auxiliary_forecast.assign(static_cast<std::size_t>(L), 0.0);
    for (std::size_t i = 0; i < contributors.size(); ++i) {
        if (!keep[i]) continue;
        const double w = weights[i] / kept_total;
        res.weights[contributors[i]->case_id] = w;
        const auto& f = fitted[contributors[i]->best_index];
        for (int j = 0; j < L; ++j)
            res.auxiliary_forecast[static_cast<std::size_t>(j)] += w * f[static_cast<std::size_t>(j)];
    }
    return res;
}

// ---------------------------------------------------------------------------
// Versioned little-endian binary container.
// Layout: "ACLB" | u32 version | u32 H | u32 L | i32 period | u8 znorm |
//         u64 seed | u64 dataset_fp | u64 pool_fp | pool table | case table |
//         center matrix | f64 inertia.
// ---------------------------------------------------------------------------

namespace detail {

class BinWriter {
public:
    explicit BinWriter(std::ostream& out) : out_(out) {}

    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { le(v); }
    void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v)); }
    void u64(std::uint64_t v) { le(v); }
    void f64(double v) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &v, 8);
        le(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

private:
    template <typename T>
    void le(T v) {
        std::uint8_t buf[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
        bytes(buf, sizeof(T));
    }
    std::ostream& out_;
};

class BinReader {
public:
    explicit BinReader(std::istream& in) : in_(in) {}

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw Error(ErrorKind::format_error,
                        "truncated library file at offset " + std::to_string(offset_));
        offset_ += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    std::int32_t i32() { return static_cast<std::int32_t>(le<std::uint32_t>()); }
    std::uint64_t u64() { return le<std::uint64_t>(); }
    double f64() {
        const std::uint64_t bits = le<std::uint64_t>();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        if (n > (1u << 20))
            throw Error(ErrorKind::format_error,
                        "implausible string length at offset " + std::to_string(offset_));
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::size_t offset() const { return offset_; }

private:
    template <typename T>
    T le() {
        std::uint8_t buf[sizeof(T)];
        bytes(buf, sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
        return v;
    }
    std::istream& in_;
    std::size_t offset_ = 0;
};

} // namespace detail

inline constexpr char kLibraryMagic[4] = {'A', 'C', 'L', 'B'};
inline constexpr std::uint32_t kLibraryVersion = 1;

inline void save_library(const CaseLibrary& lib, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
    detail::BinWriter w(out);
    w.bytes(kLibraryMagic, 4);
    w.u32(kLibraryVersion);
    w.u32(lib.lookback_len);
    w.u32(lib.horizon_len);
    w.i32(lib.period);
    w.u8(lib.znormalized ? 1 : 0);
    w.u64(lib.cluster_model.seed);
    w.u64(lib.dataset_fingerprint);
    w.u64(lib.pool_fingerprint_);

    w.u32(static_cast<std::uint32_t>(lib.pool.size()));
    for (const auto& spec : lib.pool) {
        w.str(std::string(model_name(spec.id)));
        w.u32(static_cast<std::uint32_t>(spec.hyperparameters.size()));
        for (const auto& [key, val] : spec.hyperparameters) {
            w.str(key);
            w.f64(val);
        }
    }

    w.u64(lib.cases.size());
    for (const auto& c : lib.cases) {
        w.u64(c.case_id);
        w.u32(c.best_index);
        w.u32(c.cluster_id);
        std::uint32_t present = 0;
        for (const auto& m : c.per_model_mse) present += m.has_value() ? 1 : 0;
        w.u32(present);
        for (std::uint32_t i = 0; i < c.per_model_mse.size(); ++i)
            if (c.per_model_mse[i]) {
                w.u32(i);
                w.f64(*c.per_model_mse[i]);
            }
        for (double v : c.lookback) w.f64(v);
        for (double v : c.future) w.f64(v);
    }

    w.u32(static_cast<std::uint32_t>(lib.cluster_model.k));
    for (const auto& center : lib.cluster_model.centers)
        for (double v : center) w.f64(v);
    w.f64(lib.cluster_model.inertia);
}

inline CaseLibrary load_library(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
    detail::BinReader r(in);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kLibraryMagic, 4) != 0)
        throw Error(ErrorKind::format_error, path.string() + ": not a case-library file");
    const std::uint32_t version = r.u32();
    if (version != kLibraryVersion)
        throw Error(ErrorKind::format_error,
                    path.string() + ": unsupported version " + std::to_string(version));

    CaseLibrary lib;
    lib.lookback_len = r.u32();
    lib.horizon_len = r.u32();
    lib.period = r.i32();
    lib.znormalized = r.u8() != 0;
    lib.cluster_model.seed = r.u64();
    lib.dataset_fingerprint = r.u64();
    lib.pool_fingerprint_ = r.u64();

    const std::uint32_t pool_size = r.u32();
    for (std::uint32_t i = 0; i < pool_size; ++i) {
        ForecastModelSpec spec;
        const std::string name = r.str();
        const auto id = model_from_name(name);
        if (!id)
            throw Error(ErrorKind::format_error,
                        path.string() + ": unknown model '" + name + "'");
        spec.id = *id;
        const std::uint32_t nh = r.u32();
        for (std::uint32_t h = 0; h < nh; ++h) {
            const std::string key = r.str();
            spec.hyperparameters[key] = r.f64();
        }
        lib.pool.push_back(std::move(spec));
    }

    const std::uint64_t case_count = r.u64();
    lib.cases.resize(case_count);
    for (auto& c : lib.cases) {
        c.case_id = r.u64();
        c.best_index = r.u32();
        c.cluster_id = r.u32();
        c.per_model_mse.assign(pool_size, std::nullopt);
        const std::uint32_t present = r.u32();
        for (std::uint32_t i = 0; i < present; ++i) {
            const std::uint32_t idx = r.u32();
            const double mse = r.f64();
            if (idx >= pool_size)
                throw Error(ErrorKind::format_error,
                            path.string() + ": per-model index out of range");
            c.per_model_mse[idx] = mse;
        }
        c.lookback.resize(lib.lookback_len);
        for (auto& v : c.lookback) v = r.f64();
        c.future.resize(lib.horizon_len);
        for (auto& v : c.future) v = r.f64();
    }

    lib.cluster_model.k = r.u32();
    lib.cluster_model.centers.assign(lib.cluster_model.k,
                                     std::vector<double>(lib.lookback_len, 0.0));
    for (auto& center : lib.cluster_model.centers)
        for (auto& v : center) v = r.f64();
    lib.cluster_model.inertia = r.f64();
    lib.cluster_model.assignments.resize(case_count);
    for (std::size_t i = 0; i < case_count; ++i)
        lib.cluster_model.assignments[i] = lib.cases[i].cluster_id;
    return lib;
}

/// Guards cached libraries: a library built from a different dataset or pool
/// must not serve retrievals for this one.
inline void check_library_fresh(const CaseLibrary& lib, const Dataset& dataset,
                                const std::vector<ForecastModelSpec>& pool) {
    if (lib.dataset_fingerprint != dataset.fingerprint())
        throw Error(ErrorKind::stale_library,
                    "library was built from a different dataset (fingerprint mismatch)");
    if (lib.pool_fingerprint_ != pool_fingerprint(pool))
        throw Error(ErrorKind::stale_library,
                    "library was built with a different model pool (fingerprint mismatch)");
}

} // namespace alphacast
