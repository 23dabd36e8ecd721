#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alphacast/errors.hpp"
#include "alphacast/hash.hpp"

namespace alphacast {

/// Closed pool enumeration. The order here is the canonical pool order and
/// the tie-break order for best-model selection.
enum class ModelId : int {
    naive_last = 0,
    snaive,
    historic_average,
    drift,
    ses,
    holt_winters_additive,
    ar_ls,
    theta_lite,
};

inline constexpr std::array<std::string_view, 8> kModelNames = {
    "naive_last", "snaive", "historic_average", "drift",
    "ses",        "holt_winters_additive", "ar_ls", "theta_lite",
};

inline std::string_view model_name(ModelId id) {
    return kModelNames[static_cast<std::size_t>(id)];
}

inline std::optional<ModelId> model_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kModelNames.size(); ++i)
        if (kModelNames[i] == name) return static_cast<ModelId>(i);
    return std::nullopt;
}

/// One pool member. Hyperparameters not given fall back to the documented
/// defaults: ses alpha 0.3, holt-winters (alpha, beta, gamma) = (0.3, 0.05, 0.1),
/// ar_ls order 8, seasonal models use the dataset period.
struct ForecastModelSpec {
    ModelId id = ModelId::naive_last;
    std::map<std::string, double> hyperparameters;

    double param(const std::string& key, double fallback) const {
        auto it = hyperparameters.find(key);
        return it == hyperparameters.end() ? fallback : it->second;
    }

    bool operator==(const ForecastModelSpec&) const = default;

    std::uint64_t fingerprint() const {
        Fnv1a h;
        h.str(model_name(id));
        for (const auto& [k, v] : hyperparameters) h.str(k).f64(v);
        return h.value();
    }
};

namespace detail {

inline double span_mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

/// Solves A x = b in place by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-300)
            throw Error(ErrorKind::model_unavailable, "singular normal equations");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri][c] * x[c];
        x[ri] = s / a[ri][ri];
    }
    return x;
}

inline std::vector<double> forecast_drift(std::span<const double> lb, int horizon) {
    const double last = lb.back();
    const double slope = (last - lb.front()) / static_cast<double>(lb.size() - 1);
    std::vector<double> out(static_cast<std::size_t>(horizon));
    for (int j = 0; j < horizon; ++j) out[static_cast<std::size_t>(j)] = last + slope * (j + 1);
    return out;
}

inline std::vector<double> forecast_ses(std::span<const double> lb, int horizon, double alpha) {
    double level = lb.front();
    for (std::size_t t = 1; t < lb.size(); ++t) level = alpha * lb[t] + (1.0 - alpha) * level;
    return std::vector<double>(static_cast<std::size_t>(horizon), level);
}

} // namespace detail

/// Validates a spec against the window it will fit on. Violations throw
/// model_unavailable so callers can skip the model for that case.
inline void validate_spec(const ForecastModelSpec& spec, std::size_t lookback_len, int period) {
    const int H = static_cast<int>(lookback_len);
    auto unavailable = [&](const std::string& why) {
        throw Error(ErrorKind::model_unavailable, std::string(model_name(spec.id)) + ": " + why);
    };
    if (H < 1) unavailable("empty lookback");
    switch (spec.id) {
    case ModelId::naive_last:
    case ModelId::historic_average:
        break;
    case ModelId::drift:
    case ModelId::theta_lite:
        if (H < 2) unavailable("needs at least 2 samples");
        break;
    case ModelId::ses: {
        const double alpha = spec.param("alpha", 0.3);
        if (!(alpha > 0.0 && alpha <= 1.0)) unavailable("alpha out of (0, 1]");
        break;
    }
    case ModelId::snaive:
    case ModelId::holt_winters_additive: {
        const int m = static_cast<int>(spec.param("period", period));
        if (m < 2) unavailable("period must be >= 2");
        if (H < m) unavailable("lookback shorter than one season");
        if (spec.id == ModelId::holt_winters_additive) {
            const double alpha = spec.param("alpha", 0.3);
            const double beta = spec.param("beta", 0.05);
            const double gamma = spec.param("gamma", 0.1);
            if (!(alpha > 0.0 && alpha <= 1.0) || !(beta >= 0.0 && beta <= 1.0) ||
                !(gamma >= 0.0 && gamma <= 1.0))
                unavailable("smoothing constants out of range");
        }
        break;
    }
    case ModelId::ar_ls: {
        const int p = static_cast<int>(spec.param("order", 8));
        if (p < 1 || p > H / 4) unavailable("order outside [1, H/4]");
        if (H < 2 * p + 2) unavailable("lookback shorter than 2p + 2");
        break;
    }
    }
}

/// Deterministic window-local forecast: fit on the lookback alone, emit
/// `horizon` values. Model semantics:
///  - naive_last: repeat the final value
///  - snaive: copy the last full season cyclically
///  - historic_average: repeat the lookback mean
///  - drift: extrapolate the line through the first and last points
///  - ses: simple exponential smoothing (fixed alpha), flat continuation
///  - holt_winters_additive: additive level/trend/season with fixed constants
///  - ar_ls: ordinary-least-squares autoregression, iterated forward
///  - theta_lite: mean of the drift and ses forecasts
inline std::vector<double> fit_predict(const ForecastModelSpec& spec, std::span<const double> lookback,
                                       int horizon, int period) {
    if (horizon < 1) throw Error(ErrorKind::invalid_argument, "horizon must be >= 1");
    validate_spec(spec, lookback.size(), period);
    const std::size_t H = lookback.size();
    std::vector<double> out(static_cast<std::size_t>(horizon));

    switch (spec.id) {
    case ModelId::naive_last: {
        std::fill(out.begin(), out.end(), lookback.back());
        return out;
    }
    case ModelId::snaive: {
        const int m = static_cast<int>(spec.param("period", period));
        for (int j = 0; j < horizon; ++j)
            out[static_cast<std::size_t>(j)] = lookback[H - static_cast<std::size_t>(m) +
                                                        static_cast<std::size_t>(j % m)];
        return out;
    }
    case ModelId::historic_average: {
        std::fill(out.begin(), out.end(), detail::span_mean(lookback));
        return out;
    }
    case ModelId::drift:
        return detail::forecast_drift(lookback, horizon);
    case ModelId::ses:
        return detail::forecast_ses(lookback, horizon, spec.param("alpha", 0.3));
    case ModelId::holt_winters_additive: {
        const std::size_t m = static_cast<std::size_t>(spec.param("period", period));
        const double alpha = spec.param("alpha", 0.3);
        const double beta = spec.param("beta", 0.05);
        const double gamma = spec.param("gamma", 0.1);
        // First-season initialization; the trend seed needs two full seasons
        // and stays 0 otherwise.
        double level = detail::span_mean(lookback.subspan(0, m));
        double trend = 0.0;
        if (H >= 2 * m) {
            const double second = detail::span_mean(lookback.subspan(m, m));
            trend = (second - level) / static_cast<double>(m);
        }
        std::vector<double> seasonal(lookback.begin(), lookback.begin() + static_cast<std::ptrdiff_t>(m));
        for (double& s : seasonal) s -= level;
        std::vector<double> season_hist = seasonal; // indexed t mod m over the recursion
        for (std::size_t t = m; t < H; ++t) {
            const double s_prev = season_hist[t % m];
            const double level_prev = level;
            level = alpha * (lookback[t] - s_prev) + (1.0 - alpha) * (level + trend);
            trend = beta * (level - level_prev) + (1.0 - beta) * trend;
            season_hist[t % m] = gamma * (lookback[t] - level_prev - trend) + (1.0 - gamma) * s_prev;
        }
        for (int j = 0; j < horizon; ++j) {
            const std::size_t pos = (H + static_cast<std::size_t>(j)) % m;
            out[static_cast<std::size_t>(j)] = level + (j + 1) * trend + season_hist[pos];
        }
        return out;
    }
    case ModelId::ar_ls: {
        const std::size_t p = static_cast<std::size_t>(spec.param("order", 8));
        // Regress x_t on [1, x_{t-1}, ..., x_{t-p}] via normal equations.
        const std::size_t dim = p + 1;
        std::vector<std::vector<double>> ata(dim, std::vector<double>(dim, 0.0));
        std::vector<double> atb(dim, 0.0);
        for (std::size_t t = p; t < H; ++t) {
            std::vector<double> row(dim, 1.0);
            for (std::size_t i = 1; i < dim; ++i) row[i] = lookback[t - i];
            for (std::size_t i = 0; i < dim; ++i) {
                atb[i] += row[i] * lookback[t];
                for (std::size_t j = 0; j < dim; ++j) ata[i][j] += row[i] * row[j];
            }
        }
        const auto coef = detail::solve_linear(std::move(ata), std::move(atb));
        std::vector<double> history(lookback.begin(), lookback.end());
        for (int j = 0; j < horizon; ++j) {
            double v = coef[0];
            for (std::size_t i = 1; i <= p; ++i) v += coef[i] * history[history.size() - i];
            history.push_back(v);
            out[static_cast<std::size_t>(j)] = v;
        }
        return out;
    }
    case ModelId::theta_lite: {
        const auto a = detail::forecast_drift(lookback, horizon);
        const auto b = detail::forecast_ses(lookback, horizon, spec.param("alpha", 0.3));
        for (int j = 0; j < horizon; ++j)
            out[static_cast<std::size_t>(j)] = 0.5 * (a[static_cast<std::size_t>(j)] +
                                                      b[static_cast<std::size_t>(j)]);
        return out;
    }
    }
    throw Error(ErrorKind::invalid_argument, "unknown model id");
}

/// The full default pool in canonical order.
inline std::vector<ForecastModelSpec> default_pool() {
    std::vector<ForecastModelSpec> pool;
    for (std::size_t i = 0; i < kModelNames.size(); ++i)
        pool.push_back({static_cast<ModelId>(i), {}});
    return pool;
}

inline std::uint64_t pool_fingerprint(const std::vector<ForecastModelSpec>& pool) {
    Fnv1a h;
    h.u64(pool.size());
    for (const auto& spec : pool) h.u64(spec.fingerprint());
    return h.value();
}

/// Per-model MSE table plus the winning pool index. Unavailable models carry
/// no entry; ties break toward the earlier pool position.
struct PoolEvaluation {
    std::vector<std::optional<double>> mse; // aligned with the pool
    std::size_t best_index = 0;

    double best_mse() const { return *mse[best_index]; }
};

inline PoolEvaluation evaluate_pool(std::span<const double> lookback, std::span<const double> truth,
                                    const std::vector<ForecastModelSpec>& pool, int period) {
    if (pool.empty()) throw Error(ErrorKind::invalid_argument, "empty model pool");
    if (truth.empty()) throw Error(ErrorKind::invalid_argument, "empty truth");
    PoolEvaluation out;
    out.mse.resize(pool.size());
    bool any = false;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        std::vector<double> pred;
        try {
            pred = fit_predict(pool[i], lookback, static_cast<int>(truth.size()), period);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::model_unavailable) continue;
            throw;
        }
        double s = 0.0;
        for (std::size_t j = 0; j < truth.size(); ++j) {
            const double d = pred[j] - truth[j];
            s += d * d;
        }
        out.mse[i] = s / static_cast<double>(truth.size());
        if (!any || *out.mse[i] < *out.mse[out.best_index]) {
            out.best_index = i;
            any = true;
        }
    }
    if (!any) throw Error(ErrorKind::all_models_unavailable, "no pool model fits this window");
    return out;
}

} // namespace alphacast
