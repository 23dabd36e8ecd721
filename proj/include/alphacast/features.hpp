#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "alphacast/errors.hpp"

namespace alphacast {

/// The fixed 20-feature roster. Order is the serialization order everywhere
/// (prompt documents, reports, usage tables).
enum class Feature : int {
    basic_count = 0,
    basic_mean,
    basic_std,
    basic_variance,
    basic_min,
    basic_max,
    basic_skewness,
    basic_kurtosis,
    spectral_entropy,
    xacf1,
    xacf10,
    diff1_acf1,
    diff1_acf10,
    diff2_acf1,
    diff2_acf10,
    sample_entropy,
    lumpiness,
    flat_spots,
    crossing_points,
    seasonal_strength,
};

inline constexpr int kFeatureCount = 20;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "basic_count",   "basic_mean",      "basic_std",        "basic_variance", "basic_min",
    "basic_max",     "basic_skewness",  "basic_kurtosis",   "spectral_entropy", "xacf1",
    "xacf10",        "diff1_acf1",      "diff1_acf10",      "diff2_acf1",     "diff2_acf10",
    "sample_entropy", "lumpiness",      "flat_spots",       "crossing_points", "seasonal_strength",
};

inline std::string_view feature_name(Feature f) {
    return kFeatureNames[static_cast<std::size_t>(f)];
}

inline std::optional<Feature> feature_from_name(std::string_view name) {
    for (int i = 0; i < kFeatureCount; ++i)
        if (kFeatureNames[static_cast<std::size_t>(i)] == name) return static_cast<Feature>(i);
    return std::nullopt;
}

/// All 20 feature values for one channel's lookback window plus the set of
/// features that were defaulted to 0 because their degeneracy condition held.
///
/// Estimator conventions (the reference definitions all oracles follow):
///  - moments use n denominators; basic_std = sqrt(basic_variance)
///  - acf r_k = sum_{t<n-k}(x_t-mean)(x_{t+k}-mean) / sum(x_t-mean)^2
///  - xacf10 = sum of r_k^2 for k = 1..10
///  - spectral entropy: Shannon entropy of the DFT periodogram over bins
///    1..floor(n/2) (DC excluded) normalized to sum 1, divided by ln(#bins)
///  - sample entropy: embedding 2, tolerance 0.2 * basic_std, natural log,
///    capped at 10 when no length-3 template matches exist
///  - lumpiness: population variance of per-tile population variances over
///    complete non-overlapping tiles of width max(period, 10)
///  - flat_spots: longest same-bin run after 10 equal-width bins over [min,max]
///    (constant windows count the whole window)
///  - crossing_points: adjacent flips of the indicator (x <= sample median)
///  - seasonal_strength: classical additive decomposition (centered moving
///    average trend, per-position seasonal means), max(0, 1 - Var(R)/Var(S+R))
///
/// Degeneracy conditions, exactly:
///  - constant window (min == max): skewness, kurtosis, spectral_entropy,
///    xacf1, xacf10, both diff families, sample_entropy, lumpiness and
///    seasonal_strength flag and yield 0
///  - n < 8: spectral_entropy; n < 12: xacf10; n < k+12: the diff-k family;
///    a constant k-th difference also flags the diff-k family
///  - n < 2 * tile: lumpiness; n < max(2 * period, 16) or zero detrended
///    variance: seasonal_strength
struct FeatureVector {
    std::array<double, kFeatureCount> values{};
    std::array<bool, kFeatureCount> degenerate{};

    double at(Feature f) const { return values[static_cast<std::size_t>(f)]; }
    void set(Feature f, double v) { values[static_cast<std::size_t>(f)] = v; }
    bool is_degenerate(Feature f) const { return degenerate[static_cast<std::size_t>(f)]; }
    void flag(Feature f) { degenerate[static_cast<std::size_t>(f)] = true; }

    std::vector<std::string> degenerate_names() const {
        std::vector<std::string> out;
        for (int i = 0; i < kFeatureCount; ++i)
            if (degenerate[static_cast<std::size_t>(i)])
                out.emplace_back(kFeatureNames[static_cast<std::size_t>(i)]);
        return out;
    }
};

namespace detail {

inline bool is_constant(std::span<const double> x) {
    for (double v : x)
        if (v != x.front()) return false;
    return true;
}

inline double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

/// Central moments m2..m4 with n denominators.
struct Moments {
    double mean = 0, m2 = 0, m3 = 0, m4 = 0;
};

inline Moments central_moments(std::span<const double> x) {
    Moments m;
    m.mean = mean_of(x);
    const double n = static_cast<double>(x.size());
    for (double v : x) {
        const double d = v - m.mean;
        const double d2 = d * d;
        m.m2 += d2;
        m.m3 += d2 * d;
        m.m4 += d2 * d2;
    }
    m.m2 /= n;
    m.m3 /= n;
    m.m4 /= n;
    return m;
}

inline std::vector<double> difference(std::span<const double> x, int order) {
    std::vector<double> d(x.begin(), x.end());
    for (int k = 0; k < order; ++k) {
        for (std::size_t i = 0; i + 1 < d.size(); ++i) d[i] = d[i + 1] - d[i];
        d.pop_back();
    }
    return d;
}

struct SeasonalStats {
    double strength = 0.0;
    bool collapsed = true; // too short or zero detrended variance
};

/// Shared core of seasonal_strength(): centered-moving-average trend
/// (2 x m convention for even periods), per-position seasonal means,
/// population variances of detrended and remainder over valid indices.
inline SeasonalStats seasonal_stats(std::span<const double> window, int period) {
    SeasonalStats out;
    const std::size_t n = window.size();
    const std::size_t m = static_cast<std::size_t>(period);
    if (n < 2 * m) return out;

    const bool even = m % 2 == 0;
    const std::size_t lo = even ? m / 2 : (m - 1) / 2;
    if (n < 2 * lo + 1) return out;

    std::vector<std::size_t> valid;
    std::vector<double> detrended;
    for (std::size_t t = lo; t + lo < n; ++t) {
        double s = 0.0;
        if (even) {
            s = 0.5 * window[t - m / 2] + 0.5 * window[t + m / 2];
            for (std::size_t j = t - m / 2 + 1; j < t + m / 2; ++j) s += window[j];
            s /= static_cast<double>(m);
        } else {
            for (std::size_t j = t - lo; j <= t + lo; ++j) s += window[j];
            s /= static_cast<double>(m);
        }
        valid.push_back(t);
        detrended.push_back(window[t] - s);
    }

    std::vector<double> pos_sum(m, 0.0);
    std::vector<int> pos_count(m, 0);
    for (std::size_t i = 0; i < valid.size(); ++i) {
        const std::size_t pos = valid[i] % m;
        pos_sum[pos] += detrended[i];
        pos_count[pos] += 1;
    }
    std::vector<double> remainder(valid.size());
    for (std::size_t i = 0; i < valid.size(); ++i) {
        const std::size_t pos = valid[i] % m;
        remainder[i] = detrended[i] - pos_sum[pos] / static_cast<double>(pos_count[pos]);
    }

    const double var_detrended = central_moments(detrended).m2;
    if (var_detrended <= 0.0) return out;
    out.collapsed = false;
    out.strength = std::max(0.0, 1.0 - central_moments(remainder).m2 / var_detrended);
    return out;
}

inline double sample_median(std::span<const double> x) {
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

} // namespace detail

/// r_k under the reference convention. Zero-variance windows return 0.
inline double acf_at_lag(std::span<const double> window, int lag) {
    const std::size_t n = window.size();
    if (lag < 1 || static_cast<std::size_t>(lag) + 1 >= n)
        throw Error(ErrorKind::invalid_argument,
                    "acf lag " + std::to_string(lag) + " infeasible for window of " + std::to_string(n));
    if (detail::is_constant(window)) return 0.0;
    const double mean = detail::mean_of(window);
    double denom = 0.0;
    for (double v : window) denom += (v - mean) * (v - mean);
    double num = 0.0;
    for (std::size_t t = 0; t + static_cast<std::size_t>(lag) < n; ++t)
        num += (window[t] - mean) * (window[t + static_cast<std::size_t>(lag)] - mean);
    return num / denom;
}

/// Sum of squared autocorrelations at lags 1..10.
inline double acf10_sum(std::span<const double> window) {
    if (window.size() < 12)
        throw Error(ErrorKind::invalid_argument, "acf10 needs at least 12 samples");
    if (detail::is_constant(window)) return 0.0;
    double s = 0.0;
    for (int k = 1; k <= 10; ++k) {
        const double r = acf_at_lag(window, k);
        s += r * r;
    }
    return s;
}

/// Normalized Shannon entropy of the periodogram, in [0, 1]. Low for periodic
/// signals, high for noise-like ones.
inline double spectral_entropy(std::span<const double> window) {
    const std::size_t n = window.size();
    if (n < 8)
        throw Error(ErrorKind::invalid_argument, "spectral entropy needs at least 8 samples");
    if (detail::is_constant(window)) return 0.0;
    const std::size_t bins = n / 2;
    std::vector<double> power(bins, 0.0);
    const double two_pi = 2.0 * std::acos(-1.0);
    double total = 0.0;
    for (std::size_t k = 1; k <= bins; ++k) {
        double re = 0.0, im = 0.0;
        const double w = two_pi * static_cast<double>(k) / static_cast<double>(n);
        for (std::size_t t = 0; t < n; ++t) {
            const double a = w * static_cast<double>(t);
            re += window[t] * std::cos(a);
            im -= window[t] * std::sin(a);
        }
        power[k - 1] = re * re + im * im;
        total += power[k - 1];
    }
    if (total <= 0.0) return 0.0;
    double entropy = 0.0;
    for (double p : power) {
        const double q = p / total;
        if (q > 0.0) entropy -= q * std::log(q);
    }
    return entropy / std::log(static_cast<double>(bins));
}

/// Variance of per-tile variances over complete non-overlapping tiles.
inline double lumpiness(std::span<const double> window, int tile) {
    if (tile < 2) throw Error(ErrorKind::invalid_argument, "lumpiness tile must be >= 2");
    if (window.size() < 2 * static_cast<std::size_t>(tile)) return 0.0;
    const std::size_t count = window.size() / static_cast<std::size_t>(tile);
    std::vector<double> tile_vars;
    tile_vars.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto part = window.subspan(i * static_cast<std::size_t>(tile), static_cast<std::size_t>(tile));
        tile_vars.push_back(detail::central_moments(part).m2);
    }
    return detail::central_moments(tile_vars).m2;
}

/// Longest run inside one of 10 equal-width bins spanning [min, max].
inline double flat_spots(std::span<const double> window) {
    if (window.empty()) throw Error(ErrorKind::invalid_argument, "empty window");
    const auto [mn_it, mx_it] = std::minmax_element(window.begin(), window.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mn == mx) return static_cast<double>(window.size());
    auto bin_of = [&](double v) {
        int b = static_cast<int>(std::floor((v - mn) / (mx - mn) * 10.0));
        return std::min(b, 9);
    };
    int longest = 1, run = 1;
    int prev = bin_of(window[0]);
    for (std::size_t i = 1; i < window.size(); ++i) {
        const int b = bin_of(window[i]);
        run = (b == prev) ? run + 1 : 1;
        longest = std::max(longest, run);
        prev = b;
    }
    return static_cast<double>(longest);
}

/// Number of adjacent pairs straddling the sample median (flips of x <= median).
inline double crossing_points(std::span<const double> window) {
    if (window.size() < 2) throw Error(ErrorKind::invalid_argument, "need at least 2 samples");
    const double med = detail::sample_median(window);
    int crossings = 0;
    bool prev = window[0] <= med;
    for (std::size_t i = 1; i < window.size(); ++i) {
        const bool cur = window[i] <= med;
        if (cur != prev) ++crossings;
        prev = cur;
    }
    return static_cast<double>(crossings);
}

/// Classical additive decomposition strength of seasonality in [0, 1]:
/// max(0, 1 - Var(remainder) / Var(detrended)). Defaults to 0 for windows
/// shorter than two periods or with zero detrended variance.
inline double seasonal_strength(std::span<const double> window, int period) {
    if (period < 2) throw Error(ErrorKind::invalid_argument, "seasonal period must be >= 2");
    return detail::seasonal_stats(window, period).strength;
}

/// Sample entropy, embedding dimension 2, tolerance 0.2 * basic_std,
/// Chebyshev distance, natural log, capped at 10 when no matches survive.
inline double sample_entropy(std::span<const double> window) {
    const std::size_t n = window.size();
    if (n < 4) throw Error(ErrorKind::invalid_argument, "sample entropy needs at least 4 samples");
    if (detail::is_constant(window)) return 0.0;
    const double r = 0.2 * std::sqrt(detail::central_moments(window).m2);
    const std::size_t templates = n - 2; // comparable template count for m = 2 and m = 3
    std::size_t b = 0, a = 0;
    for (std::size_t i = 0; i + 1 < templates; ++i) {
        for (std::size_t j = i + 1; j < templates; ++j) {
            const double d2 = std::max(std::abs(window[i] - window[j]),
                                       std::abs(window[i + 1] - window[j + 1]));
            if (d2 <= r) {
                ++b;
                if (std::abs(window[i + 2] - window[j + 2]) <= r) ++a;
            }
        }
    }
    if (a == 0 || b == 0) return 10.0;
    return std::min(10.0, -std::log(static_cast<double>(a) / static_cast<double>(b)));
}

inline double skewness(std::span<const double> window) {
    if (window.size() < 2) throw Error(ErrorKind::invalid_argument, "need at least 2 samples");
    if (detail::is_constant(window)) return 0.0;
    const auto m = detail::central_moments(window);
    return m.m3 / std::pow(m.m2, 1.5);
}

/// Excess kurtosis (normal windows score near 0).
inline double kurtosis(std::span<const double> window) {
    if (window.size() < 2) throw Error(ErrorKind::invalid_argument, "need at least 2 samples");
    if (detail::is_constant(window)) return 0.0;
    const auto m = detail::central_moments(window);
    return m.m4 / (m.m2 * m.m2) - 3.0;
}

/// The full 20-feature extraction for one window. `period` is the dominant
/// seasonal period of the dataset frequency (see season_period()).
inline FeatureVector extract_feature_vector(std::span<const double> window, int period) {
    const std::size_t n = window.size();
    if (n < 4) throw Error(ErrorKind::invalid_argument, "window too short for features (< 4)");
    if (period < 2) throw Error(ErrorKind::invalid_argument, "seasonal period must be >= 2");

    FeatureVector fv;
    const bool constant = detail::is_constant(window);
    const auto m = detail::central_moments(window);
    const auto [mn_it, mx_it] = std::minmax_element(window.begin(), window.end());

    fv.set(Feature::basic_count, static_cast<double>(n));
    fv.set(Feature::basic_mean, m.mean);
    fv.set(Feature::basic_variance, m.m2);
    fv.set(Feature::basic_std, std::sqrt(m.m2));
    fv.set(Feature::basic_min, *mn_it);
    fv.set(Feature::basic_max, *mx_it);

    if (constant) {
        fv.flag(Feature::basic_skewness);
        fv.flag(Feature::basic_kurtosis);
    } else {
        fv.set(Feature::basic_skewness, skewness(window));
        fv.set(Feature::basic_kurtosis, kurtosis(window));
    }

    if (constant || n < 8)
        fv.flag(Feature::spectral_entropy);
    else
        fv.set(Feature::spectral_entropy, spectral_entropy(window));

    if (constant)
        fv.flag(Feature::xacf1);
    else
        fv.set(Feature::xacf1, acf_at_lag(window, 1));

    if (constant || n < 12)
        fv.flag(Feature::xacf10);
    else
        fv.set(Feature::xacf10, acf10_sum(window));

    const auto diff_family = [&](int order, Feature f1, Feature f10) {
        if (n < static_cast<std::size_t>(order) + 12) {
            fv.flag(f1);
            fv.flag(f10);
            return;
        }
        const auto d = detail::difference(window, order);
        if (detail::is_constant(d)) {
            fv.flag(f1);
            fv.flag(f10);
            return;
        }
        fv.set(f1, acf_at_lag(d, 1));
        fv.set(f10, acf10_sum(d));
    };
    diff_family(1, Feature::diff1_acf1, Feature::diff1_acf10);
    diff_family(2, Feature::diff2_acf1, Feature::diff2_acf10);

    if (constant)
        fv.flag(Feature::sample_entropy);
    else
        fv.set(Feature::sample_entropy, sample_entropy(window));

    const int tile = std::max(period, 10);
    if (constant || n < 2 * static_cast<std::size_t>(tile))
        fv.flag(Feature::lumpiness);
    else
        fv.set(Feature::lumpiness, lumpiness(window, tile));

    fv.set(Feature::flat_spots, flat_spots(window));
    fv.set(Feature::crossing_points, crossing_points(window));

    const std::size_t seasonal_min = std::max<std::size_t>(2 * static_cast<std::size_t>(period), 16);
    if (constant || n < seasonal_min) {
        fv.flag(Feature::seasonal_strength);
    } else {
        const auto s = detail::seasonal_stats(window, period);
        fv.set(Feature::seasonal_strength, s.strength);
        if (s.collapsed) fv.flag(Feature::seasonal_strength);
    }
    return fv;
}

/// Per-channel extraction, endogenous first. Exogenous features use the
/// lookback portion of the exogenous block only.
inline std::vector<std::pair<std::string, FeatureVector>>
extract_dataset_features(const std::vector<double>& endo_lookback,
                         const std::vector<std::vector<double>>& exo_matrix,
                         const std::string& endo_name,
                         const std::vector<std::string>& exo_names, int period) {
    if (exo_matrix.size() != exo_names.size())
        throw Error(ErrorKind::invalid_argument, "exogenous name count mismatch");
    std::vector<std::pair<std::string, FeatureVector>> out;
    const std::size_t lookback_len = endo_lookback.size();
    try {
        out.emplace_back(endo_name, extract_feature_vector(endo_lookback, period));
    } catch (const Error& e) {
        throw Error(e.kind(), "channel '" + endo_name + "': " + e.what());
    }
    for (std::size_t i = 0; i < exo_matrix.size(); ++i) {
        if (exo_matrix[i].size() < lookback_len)
            throw Error(ErrorKind::invalid_argument,
                        "channel '" + exo_names[i] + "': exogenous block shorter than lookback");
        std::span<const double> lb(exo_matrix[i].data(), lookback_len);
        try {
            out.emplace_back(exo_names[i], extract_feature_vector(lb, period));
        } catch (const Error& e) {
            throw Error(e.kind(), "channel '" + exo_names[i] + "': " + e.what());
        }
    }
    return out;
}

} // namespace alphacast
