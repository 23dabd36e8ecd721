#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "alphacast/core.hpp"
#include "alphacast/errors.hpp"
#include "alphacast/kmeans.hpp"
#include "alphacast/time.hpp"

namespace alphacast {

/// Parameters of the deterministic synthetic generator used by tests and the
/// `synth` command. With noise_sd = 0, trend = 0 and weekly_amplitude = 0 the
/// endogenous series is exactly period-periodic.
struct SyntheticSpec {
    std::string name = "synthetic";
    std::array<std::size_t, 3> split_sizes{0, 0, 0};
    std::string frequency = "1h";
    std::string start = "2016-01-01 00:00";
    int exo_count = 0;
    std::uint64_t seed = 7;
    double level = 50.0;
    double daily_amplitude = 10.0;
    double weekly_amplitude = 4.0;
    double trend_per_step = 0.0;
    double noise_sd = 1.0;

    std::size_t total() const { return split_sizes[0] + split_sizes[1] + split_sizes[2]; }
};

namespace detail {

/// Portable standard normal from two uniform draws (Box–Muller).
inline double gauss(std::mt19937_64& rng) {
    double u1 = u01(rng);
    while (u1 <= 0.0) u1 = u01(rng);
    const double u2 = u01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace detail

inline Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
    if (spec.total() == 0)
        throw Error(ErrorKind::invalid_argument, "synthetic dataset needs a positive size");
    const std::size_t n = spec.total();
    const Frequency freq = parse_frequency(spec.frequency);
    const int period = season_period(freq);
    const Instant start = parse_instant(spec.start);
    std::mt19937_64 rng(spec.seed);

    Dataset ds;
    ds.frequency = freq;
    ds.profile.dataset_name = spec.name;
    ds.profile.frequency_text = freq.text;
    ds.profile.domain_description =
        "Synthetic seasonal series with " + std::to_string(spec.exo_count) +
        " exogenous drivers.";
    ds.endogenous.name = "target";
    ds.endogenous.description = "synthetic endogenous variable";
    ds.profile.variable_descriptions["target"] = ds.endogenous.description;

    std::vector<double> phases(static_cast<std::size_t>(spec.exo_count));
    for (auto& p : phases) p = detail::u01(rng) * 2.0 * std::numbers::pi;

    ds.exogenous.resize(static_cast<std::size_t>(spec.exo_count));
    for (std::size_t e = 0; e < ds.exogenous.size(); ++e) {
        ds.exogenous[e].name = "driver" + std::to_string(e + 1);
        ds.exogenous[e].description = "synthetic exogenous driver " + std::to_string(e + 1);
        ds.profile.variable_descriptions[ds.exogenous[e].name] = ds.exogenous[e].description;
    }

    const double w_day = 2.0 * std::numbers::pi / static_cast<double>(period);
    const double w_week = w_day / 7.0;
    for (std::size_t t = 0; t < n; ++t) {
        const Instant ts = start + static_cast<Instant>(t) * freq.step_seconds;
        const double td = static_cast<double>(t);
        double v = spec.level + spec.trend_per_step * td +
                   spec.daily_amplitude * std::sin(w_day * td) +
                   spec.weekly_amplitude * std::sin(w_week * td);
        if (spec.noise_sd > 0.0) v += spec.noise_sd * detail::gauss(rng);
        ds.endogenous.timestamps.push_back(ts);
        ds.endogenous.values.push_back(v);
        for (std::size_t e = 0; e < ds.exogenous.size(); ++e) {
            double x = 0.3 * spec.level +
                       0.5 * spec.daily_amplitude * std::sin(w_day * td + phases[e]);
            if (spec.noise_sd > 0.0) x += 0.5 * spec.noise_sd * detail::gauss(rng);
            ds.exogenous[e].timestamps.push_back(ts);
            ds.exogenous[e].values.push_back(x);
        }
    }

    ds.splits.train = {0, spec.split_sizes[0]};
    ds.splits.validation = {ds.splits.train.end, ds.splits.train.end + spec.split_sizes[1]};
    ds.splits.test = {ds.splits.validation.end, ds.splits.validation.end + spec.split_sizes[2]};
    return ds;
}

/// Named dataset shapes matching the public benchmarks' sizes, frequencies
/// and channel counts, filled with synthetic values.
inline SyntheticSpec synthetic_shape(const std::string& shape) {
    SyntheticSpec spec;
    spec.name = shape;
    if (shape == "np") {
        spec.split_sizes = {10224, 1584, 3024};
        spec.frequency = "1h";
        spec.exo_count = 2;
    } else if (shape == "etth1") {
        spec.name = "ETTh1";
        spec.split_sizes = {8544, 1344, 2544};
        spec.frequency = "1h";
        spec.exo_count = 6;
    } else if (shape == "ettm") {
        spec.name = "ETTm";
        spec.split_sizes = {34560, 11520, 11520};
        spec.frequency = "15min";
        spec.exo_count = 6;
    } else if (shape == "periodic") {
        spec.split_sizes = {1200, 240, 480};
        spec.frequency = "1h";
        spec.exo_count = 0;
        spec.weekly_amplitude = 0.0;
        spec.trend_per_step = 0.0;
        spec.noise_sd = 0.0;
    } else {
        throw Error(ErrorKind::invalid_argument, "unknown synthetic shape '" + shape + "'");
    }
    return spec;
}

} // namespace alphacast
