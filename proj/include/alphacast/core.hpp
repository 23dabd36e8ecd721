#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "alphacast/errors.hpp"
#include "alphacast/hash.hpp"
#include "alphacast/time.hpp"

namespace alphacast {

/// One channel: samples on a shared, strictly increasing, fixed-spacing grid.
/// Construction-time validation lives in ingest; everything downstream treats
/// instances as immutable values.
struct TimeSeries {
    std::vector<Instant> timestamps;
    std::vector<double> values;
    std::string name;
    std::string description;

    std::size_t size() const noexcept { return values.size(); }
};

struct DataProfile {
    std::string dataset_name;
    std::string domain_description;
    std::map<std::string, std::string> variable_descriptions;
    std::string frequency_text;
};

/// Half-open index range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    bool operator==(const IndexRange&) const = default;
};

struct SplitRanges {
    IndexRange train;
    IndexRange validation;
    IndexRange test;
};

/// One endogenous channel plus d exogenous channels on the same grid.
struct Dataset {
    TimeSeries endogenous;
    std::vector<TimeSeries> exogenous;
    DataProfile profile;
    Frequency frequency;
    SplitRanges splits;

    std::size_t size() const noexcept { return endogenous.size(); }
    std::size_t exogenous_count() const noexcept { return exogenous.size(); }

    /// Value-sensitive fingerprint binding case libraries and reports to this
    /// exact data: covers channel names, timestamps, samples and splits.
    std::uint64_t fingerprint() const {
        Fnv1a h;
        h.str(profile.dataset_name).str(endogenous.name).u64(endogenous.size());
        for (Instant t : endogenous.timestamps) h.i64(t);
        for (double v : endogenous.values) h.f64(v);
        for (const auto& ch : exogenous) {
            h.str(ch.name).u64(ch.size());
            for (double v : ch.values) h.f64(v);
        }
        h.u64(splits.train.begin).u64(splits.train.end);
        h.u64(splits.validation.begin).u64(splits.validation.end);
        h.u64(splits.test.begin).u64(splits.test.end);
        return h.value();
    }
};

/// One forecasting episode: the last observed sample sits at anchor_index,
/// the lookback covers [anchor-H+1, anchor], the horizon (anchor, anchor+L].
struct ForecastTask {
    int lookback_len = 0;
    int horizon_len = 0;
    std::size_t anchor_index = 0;
    std::string task_prompt;
};

struct Window {
    std::vector<double> lookback;
    std::optional<std::vector<double>> future;
    std::size_t anchor_index = 0;
    std::string channel;
};

/// Everything slice_task_inputs hands to feature extraction and grounding.
/// timestamps spans lookback plus horizon; truth is absent in deployment mode
/// (anchor at the series tail).
struct TaskInputs {
    std::vector<double> endo_lookback;
    std::vector<std::vector<double>> exo_matrix; // d rows, each lookback_len + horizon_len wide
    std::vector<Instant> timestamps;             // lookback_len + horizon_len instants
    std::optional<std::vector<double>> truth;    // horizon_len values when available
};

/// All windows inside `range` whose lookback and future both fit, anchors
/// spaced by `stride` in ascending order. Count is
/// floor((range_len - H - L) / stride) + 1 when that is non-negative.
inline std::vector<Window> enumerate_windows(const TimeSeries& series, IndexRange range,
                                             int lookback_len, int horizon_len, int stride) {
    if (lookback_len < 1 || horizon_len < 1 || stride < 1)
        throw Error(ErrorKind::invalid_argument, "lookback, horizon and stride must be >= 1");
    if (range.end > series.size() || range.begin > range.end)
        throw Error(ErrorKind::invalid_argument, "range outside series");
    const std::size_t need = static_cast<std::size_t>(lookback_len) + static_cast<std::size_t>(horizon_len);
    if (range.size() < need)
        throw Error(ErrorKind::range_too_short,
                    "range of length " + std::to_string(range.size()) + " cannot fit lookback " +
                        std::to_string(lookback_len) + " plus horizon " + std::to_string(horizon_len));

    std::vector<Window> out;
    const std::size_t first_anchor = range.begin + static_cast<std::size_t>(lookback_len) - 1;
    const std::size_t last_anchor = range.end - static_cast<std::size_t>(horizon_len) - 1;
    for (std::size_t anchor = first_anchor; anchor <= last_anchor;
         anchor += static_cast<std::size_t>(stride)) {
        Window w;
        w.anchor_index = anchor;
        w.channel = series.name;
        w.lookback.assign(series.values.begin() + static_cast<std::ptrdiff_t>(anchor - lookback_len + 1),
                          series.values.begin() + static_cast<std::ptrdiff_t>(anchor + 1));
        w.future.emplace(series.values.begin() + static_cast<std::ptrdiff_t>(anchor + 1),
                         series.values.begin() + static_cast<std::ptrdiff_t>(anchor + 1 + horizon_len));
        out.push_back(std::move(w));
    }
    return out;
}

/// Slices the endogenous lookback, the d x (H+L) exogenous block and the H+L
/// timestamp row for one task. Exogenous channels must cover the horizon (they
/// are forecasts or covariates known ahead of time); when the horizon runs past
/// the end of the data this is an error for d > 0 and deployment mode for d = 0,
/// with horizon timestamps generated by fixed-frequency stepping.
inline TaskInputs slice_task_inputs(const Dataset& dataset, const ForecastTask& task) {
    const int H = task.lookback_len;
    const int L = task.horizon_len;
    if (H < 1 || L < 1)
        throw Error(ErrorKind::invalid_argument, "lookback and horizon must be >= 1");
    const std::size_t n = dataset.size();
    if (task.anchor_index >= n || task.anchor_index + 1 < static_cast<std::size_t>(H))
        throw Error(ErrorKind::invalid_argument,
                    "anchor " + std::to_string(task.anchor_index) + " leaves no room for lookback " +
                        std::to_string(H));
    const std::size_t lb_begin = task.anchor_index + 1 - static_cast<std::size_t>(H);
    const bool horizon_observed = task.anchor_index + static_cast<std::size_t>(L) < n;
    if (!horizon_observed && !dataset.exogenous.empty())
        throw Error(ErrorKind::missing_covariate,
                    "exogenous horizon values unavailable past the end of the data");

    TaskInputs out;
    out.endo_lookback.assign(dataset.endogenous.values.begin() + static_cast<std::ptrdiff_t>(lb_begin),
                             dataset.endogenous.values.begin() +
                                 static_cast<std::ptrdiff_t>(task.anchor_index + 1));
    const std::size_t span = static_cast<std::size_t>(H) + static_cast<std::size_t>(L);
    for (const auto& ch : dataset.exogenous) {
        out.exo_matrix.emplace_back(ch.values.begin() + static_cast<std::ptrdiff_t>(lb_begin),
                                    ch.values.begin() + static_cast<std::ptrdiff_t>(lb_begin + span));
    }
    out.timestamps.reserve(span);
    for (std::size_t i = 0; i < span; ++i) {
        const std::size_t idx = lb_begin + i;
        if (idx < n)
            out.timestamps.push_back(dataset.endogenous.timestamps[idx]);
        else
            out.timestamps.push_back(dataset.endogenous.timestamps[n - 1] +
                                     static_cast<Instant>(idx - (n - 1)) * dataset.frequency.step_seconds);
    }
    if (horizon_observed) {
        out.truth.emplace(dataset.endogenous.values.begin() +
                              static_cast<std::ptrdiff_t>(task.anchor_index + 1),
                          dataset.endogenous.values.begin() +
                              static_cast<std::ptrdiff_t>(task.anchor_index + 1 + L));
    }
    return out;
}

/// Fetches the truth vector for a task, if the horizon is fully observed.
inline std::optional<std::vector<double>> task_truth(const Dataset& dataset, const ForecastTask& task) {
    if (task.anchor_index + static_cast<std::size_t>(task.horizon_len) >= dataset.size())
        return std::nullopt;
    return std::vector<double>(dataset.endogenous.values.begin() +
                                   static_cast<std::ptrdiff_t>(task.anchor_index + 1),
                               dataset.endogenous.values.begin() +
                                   static_cast<std::ptrdiff_t>(task.anchor_index + 1 + task.horizon_len));
}

} // namespace alphacast
