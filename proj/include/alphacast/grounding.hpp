#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "alphacast/core.hpp"
#include "alphacast/errors.hpp"
#include "alphacast/features.hpp"
#include "alphacast/knowledge.hpp"
#include "alphacast/time.hpp"

namespace alphacast {

/// Maskable prompt sections. `timestamps` and `exogenous` remove columns from
/// the series block; `attributes` strips descriptive text from the data
/// profile; the rest remove whole sections.
enum class Section {
    features,
    knowledge,
    context_events,
    auxiliary,
    neighbor,
    exogenous,
    timestamps,
    attributes,
};

using AblationMask = std::set<Section>;

struct SelectedFeature {
    Feature id{};
    double value = 0.0;
    bool degenerate = false;
};

struct ChannelFeatures {
    std::string channel;
    std::vector<SelectedFeature> features;
};

struct NeighborSnapshot {
    std::vector<double> lookback;
    std::vector<double> future;
};

/// The standardized contextual input: everything one generation call may see,
/// in structured form. serialize_prompt turns it into the wire document.
struct ContextBundle {
    std::string task_prompt;
    std::string dataset_name;
    std::string domain_description;
    std::string frequency_text;
    std::string endo_name;
    std::string endo_description;
    std::vector<std::string> exo_names;
    std::vector<std::string> exo_descriptions;

    std::size_t lookback_len = 0;
    std::size_t horizon_len = 0;
    std::vector<Instant> timestamps;             // lookback + horizon instants
    std::vector<std::vector<double>> exogenous;  // d rows, each lookback + horizon wide
    std::vector<double> endogenous;              // lookback values only

    std::vector<ChannelFeatures> selected_features;
    std::vector<KnowledgeEntry> knowledge;
    std::vector<ContextEvent> context_events;
    std::optional<std::vector<double>> auxiliary_forecast;
    std::optional<NeighborSnapshot> neighbor_case;

    AblationMask ablation_mask;
    std::optional<std::string> reflection_feedback;
    std::optional<std::vector<double>> partial_forecast; // second stage of two-stage mode

    /// How many values the backend must emit (horizon_len except in
    /// two-stage mode, where each call covers part of the horizon).
    std::size_t output_count = 0;
};

/// Builds the bundle for one task, dropping masked content at the source so
/// the bundle itself — not just the rendered document — honors the mask.
inline ContextBundle assemble_bundle(const ForecastTask& task, const Dataset& dataset,
                                     const TaskInputs& inputs,
                                     const std::vector<ChannelFeatures>& selected,
                                     const std::vector<KnowledgeEntry>& knowledge,
                                     const std::vector<ContextEvent>& events,
                                     const std::optional<std::vector<double>>& auxiliary,
                                     const std::optional<NeighborSnapshot>& neighbor,
                                     const AblationMask& mask) {
    const auto H = static_cast<std::size_t>(task.lookback_len);
    const auto L = static_cast<std::size_t>(task.horizon_len);
    auto mismatch = [](const std::string& section, std::size_t got, std::size_t want) {
        throw Error(ErrorKind::assembly_mismatch, section + ": length " + std::to_string(got) +
                                                      ", expected " + std::to_string(want));
    };
    if (inputs.endo_lookback.size() != H) mismatch("endogenous", inputs.endo_lookback.size(), H);
    if (inputs.timestamps.size() != H + L) mismatch("timestamps", inputs.timestamps.size(), H + L);
    for (const auto& row : inputs.exo_matrix)
        if (row.size() != H + L) mismatch("exogenous", row.size(), H + L);
    if (inputs.exo_matrix.size() != dataset.exogenous_count())
        mismatch("exogenous", inputs.exo_matrix.size(), dataset.exogenous_count());
    if (auxiliary && auxiliary->size() != L) mismatch("auxiliary forecast", auxiliary->size(), L);
    if (neighbor) {
        if (neighbor->lookback.size() != H) mismatch("neighbor case", neighbor->lookback.size(), H);
        if (neighbor->future.size() != L) mismatch("neighbor case", neighbor->future.size(), L);
    }

    ContextBundle b;
    b.task_prompt = task.task_prompt;
    b.dataset_name = dataset.profile.dataset_name;
    b.domain_description = dataset.profile.domain_description;
    b.frequency_text = dataset.frequency.text;
    b.endo_name = dataset.endogenous.name;
    b.endo_description = dataset.endogenous.description;
    for (const auto& exo : dataset.exogenous) {
        b.exo_names.push_back(exo.name);
        b.exo_descriptions.push_back(exo.description);
    }
    b.lookback_len = H;
    b.horizon_len = L;
    b.output_count = L;
    b.timestamps = inputs.timestamps;
    b.endogenous = inputs.endo_lookback;
    b.ablation_mask = mask;
    if (!mask.contains(Section::exogenous)) b.exogenous = inputs.exo_matrix;
    if (!mask.contains(Section::features)) b.selected_features = selected;
    if (!mask.contains(Section::knowledge)) b.knowledge = knowledge;
    if (!mask.contains(Section::context_events)) b.context_events = events;
    if (!mask.contains(Section::auxiliary)) b.auxiliary_forecast = auxiliary;
    if (!mask.contains(Section::neighbor)) b.neighbor_case = neighbor;
    return b;
}

namespace detail {

inline std::string num6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string join6(const std::vector<double>& v, const char* sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += num6(v[i]);
    }
    return out;
}

} // namespace detail

/// Renders the canonical prompt document: fixed section order, stable "(none)"
/// markers for empty enabled sections, 6-significant-digit numerics. Identical
/// bundles yield byte-identical documents.
inline std::string serialize_prompt(const ContextBundle& b) {
    const auto& mask = b.ablation_mask;
    std::ostringstream out;

    out << "[TASK]\n" << b.task_prompt << "\n\n";

    out << "[DATA PROFILE]\n";
    out << "dataset: " << b.dataset_name << "\n";
    out << "frequency: " << b.frequency_text << "\n";
    out << "lookback: " << b.lookback_len << " steps, horizon: " << b.horizon_len << " steps\n";
    if (!mask.contains(Section::attributes)) {
        if (!b.domain_description.empty()) out << b.domain_description << "\n";
        out << "variables:\n";
        out << "  " << b.endo_name << " (target)";
        if (!b.endo_description.empty()) out << ": " << b.endo_description;
        out << "\n";
        for (std::size_t i = 0; i < b.exo_names.size(); ++i) {
            out << "  " << b.exo_names[i];
            if (!b.exo_descriptions[i].empty()) out << ": " << b.exo_descriptions[i];
            out << "\n";
        }
    }
    out << "\n";

    const bool with_ts = !mask.contains(Section::timestamps);
    const bool with_exo = !mask.contains(Section::exogenous) && !b.exogenous.empty();
    out << "[SERIES]\n";
    if (with_ts) out << "timestamp,";
    if (with_exo)
        for (const auto& name : b.exo_names) out << name << ",";
    out << b.endo_name << "\n";
    for (std::size_t t = 0; t < b.lookback_len + b.horizon_len; ++t) {
        if (with_ts) out << format_instant(b.timestamps[t]) << ",";
        if (with_exo)
            for (const auto& row : b.exogenous) out << detail::num6(row[t]) << ",";
        if (t < b.lookback_len)
            out << detail::num6(b.endogenous[t]);
        else
            out << "?";
        out << "\n";
    }
    out << "\n";

    if (!mask.contains(Section::features)) {
        out << "[FEATURES]\n";
        if (b.selected_features.empty()) out << "(none)\n";
        for (const auto& ch : b.selected_features) {
            out << ch.channel << ":";
            if (ch.features.empty()) out << " (none)";
            for (std::size_t i = 0; i < ch.features.size(); ++i) {
                out << (i ? ", " : " ") << feature_name(ch.features[i].id) << "=";
                if (ch.features[i].degenerate)
                    out << "degenerate";
                else
                    out << detail::num6(ch.features[i].value);
            }
            out << "\n";
        }
        out << "\n";
    }

    if (!mask.contains(Section::knowledge)) {
        out << "[KNOWLEDGE]\n";
        if (b.knowledge.empty()) out << "(none)\n";
        for (const auto& e : b.knowledge)
            out << "- (" << knowledge_kind_name(e.kind) << ") " << e.body << "\n";
        out << "\n";
    }

    if (!mask.contains(Section::context_events)) {
        out << "[CONTEXT EVENTS]\n";
        if (b.context_events.empty()) out << "(none)\n";
        for (const auto& e : b.context_events)
            out << "- " << format_instant(e.start) << " .. " << format_instant(e.end) << " ["
                << e.category << "] " << e.body << "\n";
        out << "\n";
    }

    if (!mask.contains(Section::auxiliary)) {
        out << "[AUXILIARY FORECAST]\n";
        if (!b.auxiliary_forecast)
            out << "(none)\n";
        else
            for (double v : *b.auxiliary_forecast) out << detail::num6(v) << "\n";
        out << "\n";
    }

    if (!mask.contains(Section::neighbor)) {
        out << "[NEIGHBOR CASE]\n";
        if (!b.neighbor_case) {
            out << "(none)\n";
        } else {
            out << "lookback: " << detail::join6(b.neighbor_case->lookback) << "\n";
            out << "outcome: " << detail::join6(b.neighbor_case->future) << "\n";
        }
        out << "\n";
    }

    if (b.partial_forecast) {
        out << "[PARTIAL FORECAST]\n";
        out << "The first " << b.partial_forecast->size()
            << " horizon values are already fixed:\n";
        for (double v : *b.partial_forecast) out << detail::num6(v) << "\n";
        out << "\n";
    }

    if (b.reflection_feedback) {
        out << "[REFLECTION FEEDBACK]\n" << *b.reflection_feedback << "\n\n";
    }

    const std::size_t count = b.output_count ? b.output_count : b.horizon_len;
    out << "[OUTPUT FORMAT]\n";
    out << "Respond with exactly " << count
        << " values, one number per line, inside a fenced code block (```). ";
    if (b.partial_forecast)
        out << "These continue the fixed values above and complete the horizon. ";
    out << "After the block, write a REASONING section explaining the forecast.\n";
    return out.str();
}

struct ParsedForecast {
    std::vector<double> forecast;
    std::string cot;
};

/// Extracts the first fenced block and parses exactly `expected` finite
/// numbers from it; everything outside that block becomes the chain of
/// thought. Failure kinds are distinct so the repair loop can react.
inline ParsedForecast parse_forecast_response(const std::string& text, std::size_t expected) {
    const auto open = text.find("```");
    if (open == std::string::npos)
        throw Error(ErrorKind::missing_block, "response contains no fenced block");
    auto body_start = text.find('\n', open);
    if (body_start == std::string::npos)
        throw Error(ErrorKind::missing_block, "fenced block never opens a line");
    ++body_start;
    const auto close = text.find("```", body_start);
    if (close == std::string::npos)
        throw Error(ErrorKind::missing_block, "fenced block never closes");

    ParsedForecast out;
    const std::string block = text.substr(body_start, close - body_start);
    std::size_t i = 0;
    while (i < block.size()) {
        while (i < block.size() && (std::isspace(static_cast<unsigned char>(block[i])) || block[i] == ','))
            ++i;
        if (i >= block.size()) break;
        std::size_t j = i;
        while (j < block.size() && !std::isspace(static_cast<unsigned char>(block[j])) && block[j] != ',')
            ++j;
        const std::string_view token(block.data() + i, j - i);
        double v = 0.0;
        const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
        if (res.ec != std::errc{} || res.ptr != token.data() + token.size() || !std::isfinite(v))
            throw Error(ErrorKind::non_numeric,
                        "token '" + std::string(token) + "' is not a finite number");
        out.forecast.push_back(v);
        i = j;
    }
    if (out.forecast.size() != expected)
        throw Error(ErrorKind::wrong_count, "expected " + std::to_string(expected) +
                                                " values, found " +
                                                std::to_string(out.forecast.size()));
    std::string cot = text.substr(0, open);
    cot += text.substr(std::min(text.size(), close + 3));
    const auto a = cot.find_first_not_of(" \t\n");
    const auto z = cot.find_last_not_of(" \t\n");
    out.cot = a == std::string::npos ? std::string() : cot.substr(a, z - a + 1);
    return out;
}

/// The inverse of parse_forecast_response at full precision; stub backends
/// and tests render replies with it.
inline std::string render_forecast_document(const std::vector<double>& forecast,
                                            const std::string& cot) {
    std::ostringstream out;
    out << "```\n";
    char buf[40];
    for (double v : forecast) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf << "\n";
    }
    out << "```\nREASONING\n" << cot << "\n";
    return out.str();
}

} // namespace alphacast
