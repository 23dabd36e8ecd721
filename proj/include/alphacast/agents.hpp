#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphacast/backend.hpp"
#include "alphacast/caselib.hpp"
#include "alphacast/core.hpp"
#include "alphacast/features.hpp"
#include "alphacast/grounding.hpp"
#include "alphacast/hash.hpp"
#include "alphacast/knowledge.hpp"

namespace alphacast {

enum class SelectionPolicy { static_all, rule_based, backend_advised };

inline std::string_view selection_policy_name(SelectionPolicy p) {
    switch (p) {
    case SelectionPolicy::static_all: return "static-all";
    case SelectionPolicy::rule_based: return "rule-based";
    case SelectionPolicy::backend_advised: return "backend-advised";
    }
    return "static-all";
}

inline std::optional<SelectionPolicy> selection_policy_from_name(std::string_view name) {
    if (name == "static-all") return SelectionPolicy::static_all;
    if (name == "rule-based") return SelectionPolicy::rule_based;
    if (name == "backend-advised") return SelectionPolicy::backend_advised;
    return std::nullopt;
}

enum class Verdict { accept, revise };

struct SessionConfig {
    int max_iterations = 3;
    int parse_retries = 2;
    SelectionPolicy selection = SelectionPolicy::static_all;
    double seasonal_keep_threshold = 0.3;
    bool reflection_enabled = true;
    bool two_stage = false;
    RetrievalConfig retrieval;
    AblationMask mask;
};

/// One generator round as recorded in the session: the parsed forecast (empty
/// when parsing failed), the chain of thought, and the reflector's response.
struct Attempt {
    std::vector<double> forecast;
    std::string cot;
    Verdict verdict = Verdict::revise;
    std::string feedback;
    std::optional<double> plausibility;
    std::optional<double> coherence;
    std::uint64_t prompt_hash = 0;
    bool parse_failed = false;
};

struct ForecastSession {
    ForecastTask task;
    std::vector<ContextBundle> bundle_history;
    std::vector<Attempt> attempts;
    int iteration_count = 0;
    std::vector<double> final_forecast;
    std::string final_explanation;
    std::vector<std::string> feature_usage; // "channel:feature" pairs, sorted unique
    std::size_t channel_count = 0;
    std::vector<std::string> warnings;
    int generator_calls = 0;
};

struct Investigation {
    std::vector<ChannelFeatures> selected;
    std::vector<std::string> usage; // "channel:feature"
    std::vector<std::string> warnings;
};

namespace detail {

inline ChannelFeatures select_all(const std::string& channel, const FeatureVector& fv) {
    ChannelFeatures out{channel, {}};
    for (int i = 0; i < kFeatureCount; ++i) {
        const auto f = static_cast<Feature>(i);
        out.features.push_back({f, fv.at(f), fv.is_degenerate(f)});
    }
    return out;
}

inline ChannelFeatures select_by_rule(const std::string& channel, const FeatureVector& fv,
                                      double seasonal_threshold) {
    ChannelFeatures out{channel, {}};
    for (int i = 0; i < kFeatureCount; ++i) {
        const auto f = static_cast<Feature>(i);
        if (fv.is_degenerate(f)) continue;
        if (f == Feature::seasonal_strength && !(fv.at(f) > seasonal_threshold)) continue;
        out.features.push_back({f, fv.at(f), false});
    }
    return out;
}

inline std::vector<std::string> tokenize_names(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
            cur += c;
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

} // namespace detail

/// Feature selection (the investigator's core duty). static-all passes every
/// feature; rule-based drops degenerate ones and weak seasonality;
/// backend-advised asks the backend for a name list, validated against the
/// known roster. An unreachable advisor degrades to static-all rather than
/// failing the session.
inline Investigation investigate(const std::vector<std::pair<std::string, FeatureVector>>& features,
                                 SelectionPolicy policy, const BackendPtr& advisor = nullptr,
                                 double seasonal_threshold = 0.3) {
    Investigation inv;
    std::vector<bool> advised(kFeatureCount, true);
    if (policy == SelectionPolicy::backend_advised) {
        std::ostringstream prompt;
        prompt << "Select the forecasting features worth keeping for this task.\n";
        prompt << "Known features:";
        for (const auto& name : kFeatureNames) prompt << " " << name;
        prompt << "\nComputed values per channel:\n";
        for (const auto& [channel, fv] : features) {
            prompt << channel << ":";
            for (int i = 0; i < kFeatureCount; ++i) {
                const auto f = static_cast<Feature>(i);
                prompt << " " << feature_name(f) << "="
                       << (fv.is_degenerate(f) ? "degenerate" : detail::num6(fv.at(f)));
            }
            prompt << "\n";
        }
        prompt << "Reply with the feature names to keep, comma separated.\n";
        try {
            if (!advisor) throw Error(ErrorKind::transport, "no advisor backend bound");
            GenerationRequest req;
            req.prompt = prompt.str();
            const std::string reply = advisor->complete(req);
            advised.assign(kFeatureCount, false);
            bool any = false;
            for (const auto& token : detail::tokenize_names(reply)) {
                if (const auto f = feature_from_name(token)) {
                    advised[static_cast<std::size_t>(*f)] = true;
                    any = true;
                } else {
                    inv.warnings.push_back("advisor proposed unknown feature '" + token + "'");
                }
            }
            if (!any) {
                inv.warnings.push_back("advisor proposed no known features; keeping all");
                advised.assign(kFeatureCount, true);
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::transport) throw;
            inv.warnings.push_back(std::string("feature advisor unreachable (") + e.what() +
                                   "); keeping all features");
        }
    }

    for (const auto& [channel, fv] : features) {
        ChannelFeatures ch = policy == SelectionPolicy::rule_based
                                 ? detail::select_by_rule(channel, fv, seasonal_threshold)
                                 : detail::select_all(channel, fv);
        if (policy == SelectionPolicy::backend_advised) {
            std::erase_if(ch.features, [&](const SelectedFeature& sf) {
                return !advised[static_cast<std::size_t>(sf.id)];
            });
        }
        for (const auto& sf : ch.features)
            inv.usage.push_back(channel + ":" + std::string(feature_name(sf.id)));
        inv.selected.push_back(std::move(ch));
    }
    std::sort(inv.usage.begin(), inv.usage.end());
    inv.usage.erase(std::unique(inv.usage.begin(), inv.usage.end()), inv.usage.end());
    return inv;
}

struct GenerateResult {
    std::vector<double> forecast;
    std::string cot;
    std::vector<Attempt> parse_failures; // attempts burned on unparseable replies
    int calls = 0;
};

/// One generation exchange with the repair loop: on a parse error the prompt
/// is re-sent once per retry with the error appended, then the whole call
/// fails. Transport errors pass straight through.
inline GenerateResult generate(const ContextBundle& bundle, const BackendPtr& backend,
                               GenerationStage stage, int parse_retries) {
    GenerateResult out;
    GenerationRequest req;
    req.prompt = serialize_prompt(bundle);
    req.bundle = &bundle;
    req.stage = stage;
    req.expected_count = bundle.output_count ? bundle.output_count : bundle.horizon_len;

    for (int round = 0; round <= parse_retries; ++round) {
        const std::string reply = backend->complete(req);
        ++out.calls;
        try {
            auto parsed = parse_forecast_response(reply, req.expected_count);
            out.forecast = std::move(parsed.forecast);
            out.cot = std::move(parsed.cot);
            return out;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::missing_block && e.kind() != ErrorKind::wrong_count &&
                e.kind() != ErrorKind::non_numeric)
                throw;
            Attempt failed;
            failed.cot = reply;
            failed.feedback = std::string("parse error: ") + e.what();
            failed.parse_failed = true;
            failed.prompt_hash = hash_string(req.prompt);
            out.parse_failures.push_back(std::move(failed));
            req.prompt += "\n[REPAIR]\nYour previous reply was invalid: ";
            req.prompt += e.what();
            req.prompt += "\nRespond again following [OUTPUT FORMAT] exactly.\n";
        }
    }
    throw Error(ErrorKind::parse_error,
                "backend reply unparseable after " + std::to_string(parse_retries) + " repairs");
}

struct Reflection {
    Verdict verdict = Verdict::revise;
    std::string feedback;
    std::optional<double> plausibility;
    std::optional<double> coherence;
    std::vector<std::string> notes;
};

/// Renders the two-part reflection prompt: part 1 audits the forecast against
/// the auxiliary evidence, the lookback range and the context events; part 2
/// audits the chain of thought itself.
inline std::string render_reflection_prompt(const ContextBundle& bundle,
                                            const std::vector<double>& forecast,
                                            const std::string& cot) {
    std::ostringstream out;
    out << "[REFLECTION TASK]\n";
    out << "Audit the forecast below in two parts.\n";
    out << "Part 1 (forecast level): is it sufficiently reliable and supported by the "
           "evidence? Compare it with the auxiliary forecast, the range of the recent "
           "lookback, and the listed context events.\n";
    out << "Part 2 (reasoning level): audit the chain of thought step by step for "
           "hallucinations, circular reasoning, and skipped steps.\n\n";
    out << "[FORECAST]\n" << detail::join6(forecast) << "\n\n";
    out << "[CHAIN OF THOUGHT]\n" << (cot.empty() ? "(none)" : cot) << "\n\n";
    out << "[EVIDENCE]\n";
    out << "lookback range: [" << detail::num6(*std::min_element(bundle.endogenous.begin(),
                                                                 bundle.endogenous.end()))
        << ", " << detail::num6(*std::max_element(bundle.endogenous.begin(),
                                                  bundle.endogenous.end()))
        << "]\n";
    if (bundle.auxiliary_forecast)
        out << "auxiliary forecast: " << detail::join6(*bundle.auxiliary_forecast) << "\n";
    for (const auto& e : bundle.context_events)
        out << "event: [" << e.category << "] " << e.body << "\n";
    out << "\n[OUTPUT FORMAT]\n";
    out << "Reply with:\nVERDICT: accept|revise\nFEEDBACK: <one-line guidance>\n"
           "SCORES: plausibility=<0-1> coherence=<0-1> (optional)\n";
    return out.str();
}

/// Parses the reflection grammar. A malformed or absent verdict becomes
/// revise with a note; a transport failure becomes accept with a warning —
/// reflection must never deadlock or discard a produced forecast.
inline Reflection reflect(const ContextBundle& bundle, const std::vector<double>& forecast,
                          const std::string& cot, const BackendPtr& backend) {
    Reflection r;
    std::string reply;
    try {
        GenerationRequest req;
        req.prompt = render_reflection_prompt(bundle, forecast, cot);
        req.bundle = &bundle;
        reply = backend->complete(req);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::transport) throw;
        r.verdict = Verdict::accept;
        r.feedback = "(reflector unreachable)";
        r.notes.push_back(std::string("reflector transport failure: ") + e.what() +
                          "; accepting by default");
        return r;
    }

    bool verdict_seen = false;
    std::istringstream lines(reply);
    std::string line;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto z = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, z - a + 1);
    };
    while (std::getline(lines, line)) {
        line = trim(line);
        if (line.rfind("VERDICT:", 0) == 0) {
            const std::string v = trim(line.substr(8));
            if (v == "accept") {
                r.verdict = Verdict::accept;
                verdict_seen = true;
            } else if (v == "revise") {
                r.verdict = Verdict::revise;
                verdict_seen = true;
            } else {
                r.notes.push_back("malformed verdict '" + v + "'; defaulting to revise");
                r.verdict = Verdict::revise;
                verdict_seen = true;
            }
        } else if (line.rfind("FEEDBACK:", 0) == 0) {
            r.feedback = trim(line.substr(9));
        } else if (line.rfind("SCORES:", 0) == 0) {
            std::istringstream scores(line.substr(7));
            std::string token;
            while (scores >> token) {
                const auto eq = token.find('=');
                if (eq == std::string::npos) continue;
                try {
                    const double v = std::stod(token.substr(eq + 1));
                    if (token.rfind("plausibility", 0) == 0) r.plausibility = v;
                    if (token.rfind("coherence", 0) == 0) r.coherence = v;
                } catch (const std::exception&) {
                    r.notes.push_back("unparseable score token '" + token + "'");
                }
            }
        }
    }
    if (!verdict_seen) {
        r.verdict = Verdict::revise;
        r.notes.push_back("reply carried no verdict; defaulting to revise");
    }
    return r;
}

/// The full investigator → generator → reflector loop for one task.
/// Termination and fallback guarantees:
///  - at most max_iterations reflection rounds;
///  - on exhaustion the best-plausibility attempt wins, ties to the latest;
///  - generator failure falls back to the auxiliary forecast, else naive
///    last-value repetition, so the session always ends with a finite
///    forecast of the right length.
inline ForecastSession run_session(const ForecastTask& task, const Dataset& dataset,
                                   const CaseLibrary* library, const KnowledgeStore& store,
                                   const BackendPtr& generator, const BackendPtr& reflector,
                                   const SessionConfig& cfg) {
    ForecastSession session;
    session.task = task;
    session.channel_count = 1 + dataset.exogenous_count();
    const auto L = static_cast<std::size_t>(task.horizon_len);

    const TaskInputs inputs = slice_task_inputs(dataset, task);

    std::vector<ChannelFeatures> selected;
    if (!cfg.mask.contains(Section::features)) {
        const auto features =
            extract_dataset_features(inputs.endo_lookback, inputs.exo_matrix,
                                     dataset.endogenous.name, [&] {
                                         std::vector<std::string> names;
                                         for (const auto& exo : dataset.exogenous)
                                             names.push_back(exo.name);
                                         return names;
                                     }(),
                                     season_period(dataset.frequency));
        auto inv = investigate(features, cfg.selection,
                               cfg.selection == SelectionPolicy::backend_advised ? generator
                                                                                 : nullptr,
                               cfg.seasonal_keep_threshold);
        selected = std::move(inv.selected);
        session.feature_usage = std::move(inv.usage);
        for (auto& w : inv.warnings) session.warnings.push_back(std::move(w));
    }

    std::optional<std::vector<double>> auxiliary;
    std::optional<NeighborSnapshot> neighbor;
    const bool need_retrieval =
        library != nullptr &&
        !(cfg.mask.contains(Section::auxiliary) && cfg.mask.contains(Section::neighbor));
    if (need_retrieval) {
        auto res = retrieve(*library, inputs.endo_lookback, cfg.retrieval);
        auxiliary = std::move(res.auxiliary_forecast);
        if (res.neighbor != nullptr)
            neighbor = NeighborSnapshot{res.neighbor->lookback, res.neighbor->future};
        for (auto& w : res.warnings) session.warnings.push_back(std::move(w));
    }

    std::vector<KnowledgeEntry> knowledge;
    std::vector<ContextEvent> events;
    if (!cfg.mask.contains(Section::knowledge))
        knowledge = query_knowledge(store, dataset.profile.dataset_name);
    if (!cfg.mask.contains(Section::context_events))
        events = query_context(store, dataset.profile.dataset_name, inputs.timestamps.front(),
                               inputs.timestamps.back());

    auto fallback_forecast = [&]() -> std::vector<double> {
        if (auxiliary) return *auxiliary;
        return std::vector<double>(L, inputs.endo_lookback.back());
    };

    std::optional<std::string> feedback;
    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        session.iteration_count = iter;
        ContextBundle bundle =
            assemble_bundle(task, dataset, inputs, selected, knowledge, events, auxiliary,
                            neighbor, cfg.mask);
        bundle.reflection_feedback = feedback;

        std::vector<double> forecast;
        std::string cot;
        std::uint64_t prompt_hash = 0;
        try {
            if (cfg.two_stage) {
                const std::size_t half = (L + 1) / 2;
                ContextBundle first = bundle;
                first.output_count = half;
                auto r1 = generate(first, generator, GenerationStage::first_half,
                                   cfg.parse_retries);
                session.generator_calls += r1.calls;
                for (auto& f : r1.parse_failures) session.attempts.push_back(std::move(f));

                ContextBundle second = bundle;
                second.partial_forecast = r1.forecast;
                second.output_count = L - half;
                auto r2 = generate(second, generator, GenerationStage::second_half,
                                   cfg.parse_retries);
                session.generator_calls += r2.calls;
                for (auto& f : r2.parse_failures) session.attempts.push_back(std::move(f));

                forecast = std::move(r1.forecast);
                forecast.insert(forecast.end(), r2.forecast.begin(), r2.forecast.end());
                cot = r2.cot.empty() ? r1.cot : r1.cot + "\n" + r2.cot;
                prompt_hash = hash_string(serialize_prompt(first));
                session.bundle_history.push_back(std::move(first));
                session.bundle_history.push_back(std::move(second));
            } else {
                auto r = generate(bundle, generator, GenerationStage::full, cfg.parse_retries);
                session.generator_calls += r.calls;
                for (auto& f : r.parse_failures) session.attempts.push_back(std::move(f));
                forecast = std::move(r.forecast);
                cot = std::move(r.cot);
                prompt_hash = hash_string(serialize_prompt(bundle));
                session.bundle_history.push_back(std::move(bundle));
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::transport && e.kind() != ErrorKind::parse_error) throw;
            session.warnings.push_back(std::string("generator failed: ") + e.what());
            const bool has_usable = std::any_of(session.attempts.begin(), session.attempts.end(),
                                                [](const Attempt& a) { return !a.parse_failed; });
            if (has_usable) break; // the exhaustion rule below picks the best prior attempt
            session.final_forecast = fallback_forecast();
            session.final_explanation =
                auxiliary ? "generator unavailable; auxiliary forecast used as fallback"
                          : "generator unavailable; last observation repeated as fallback";
            return session;
        }

        Attempt attempt;
        attempt.forecast = forecast;
        attempt.cot = cot;
        attempt.prompt_hash = prompt_hash;

        if (!cfg.reflection_enabled) {
            attempt.verdict = Verdict::accept;
            attempt.feedback = "(reflection disabled)";
            session.attempts.push_back(std::move(attempt));
            session.final_forecast = std::move(forecast);
            session.final_explanation = cot;
            return session;
        }

        const ContextBundle& reflected = session.bundle_history.back();
        Reflection r = reflect(reflected, forecast, cot, reflector);
        attempt.verdict = r.verdict;
        attempt.feedback = r.feedback;
        attempt.plausibility = r.plausibility;
        attempt.coherence = r.coherence;
        for (auto& n : r.notes) session.warnings.push_back(std::move(n));
        session.attempts.push_back(std::move(attempt));

        if (r.verdict == Verdict::accept) {
            session.final_forecast = std::move(forecast);
            session.final_explanation = cot;
            return session;
        }
        feedback = r.feedback.empty() ? "(no specific feedback)" : r.feedback;
    }

    // Exhausted without an accept: best plausibility wins, later attempts
    // break ties. Unscored attempts rank lowest.
    if (session.final_forecast.empty()) {
        const Attempt* best = nullptr;
        double best_score = -1.0;
        for (const auto& a : session.attempts) {
            if (a.parse_failed) continue;
            const double score = a.plausibility.value_or(0.0);
            if (best == nullptr || score >= best_score) {
                best = &a;
                best_score = score;
            }
        }
        if (best != nullptr) {
            session.final_forecast = best->forecast;
            session.final_explanation = best->cot;
        } else {
            session.final_forecast = fallback_forecast();
            session.final_explanation = "no usable attempt; fallback forecast";
        }
        session.warnings.push_back("reflection budget exhausted without acceptance");
    }
    return session;
}

/// Deterministic JSON view of a session (no timings, so identical runs are
/// byte-identical). Backing store for session log files.
inline nlohmann::json session_to_json(const ForecastSession& s) {
    nlohmann::json j;
    j["anchor_index"] = s.task.anchor_index;
    j["lookback_len"] = s.task.lookback_len;
    j["horizon_len"] = s.task.horizon_len;
    j["iteration_count"] = s.iteration_count;
    j["generator_calls"] = s.generator_calls;
    j["final_forecast"] = s.final_forecast;
    j["final_explanation"] = s.final_explanation;
    j["feature_usage"] = s.feature_usage;
    j["channel_count"] = s.channel_count;
    j["warnings"] = s.warnings;
    j["attempts"] = nlohmann::json::array();
    for (const auto& a : s.attempts) {
        nlohmann::json row;
        row["forecast"] = a.forecast;
        row["cot"] = a.cot;
        row["verdict"] = a.verdict == Verdict::accept ? "accept" : "revise";
        row["feedback"] = a.feedback;
        if (a.plausibility) row["plausibility"] = *a.plausibility;
        if (a.coherence) row["coherence"] = *a.coherence;
        row["prompt_hash"] = to_hex(a.prompt_hash);
        row["parse_failed"] = a.parse_failed;
        j["attempts"].push_back(std::move(row));
    }
    return j;
}

} // namespace alphacast
