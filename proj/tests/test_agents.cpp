#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "alphacast/agents.hpp"
#include "support/fixtures.hpp"
#include "support/matchers.hpp"

using namespace alphacast;

namespace {

/// Backend that records every prompt it sees and replays a fixed script.
class RecordingBackend final : public ReasoningBackend {
public:
    explicit RecordingBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}

    std::string id() const override { return "stub:recording"; }

    std::string complete(const GenerationRequest& req) override {
        prompts.push_back(req.prompt);
        if (prompts.size() > replies_.size())
            throw Error(ErrorKind::transport, "recording script exhausted");
        return replies_[prompts.size() - 1];
    }

    std::vector<std::string> prompts;

private:
    std::vector<std::string> replies_;
};

std::string good_reply(const std::vector<double>& forecast, const std::string& cot = "looks fine") {
    return render_forecast_document(forecast, cot);
}

std::vector<double> ramp(double start, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = start + double(i);
    return v;
}

/// Sine-plus-noise hourly dataset with a small case library over its training
/// range; the query anchor sits inside the test split with observable truth.
struct SessionFixture {
    Dataset dataset;
    CaseLibrary library;
    KnowledgeStore store;
    ForecastTask task;

    SessionFixture() {
        std::mt19937_64 rng(101);
        std::vector<double> endo(160);
        for (std::size_t i = 0; i < endo.size(); ++i) {
            const double noise = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
            endo[i] = 50.0 + 10.0 * std::sin(2.0 * M_PI * double(i) / 24.0) + noise;
        }
        dataset = fixtures::make_dataset(endo, {}, 120, 16, 24);

        LibraryBuildConfig cfg;
        cfg.lookback_len = 24;
        cfg.horizon_len = 8;
        cfg.period = 24;
        cfg.pool = {{ModelId::naive_last, {}}, {ModelId::snaive, {}}, {ModelId::ses, {}}};
        cfg.seed = 9;
        library = build_case_library(dataset, cfg);

        task.lookback_len = 24;
        task.horizon_len = 8;
        task.anchor_index = 140;
        task.task_prompt = "Forecast the next 8 hours of load.";
    }

    std::vector<double> expected_auxiliary() const {
        const auto inputs = slice_task_inputs(dataset, task);
        return retrieve(library, inputs.endo_lookback).auxiliary_forecast;
    }

    double last_observation() const {
        return dataset.endogenous.values[task.anchor_index];
    }
};

std::vector<std::pair<std::string, FeatureVector>> two_channel_features() {
    return {{"load", extract_feature_vector(fixtures::noisy(3, 96), 24)},
            {"flat", extract_feature_vector(std::vector<double>(96, 5.0), 24)}};
}

bool has_warning(const std::vector<std::string>& warnings, const std::string& needle) {
    for (const auto& w : warnings)
        if (w.find(needle) != std::string::npos) return true;
    return false;
}

} // namespace

TEST_CASE("selection policy names round-trip") {
    for (auto p : {SelectionPolicy::static_all, SelectionPolicy::rule_based,
                   SelectionPolicy::backend_advised})
        CHECK(selection_policy_from_name(selection_policy_name(p)) == p);
    CHECK_FALSE(selection_policy_from_name("greedy").has_value());
}

TEST_CASE("static-all keeps every feature on every channel") {
    const auto inv = investigate(two_channel_features(), SelectionPolicy::static_all);
    REQUIRE(inv.selected.size() == 2);
    CHECK(inv.selected[0].features.size() == std::size_t(kFeatureCount));
    CHECK(inv.selected[1].features.size() == std::size_t(kFeatureCount));
    CHECK(inv.usage.size() == std::size_t(2 * kFeatureCount));
    CHECK(std::is_sorted(inv.usage.begin(), inv.usage.end()));
    CHECK(std::find(inv.usage.begin(), inv.usage.end(), "flat:spectral_entropy") != inv.usage.end());
    CHECK(inv.warnings.empty());

    // Degeneracy is passed through, not hidden.
    bool saw_degenerate = false;
    for (const auto& sf : inv.selected[1].features)
        if (sf.id == Feature::sample_entropy) saw_degenerate = sf.degenerate;
    CHECK(saw_degenerate);
}

TEST_CASE("rule-based selection drops degenerate and weakly seasonal features") {
    const auto feats = two_channel_features();

    SECTION("constant channel keeps only its well-defined features") {
        const auto inv = investigate(feats, SelectionPolicy::rule_based);
        REQUIRE(inv.selected.size() == 2);
        CHECK(inv.selected[1].channel == "flat");
        CHECK(inv.selected[1].features.size() == 8); // count/mean/std/var/min/max/flat/crossing
        for (const auto& sf : inv.selected[1].features) CHECK_FALSE(sf.degenerate);
    }
    SECTION("seasonal threshold gates seasonal_strength") {
        const auto strict = investigate(feats, SelectionPolicy::rule_based, nullptr, 1.1);
        const auto lax = investigate(feats, SelectionPolicy::rule_based, nullptr, -1.0);
        const auto kept = [](const Investigation& inv, const char* channel) {
            for (const auto& ch : inv.selected)
                if (ch.channel == channel)
                    for (const auto& sf : ch.features)
                        if (sf.id == Feature::seasonal_strength) return true;
            return false;
        };
        CHECK_FALSE(kept(strict, "load")); // strength can never exceed 1.1
        CHECK(kept(lax, "load"));
        CHECK_FALSE(kept(lax, "flat")); // degenerate regardless of threshold
    }
}

TEST_CASE("backend-advised selection filters by the advisor's list") {
    const auto feats = two_channel_features();
    auto advisor = std::make_shared<RecordingBackend>(
        std::vector<std::string>{"keep basic_mean, xacf1 and seasonal_strength; drop bogus_feature"});
    const auto inv = investigate(feats, SelectionPolicy::backend_advised, advisor);

    REQUIRE(advisor->prompts.size() == 1);
    CHECK(advisor->prompts[0].find("Known features:") != std::string::npos);
    CHECK(advisor->prompts[0].find("load:") != std::string::npos);
    CHECK(advisor->prompts[0].find("flat:") != std::string::npos);
    CHECK(advisor->prompts[0].find("degenerate") != std::string::npos);

    REQUIRE(inv.selected.size() == 2);
    for (const auto& ch : inv.selected) {
        REQUIRE(ch.features.size() == 3);
        CHECK(ch.features[0].id == Feature::basic_mean);
        CHECK(ch.features[1].id == Feature::xacf1);
        CHECK(ch.features[2].id == Feature::seasonal_strength);
    }
    CHECK(inv.usage == std::vector<std::string>{"flat:basic_mean", "flat:seasonal_strength",
                                                "flat:xacf1", "load:basic_mean",
                                                "load:seasonal_strength", "load:xacf1"});
    // Non-feature words are reported, not silently dropped.
    CHECK(has_warning(inv.warnings, "unknown feature 'keep'"));
    CHECK(has_warning(inv.warnings, "unknown feature 'bogus_feature'"));
}

TEST_CASE("backend-advised selection degrades to keeping everything") {
    const auto feats = two_channel_features();

    SECTION("advisor names nothing recognizable") {
        auto advisor = std::make_shared<ScriptedBackend>(
            std::vector<std::string>{"nothing useful to report"});
        const auto inv = investigate(feats, SelectionPolicy::backend_advised, advisor);
        CHECK(inv.usage.size() == std::size_t(2 * kFeatureCount));
        CHECK(has_warning(inv.warnings, "no known features; keeping all"));
    }
    SECTION("advisor unreachable") {
        const auto inv = investigate(feats, SelectionPolicy::backend_advised,
                                     std::make_shared<FailingBackend>());
        CHECK(inv.usage.size() == std::size_t(2 * kFeatureCount));
        CHECK(has_warning(inv.warnings, "feature advisor unreachable"));
    }
    SECTION("no advisor bound") {
        const auto inv = investigate(feats, SelectionPolicy::backend_advised, nullptr);
        CHECK(inv.usage.size() == std::size_t(2 * kFeatureCount));
        CHECK(has_warning(inv.warnings, "feature advisor unreachable"));
    }
}

namespace {

ContextBundle small_bundle() {
    ContextBundle b;
    b.task_prompt = "forecast";
    b.dataset_name = "unit";
    b.frequency_text = "1h";
    b.endo_name = "y";
    b.lookback_len = 3;
    b.horizon_len = 3;
    b.output_count = 3;
    b.endogenous = {1, 2, 3};
    for (int t = 0; t < 6; ++t)
        b.timestamps.push_back(1451606400 + static_cast<Instant>(t) * 3600);
    b.auxiliary_forecast = std::vector<double>{4, 5, 6};
    return b;
}

} // namespace

TEST_CASE("generate parses a well-formed reply on the first round") {
    const auto bundle = small_bundle();
    auto backend = std::make_shared<RecordingBackend>(
        std::vector<std::string>{good_reply({7, 8, 9}, "carried the trend forward")});
    const auto r = generate(bundle, backend, GenerationStage::full, 2);
    CHECK(r.forecast == std::vector<double>{7, 8, 9});
    CHECK(r.cot == "REASONING\ncarried the trend forward");
    CHECK(r.calls == 1);
    CHECK(r.parse_failures.empty());
    REQUIRE(backend->prompts.size() == 1);
    CHECK(backend->prompts[0] == serialize_prompt(bundle));
}

TEST_CASE("generate repairs unparseable replies by annotating the prompt") {
    const auto bundle = small_bundle();
    auto backend = std::make_shared<RecordingBackend>(
        std::vector<std::string>{"sorry, words only", good_reply({7, 8, 9})});
    const auto r = generate(bundle, backend, GenerationStage::full, 2);
    CHECK(r.forecast == std::vector<double>{7, 8, 9});
    CHECK(r.calls == 2);
    REQUIRE(r.parse_failures.size() == 1);
    CHECK(r.parse_failures[0].parse_failed);
    CHECK(r.parse_failures[0].cot == "sorry, words only");
    CHECK(r.parse_failures[0].feedback.find("parse error") == 0);
    CHECK(r.parse_failures[0].prompt_hash == hash_string(serialize_prompt(bundle)));

    REQUIRE(backend->prompts.size() == 2);
    CHECK(backend->prompts[1].find("[REPAIR]") != std::string::npos);
    CHECK(backend->prompts[1].find("Your previous reply was invalid") != std::string::npos);
    CHECK(backend->prompts[1].find(serialize_prompt(bundle)) == 0); // original prompt kept
}

TEST_CASE("generate repair covers every parse failure kind") {
    const auto bundle = small_bundle();
    const auto repaired = [&](const std::string& bad) {
        auto backend = std::make_shared<RecordingBackend>(
            std::vector<std::string>{bad, good_reply({1, 2, 3})});
        const auto r = generate(bundle, backend, GenerationStage::full, 1);
        REQUIRE(r.parse_failures.size() == 1);
        return backend->prompts[1];
    };
    CHECK(repaired("no block").find("no fenced block") != std::string::npos);
    CHECK(repaired("```\n1\n2\n```").find("expected 3") != std::string::npos);
    CHECK(repaired("```\n1\ntwo\n3\n```").find("not a finite number") != std::string::npos);
}

TEST_CASE("generate gives up after the retry budget") {
    const auto bundle = small_bundle();
    auto backend = std::make_shared<RecordingBackend>(
        std::vector<std::string>{"bad", "still bad", "never used"});
    CHECK_THROWS_MATCHES(generate(bundle, backend, GenerationStage::full, 1), Error,
                         ErrorKindIs(ErrorKind::parse_error));
    CHECK(backend->prompts.size() == 2); // initial + one repair

    auto strict = std::make_shared<RecordingBackend>(std::vector<std::string>{"bad"});
    CHECK_THROWS_MATCHES(generate(bundle, strict, GenerationStage::full, 0), Error,
                         ErrorKindIs(ErrorKind::parse_error));
    CHECK(strict->prompts.size() == 1);
}

TEST_CASE("generate lets transport errors pass through untouched") {
    const auto bundle = small_bundle();
    CHECK_THROWS_MATCHES(generate(bundle, std::make_shared<FailingBackend>(),
                                  GenerationStage::full, 2),
                         Error, ErrorKindIs(ErrorKind::transport));
}

TEST_CASE("generate honors the bundle's output count") {
    auto bundle = small_bundle();
    bundle.output_count = 2;
    auto backend =
        std::make_shared<RecordingBackend>(std::vector<std::string>{good_reply({5, 6})});
    CHECK(generate(bundle, backend, GenerationStage::first_half, 0).forecast ==
          std::vector<double>{5, 6});
}

TEST_CASE("reflection prompt lays out forecast, reasoning, and evidence") {
    auto bundle = small_bundle();
    ContextEvent ev;
    ev.category = "holiday";
    ev.body = "Midsummer day.";
    bundle.context_events.push_back(ev);

    const auto prompt = render_reflection_prompt(bundle, {1.5, 2.0, 2.5}, "");
    CHECK(prompt.find("[REFLECTION TASK]") == 0);
    CHECK(prompt.find("[FORECAST]\n1.5, 2, 2.5\n") != std::string::npos);
    CHECK(prompt.find("[CHAIN OF THOUGHT]\n(none)\n") != std::string::npos);
    CHECK(prompt.find("lookback range: [1, 3]") != std::string::npos);
    CHECK(prompt.find("auxiliary forecast: 4, 5, 6") != std::string::npos);
    CHECK(prompt.find("event: [holiday] Midsummer day.") != std::string::npos);
    CHECK(prompt.find("VERDICT: accept|revise") != std::string::npos);
}

TEST_CASE("reflect parses the verdict grammar") {
    const auto bundle = small_bundle();
    const auto reply = [&](const std::string& text) {
        return reflect(bundle, {1, 2, 3}, "cot",
                       std::make_shared<ScriptedBackend>(std::vector<std::string>{text}));
    };

    SECTION("accept with scores") {
        const auto r = reply("VERDICT: accept\nFEEDBACK: matches the evidence\n"
                             "SCORES: plausibility=0.8 coherence=0.9");
        CHECK(r.verdict == Verdict::accept);
        CHECK(r.feedback == "matches the evidence");
        CHECK(r.plausibility == 0.8);
        CHECK(r.coherence == 0.9);
        CHECK(r.notes.empty());
    }
    SECTION("revise with surrounding whitespace") {
        const auto r = reply("  VERDICT:   revise \n  FEEDBACK:  flatten the peak  ");
        CHECK(r.verdict == Verdict::revise);
        CHECK(r.feedback == "flatten the peak");
    }
    SECTION("scores are optional") {
        const auto r = reply("VERDICT: accept\nFEEDBACK: ok");
        CHECK_FALSE(r.plausibility.has_value());
        CHECK_FALSE(r.coherence.has_value());
    }
    SECTION("malformed verdict defaults to revise with a note") {
        const auto r = reply("VERDICT: maybe\nFEEDBACK: unsure");
        CHECK(r.verdict == Verdict::revise);
        REQUIRE(r.notes.size() == 1);
        CHECK(r.notes[0].find("malformed verdict 'maybe'") != std::string::npos);
    }
    SECTION("missing verdict defaults to revise with a note") {
        const auto r = reply("I think this is fine.");
        CHECK(r.verdict == Verdict::revise);
        REQUIRE(r.notes.size() == 1);
        CHECK(r.notes[0].find("no verdict") != std::string::npos);
    }
    SECTION("unparseable score tokens are noted, not fatal") {
        const auto r = reply("VERDICT: accept\nSCORES: plausibility=high coherence=0.7");
        CHECK(r.verdict == Verdict::accept);
        CHECK_FALSE(r.plausibility.has_value());
        CHECK(r.coherence == 0.7);
        REQUIRE(r.notes.size() == 1);
        CHECK(r.notes[0].find("plausibility=high") != std::string::npos);
    }
}

TEST_CASE("reflect treats an unreachable reflector as acceptance") {
    const auto bundle = small_bundle();
    const auto r = reflect(bundle, {1, 2, 3}, "cot", std::make_shared<FailingBackend>());
    CHECK(r.verdict == Verdict::accept);
    CHECK(r.feedback == "(reflector unreachable)");
    REQUIRE(r.notes.size() == 1);
    CHECK(r.notes[0].find("accepting by default") != std::string::npos);
}

TEST_CASE("session with echo generator and accepting reflector lands on the auxiliary") {
    SessionFixture fx;
    SessionConfig cfg;
    const auto session =
        run_session(fx.task, fx.dataset, &fx.library, fx.store,
                    std::make_shared<EchoAuxiliaryBackend>(),
                    std::make_shared<AlwaysAcceptBackend>(), cfg);

    CHECK(session.final_forecast == fx.expected_auxiliary());
    CHECK(session.iteration_count == 1);
    CHECK(session.generator_calls == 1);
    CHECK(session.channel_count == 1);
    REQUIRE(session.attempts.size() == 1);
    CHECK(session.attempts[0].verdict == Verdict::accept);
    CHECK(session.attempts[0].plausibility == 0.9);
    REQUIRE(session.bundle_history.size() == 1);
    CHECK_FALSE(session.bundle_history[0].reflection_feedback.has_value());
    CHECK(session.attempts[0].prompt_hash ==
          hash_string(serialize_prompt(session.bundle_history[0])));
    CHECK(session.final_explanation.find("auxiliary") != std::string::npos);
    CHECK(session.feature_usage.size() == std::size_t(kFeatureCount)); // one channel
}

TEST_CASE("session runs exactly n+1 rounds when the reflector rejects n times") {
    SessionFixture fx;
    SessionConfig cfg;
    const auto session =
        run_session(fx.task, fx.dataset, &fx.library, fx.store,
                    std::make_shared<EchoAuxiliaryBackend>(),
                    std::make_shared<ScriptedReflectorBackend>(2), cfg);

    CHECK(session.iteration_count == 3);
    CHECK(session.generator_calls == 3);
    REQUIRE(session.attempts.size() == 3);
    CHECK(session.attempts[0].verdict == Verdict::revise);
    CHECK(session.attempts[1].verdict == Verdict::revise);
    CHECK(session.attempts[2].verdict == Verdict::accept);
    CHECK(session.final_forecast == fx.expected_auxiliary());
    CHECK_FALSE(has_warning(session.warnings, "exhausted"));

    REQUIRE(session.bundle_history.size() == 3);
    CHECK_FALSE(session.bundle_history[0].reflection_feedback.has_value());
    CHECK(session.bundle_history[1].reflection_feedback ==
          "reconsider the recent trend before accepting");
    CHECK(session.bundle_history[2].reflection_feedback ==
          "reconsider the recent trend before accepting");
}

TEST_CASE("exhausted sessions keep the best-scored attempt") {
    SessionFixture fx;
    SessionConfig cfg;
    const std::vector<double> A = ramp(10, 8), B = ramp(20, 8), C = ramp(30, 8);
    auto generator = std::make_shared<ScriptedBackend>(
        std::vector<std::string>{good_reply(A, "a"), good_reply(B, "b"), good_reply(C, "c")});

    SECTION("highest plausibility wins") {
        auto reflector = std::make_shared<ScriptedBackend>(std::vector<std::string>{
            "VERDICT: revise\nSCORES: plausibility=0.4",
            "VERDICT: revise\nSCORES: plausibility=0.9",
            "VERDICT: revise\nSCORES: plausibility=0.6"});
        const auto session = run_session(fx.task, fx.dataset, &fx.library, fx.store, generator,
                                         reflector, cfg);
        CHECK(session.iteration_count == 3);
        CHECK(session.final_forecast == B);
        CHECK(session.final_explanation == "REASONING\nb");
        CHECK(has_warning(session.warnings, "reflection budget exhausted without acceptance"));
    }
    SECTION("ties break toward the latest attempt") {
        auto reflector = std::make_shared<ScriptedBackend>(std::vector<std::string>{
            "VERDICT: revise\nSCORES: plausibility=0.5",
            "VERDICT: revise\nSCORES: plausibility=0.5",
            "VERDICT: revise\nSCORES: plausibility=0.2"});
        const auto session = run_session(fx.task, fx.dataset, &fx.library, fx.store, generator,
                                         reflector, cfg);
        CHECK(session.final_forecast == B);
    }
    SECTION("unscored attempts fall back to the latest") {
        auto reflector = std::make_shared<ScriptedBackend>(std::vector<std::string>{
            "VERDICT: revise", "VERDICT: revise", "VERDICT: revise"});
        const auto session = run_session(fx.task, fx.dataset, &fx.library, fx.store, generator,
                                         reflector, cfg);
        CHECK(session.final_forecast == C);
    }
    SECTION("always-revise stub scores later rounds higher") {
        const auto session = run_session(fx.task, fx.dataset, &fx.library, fx.store, generator,
                                         std::make_shared<AlwaysReviseBackend>(), cfg);
        REQUIRE(session.attempts.size() == 3);
        CHECK(session.attempts[2].plausibility == 0.3);
        CHECK(session.final_forecast == C);
    }
}

TEST_CASE("two-stage sessions stitch both halves and expose the partial forecast") {
    SessionFixture fx;
    SessionConfig cfg;
    cfg.two_stage = true;
    const auto session =
        run_session(fx.task, fx.dataset, &fx.library, fx.store,
                    std::make_shared<EchoAuxiliaryBackend>(),
                    std::make_shared<AlwaysAcceptBackend>(), cfg);

    const auto aux = fx.expected_auxiliary();
    CHECK(session.final_forecast == aux);
    CHECK(session.generator_calls == 2);
    REQUIRE(session.bundle_history.size() == 2);
    CHECK(session.bundle_history[0].output_count == 4);
    CHECK(session.bundle_history[1].output_count == 4);
    REQUIRE(session.bundle_history[1].partial_forecast.has_value());
    CHECK(*session.bundle_history[1].partial_forecast ==
          std::vector<double>(aux.begin(), aux.begin() + 4));
    CHECK(serialize_prompt(session.bundle_history[1]).find("[PARTIAL FORECAST]") !=
          std::string::npos);
    CHECK(serialize_prompt(session.bundle_history[0]).find("[PARTIAL FORECAST]") ==
          std::string::npos);
}

TEST_CASE("disabling reflection accepts the first forecast without consulting the reflector") {
    SessionFixture fx;
    SessionConfig cfg;
    cfg.reflection_enabled = false;
    const auto session =
        run_session(fx.task, fx.dataset, &fx.library, fx.store,
                    std::make_shared<EchoAuxiliaryBackend>(),
                    std::make_shared<FailingBackend>(), cfg); // would warn if ever called

    CHECK(session.iteration_count == 1);
    REQUIRE(session.attempts.size() == 1);
    CHECK(session.attempts[0].verdict == Verdict::accept);
    CHECK(session.attempts[0].feedback == "(reflection disabled)");
    CHECK(session.final_forecast == fx.expected_auxiliary());
    CHECK_FALSE(has_warning(session.warnings, "reflector"));
}

TEST_CASE("a dead generator falls back to the auxiliary forecast") {
    SessionFixture fx;
    SessionConfig cfg;
    const auto session =
        run_session(fx.task, fx.dataset, &fx.library, fx.store, std::make_shared<FailingBackend>(),
                    std::make_shared<AlwaysAcceptBackend>(), cfg);

    CHECK(session.final_forecast == fx.expected_auxiliary());
    CHECK(session.final_explanation ==
          "generator unavailable; auxiliary forecast used as fallback");
    CHECK(has_warning(session.warnings, "generator failed"));
    CHECK(session.attempts.empty());
}

TEST_CASE("a dead generator without a library repeats the last observation") {
    SessionFixture fx;
    SessionConfig cfg;
    const auto session =
        run_session(fx.task, fx.dataset, nullptr, fx.store, std::make_shared<FailingBackend>(),
                    std::make_shared<AlwaysAcceptBackend>(), cfg);

    CHECK(session.final_forecast == std::vector<double>(8, fx.last_observation()));
    CHECK(session.final_explanation ==
          "generator unavailable; last observation repeated as fallback");
}

TEST_CASE("a generator dying mid-loop keeps the best earlier attempt") {
    SessionFixture fx;
    SessionConfig cfg;
    const std::vector<double> A = ramp(10, 8);
    auto generator =
        std::make_shared<ScriptedBackend>(std::vector<std::string>{good_reply(A, "a")});
    const auto session = run_session(fx.task, fx.dataset, &fx.library, fx.store, generator,
                                     std::make_shared<AlwaysReviseBackend>(), cfg);

    CHECK(session.iteration_count == 2); // second round died
    CHECK(session.generator_calls == 1);
    CHECK(session.final_forecast == A);
    CHECK(has_warning(session.warnings, "generator failed"));
    CHECK(has_warning(session.warnings, "reflection budget exhausted"));
}

TEST_CASE("parse repairs inside a session are recorded as burned attempts") {
    SessionFixture fx;
    SessionConfig cfg;
    const std::vector<double> A = ramp(10, 8);
    auto generator = std::make_shared<ScriptedBackend>(
        std::vector<std::string>{"words, not numbers", good_reply(A, "a")});
    const auto session = run_session(fx.task, fx.dataset, &fx.library, fx.store, generator,
                                     std::make_shared<AlwaysAcceptBackend>(), cfg);

    CHECK(session.generator_calls == 2);
    REQUIRE(session.attempts.size() == 2);
    CHECK(session.attempts[0].parse_failed);
    CHECK(session.attempts[0].cot == "words, not numbers");
    CHECK_FALSE(session.attempts[1].parse_failed);
    CHECK(session.final_forecast == A);
    CHECK(session.iteration_count == 1);
}

TEST_CASE("session masks drop features and retrieval content") {
    SessionFixture fx;

    SECTION("feature mask empties usage and the prompt section") {
        SessionConfig cfg;
        cfg.mask = {Section::features};
        const auto session =
            run_session(fx.task, fx.dataset, &fx.library, fx.store,
                        std::make_shared<EchoAuxiliaryBackend>(),
                        std::make_shared<AlwaysAcceptBackend>(), cfg);
        CHECK(session.feature_usage.empty());
        CHECK(serialize_prompt(session.bundle_history[0]).find("[FEATURES]") ==
              std::string::npos);
    }
    SECTION("masking both retrieval sections skips retrieval entirely") {
        SessionConfig cfg;
        cfg.mask = {Section::auxiliary, Section::neighbor};
        const auto session =
            run_session(fx.task, fx.dataset, &fx.library, fx.store,
                        std::make_shared<EchoAuxiliaryBackend>(),
                        std::make_shared<AlwaysAcceptBackend>(), cfg);
        CHECK_FALSE(session.bundle_history[0].auxiliary_forecast.has_value());
        CHECK_FALSE(session.bundle_history[0].neighbor_case.has_value());
        // Echo has no auxiliary to lean on, so it repeats the last observation.
        CHECK(session.final_forecast == std::vector<double>(8, fx.last_observation()));
    }
    SECTION("masking only the auxiliary still surfaces the neighbor") {
        SessionConfig cfg;
        cfg.mask = {Section::auxiliary};
        const auto session =
            run_session(fx.task, fx.dataset, &fx.library, fx.store,
                        std::make_shared<EchoAuxiliaryBackend>(),
                        std::make_shared<AlwaysAcceptBackend>(), cfg);
        CHECK_FALSE(session.bundle_history[0].auxiliary_forecast.has_value());
        CHECK(session.bundle_history[0].neighbor_case.has_value());
    }
}

TEST_CASE("session prompts carry knowledge and context when the store has them") {
    SessionFixture fx;
    KnowledgeEntry k;
    k.entry_id = "k-evening";
    k.dataset_scope = "fixture";
    k.body = "Load peaks in the early evening.";
    fx.store.entries.push_back(k);
    ContextEvent ev;
    ev.event_id = "e-coldsnap";
    ev.category = "weather";
    ev.start = 1451606400 + 120 * 3600;
    ev.end = 1451606400 + 150 * 3600;
    ev.body = "Cold snap drives heating demand.";
    fx.store.events.push_back(ev);

    SessionConfig cfg;
    const auto session =
        run_session(fx.task, fx.dataset, &fx.library, fx.store,
                    std::make_shared<EchoAuxiliaryBackend>(),
                    std::make_shared<AlwaysAcceptBackend>(), cfg);
    const auto prompt = serialize_prompt(session.bundle_history[0]);
    CHECK(prompt.find("Load peaks in the early evening.") != std::string::npos);
    CHECK(prompt.find("Cold snap drives heating demand.") != std::string::npos);

    SessionConfig masked;
    masked.mask = {Section::knowledge, Section::context_events};
    const auto blind =
        run_session(fx.task, fx.dataset, &fx.library, fx.store,
                    std::make_shared<EchoAuxiliaryBackend>(),
                    std::make_shared<AlwaysAcceptBackend>(), masked);
    const auto blind_prompt = serialize_prompt(blind.bundle_history[0]);
    CHECK(blind_prompt.find("Load peaks") == std::string::npos);
    CHECK(blind_prompt.find("Cold snap") == std::string::npos);
}

TEST_CASE("backend-advised sessions consult the generator before generating") {
    SessionFixture fx;
    SessionConfig cfg;
    cfg.selection = SelectionPolicy::backend_advised;

    SECTION("a cooperative advisor narrows the feature roster") {
        const std::vector<double> A = ramp(10, 8);
        auto generator = std::make_shared<RecordingBackend>(
            std::vector<std::string>{"basic_mean", good_reply(A, "a")});
        const auto session = run_session(fx.task, fx.dataset, &fx.library, fx.store, generator,
                                         std::make_shared<AlwaysAcceptBackend>(), cfg);
        CHECK(session.feature_usage == std::vector<std::string>{"load:basic_mean"});
        CHECK(session.generator_calls == 1); // advisor consultation is not generation
        CHECK(session.final_forecast == A);
        REQUIRE(generator->prompts.size() == 2);
        CHECK(generator->prompts[0].find("Select the forecasting features") == 0);
    }
    SECTION("an advisor that cannot answer keeps every feature") {
        // The echo stub refuses prompt-only calls, which is exactly the
        // advisor's calling convention.
        const auto session =
            run_session(fx.task, fx.dataset, &fx.library, fx.store,
                        std::make_shared<EchoAuxiliaryBackend>(),
                        std::make_shared<AlwaysAcceptBackend>(), cfg);
        CHECK(session.feature_usage.size() == std::size_t(kFeatureCount));
        CHECK(has_warning(session.warnings, "feature advisor unreachable"));
        CHECK(session.final_forecast == fx.expected_auxiliary());
    }
}

TEST_CASE("session JSON is structured and deterministic") {
    SessionFixture fx;
    SessionConfig cfg;
    const auto run = [&] {
        return run_session(fx.task, fx.dataset, &fx.library, fx.store,
                           std::make_shared<EchoAuxiliaryBackend>(),
                           std::make_shared<ScriptedReflectorBackend>(1), cfg);
    };
    const auto session = run();
    const auto j = session_to_json(session);

    CHECK(j.at("anchor_index") == 140);
    CHECK(j.at("lookback_len") == 24);
    CHECK(j.at("horizon_len") == 8);
    CHECK(j.at("iteration_count") == 2);
    CHECK(j.at("generator_calls") == 2);
    CHECK(j.at("channel_count") == 1);
    CHECK(j.at("final_forecast").get<std::vector<double>>() == fx.expected_auxiliary());
    REQUIRE(j.at("attempts").size() == 2);
    CHECK(j.at("attempts").at(0).at("verdict") == "revise");
    CHECK(j.at("attempts").at(1).at("verdict") == "accept");
    CHECK(j.at("attempts").at(0).at("parse_failed") == false);
    CHECK(j.at("attempts").at(0).at("prompt_hash").get<std::string>().size() == 16);
    CHECK(j.at("feature_usage").size() == std::size_t(kFeatureCount));

    // No timings or other volatile content: identical runs serialize identically.
    CHECK(j.dump() == session_to_json(run()).dump());
}
