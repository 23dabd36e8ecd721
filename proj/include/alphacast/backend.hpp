#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "alphacast/errors.hpp"
#include "alphacast/grounding.hpp"

namespace alphacast {

enum class GenerationStage { full, first_half, second_half };

/// What a backend sees per call. `prompt` is the complete wire payload;
/// `bundle` is an in-process side channel that lets offline stubs answer at
/// full precision (the rendered prompt carries only 6 significant digits).
/// Remote backends must use the prompt alone.
struct GenerationRequest {
    std::string prompt;
    const ContextBundle* bundle = nullptr;
    GenerationStage stage = GenerationStage::full;
    std::size_t expected_count = 0;
};

class ReasoningBackend {
public:
    virtual ~ReasoningBackend() = default;
    virtual std::string id() const = 0;
    /// Returns raw response text; transport problems throw ErrorKind::transport.
    virtual std::string complete(const GenerationRequest& request) = 0;
};

using BackendPtr = std::shared_ptr<ReasoningBackend>;

/// Deterministic generator stub: replies with the bundle's auxiliary forecast
/// (the slice matching the requested stage) at full precision, or repeats the
/// last observed value when no auxiliary is present.
class EchoAuxiliaryBackend final : public ReasoningBackend {
public:
    std::string id() const override { return "stub:echo-auxiliary"; }

    std::string complete(const GenerationRequest& req) override {
        if (req.bundle == nullptr)
            throw Error(ErrorKind::transport, "echo stub needs an in-process bundle");
        const auto& b = *req.bundle;
        std::vector<double> values;
        std::string cot;
        if (b.auxiliary_forecast) {
            const auto& aux = *b.auxiliary_forecast;
            const std::size_t half = (aux.size() + 1) / 2;
            switch (req.stage) {
            case GenerationStage::full: values = aux; break;
            case GenerationStage::first_half:
                values.assign(aux.begin(), aux.begin() + static_cast<std::ptrdiff_t>(half));
                break;
            case GenerationStage::second_half:
                values.assign(aux.begin() + static_cast<std::ptrdiff_t>(half), aux.end());
                break;
            }
            cot = "Echoing the auxiliary forecast from the retrieved cases.";
        } else {
            values.assign(req.expected_count, b.endogenous.empty() ? 0.0 : b.endogenous.back());
            cot = "No auxiliary forecast available; repeating the last observation.";
        }
        return render_forecast_document(values, cot);
    }
};

/// Replays a fixed list of responses in order; throws transport when the
/// script runs dry. Drives repair-loop and reflection-loop tests.
class ScriptedBackend final : public ReasoningBackend {
public:
    explicit ScriptedBackend(std::vector<std::string> replies, std::string name = "stub:scripted")
        : replies_(std::move(replies)), name_(std::move(name)) {}

    std::string id() const override { return name_; }

    std::string complete(const GenerationRequest&) override {
        std::lock_guard lock(mu_);
        if (next_ >= replies_.size())
            throw Error(ErrorKind::transport, name_ + ": script exhausted after " +
                                                  std::to_string(next_) + " calls");
        return replies_[next_++];
    }

    std::size_t calls() const {
        std::lock_guard lock(mu_);
        return next_;
    }

private:
    std::vector<std::string> replies_;
    std::string name_;
    mutable std::mutex mu_;
    std::size_t next_ = 0;
};

/// Reflector stub that accepts everything.
class AlwaysAcceptBackend final : public ReasoningBackend {
public:
    std::string id() const override { return "stub:always-accept"; }
    std::string complete(const GenerationRequest&) override {
        return "VERDICT: accept\nFEEDBACK: forecast is consistent with the evidence\n"
               "SCORES: plausibility=0.9 coherence=0.9";
    }
};

/// Reflector stub that always demands another round.
class AlwaysReviseBackend final : public ReasoningBackend {
public:
    std::string id() const override { return "stub:always-revise"; }
    std::string complete(const GenerationRequest&) override {
        std::lock_guard lock(mu_);
        ++calls_;
        return "VERDICT: revise\nFEEDBACK: tighten the forecast around the auxiliary evidence\n"
               "SCORES: plausibility=0." + std::to_string(calls_ % 10) + " coherence=0.5";
    }

private:
    std::mutex mu_;
    std::size_t calls_ = 0;
};

/// Reflector stub that revises the first `rejects` attempts, then accepts.
class ScriptedReflectorBackend final : public ReasoningBackend {
public:
    explicit ScriptedReflectorBackend(std::size_t rejects) : rejects_(rejects) {}

    std::string id() const override { return "stub:scripted-reflector"; }

    std::string complete(const GenerationRequest&) override {
        std::lock_guard lock(mu_);
        if (seen_++ < rejects_)
            return "VERDICT: revise\nFEEDBACK: reconsider the recent trend before accepting\n"
                   "SCORES: plausibility=0.4 coherence=0.6";
        return "VERDICT: accept\nFEEDBACK: revision addressed the concerns\n"
               "SCORES: plausibility=0.8 coherence=0.8";
    }

private:
    std::size_t rejects_;
    std::mutex mu_;
    std::size_t seen_ = 0;
};

/// Backend whose every call fails; exercises the fallback chain.
class FailingBackend final : public ReasoningBackend {
public:
    std::string id() const override { return "stub:failing"; }
    std::string complete(const GenerationRequest&) override {
        throw Error(ErrorKind::transport, "stub transport failure");
    }
};

struct RemoteBackendConfig {
    std::string base_url;   // scheme://host:port
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string token_env;  // name of the environment variable holding the token
    int timeout_seconds = 120;
    int retry_budget = 3;
    int backoff_base_ms = 250;
    int max_in_flight = 4;
    double temperature = 0.0;
};

/// Chat-completions-style HTTP client: one request per generation, bearer
/// token from the configured environment variable, exponential backoff up to
/// the retry budget, and a process-wide cap on simultaneous requests.
class RemoteBackend final : public ReasoningBackend {
public:
    explicit RemoteBackend(RemoteBackendConfig cfg)
        : cfg_(std::move(cfg)),
          slots_(std::min(std::max(cfg_.max_in_flight, 1), kMaxSlots)) {}

    std::string id() const override { return "remote:" + cfg_.base_url + "#" + cfg_.model; }

    std::string complete(const GenerationRequest& req) override {
        slots_.acquire();
        struct Release {
            std::counting_semaphore<kMaxSlots>& s;
            ~Release() { s.release(); }
        } release{slots_};

        nlohmann::json payload = {
            {"model", cfg_.model},
            {"temperature", cfg_.temperature},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
        };
        const std::string body = payload.dump();

        std::string last_error;
        for (int attempt = 0; attempt <= cfg_.retry_budget; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(cfg_.backoff_base_ms << (attempt - 1)));
            httplib::Client client(cfg_.base_url);
            client.set_connection_timeout(cfg_.timeout_seconds);
            client.set_read_timeout(cfg_.timeout_seconds);
            httplib::Headers headers;
            if (!cfg_.token_env.empty()) {
                if (const char* token = std::getenv(cfg_.token_env.c_str()); token && *token)
                    headers.emplace("Authorization", std::string("Bearer ") + token);
            }
            auto res = client.Post(cfg_.path, headers, body, "application/json");
            if (!res) {
                last_error = "no response (" + httplib::to_string(res.error()) + ")";
                continue;
            }
            if (res->status < 200 || res->status >= 300) {
                last_error = "status " + std::to_string(res->status);
                continue;
            }
            try {
                const auto j = nlohmann::json::parse(res->body);
                return j.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                last_error = std::string("malformed response body: ") + e.what();
            }
        }
        throw Error(ErrorKind::transport, id() + ": " + last_error + " after " +
                                              std::to_string(cfg_.retry_budget + 1) + " attempts");
    }

private:
    static constexpr int kMaxSlots = 64;
    RemoteBackendConfig cfg_;
    std::counting_semaphore<kMaxSlots> slots_;
};

} // namespace alphacast
