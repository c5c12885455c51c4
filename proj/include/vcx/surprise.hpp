#pragma once

#include "vcx/clock.hpp"
#include "vcx/image.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vcx {

struct SurprisePrompt {
    std::string text;
};

/// The zero-shot chain-of-thought surprise prompt.
SurprisePrompt build_prompt();
/// Prompt text read verbatim from a file, for alternative rating prompts.
SurprisePrompt load_prompt(const std::filesystem::path& path);

struct SurpriseResult {
    int rating = 0;
    std::string reasoning;
    std::string provider;
    std::string raw;
    std::string image_id;
};

/// "Reasoning: <reasoning>\nRating: <rating>".
std::string format_response(int rating, const std::string& reasoning);

/// Extracts the last "Rating:" line and the reasoning preceding it.
///
/// Markup (*, _, `, #, <<, >>) around the number is ignored; decimals are
/// rounded half away from zero. Throws kParse when no rating is present and
/// kRange when it falls outside 0..100.
SurpriseResult parse_response(const std::string& text);

/// 64-bit FNV-1a.
std::uint64_t content_hash(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::span<const std::uint8_t> bytes);

struct ImagePayload {
    std::vector<std::uint8_t> bytes;
    std::string mime_type;
};

ImagePayload payload_from_file(const std::filesystem::path& path);
/// PNG-encodes an in-memory image.
ImagePayload payload_from_image(const RgbImage& img);

/// Sends a prompt plus image and returns the raw text reply.
///
/// Implementations throw Error(kNetwork) for transient failures and
/// Error(kAuth) for rejected credentials.
class SurpriseProvider {
public:
    virtual ~SurpriseProvider() = default;
    virtual std::string name() const = 0;
    virtual std::string complete(const std::string& prompt, const ImagePayload& image) = 0;
};

/// Offline provider: rating = content_hash(image bytes) mod 101.
class StubProvider final : public SurpriseProvider {
public:
    std::string name() const override { return "stub"; }
    std::string complete(const std::string& prompt, const ImagePayload& image) override;
};

struct ProviderConfig {
    std::string endpoint;  ///< full URL, http:// or https://
    std::string model_name;
    std::string api_key;  ///< never serialized
    std::string api_key_env = "VCX_API_KEY";
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
    double timeout_s = 60.0;
    int max_retries = 3;
    std::int64_t backoff_ms = 500;
    /// JSON body; strings may contain {{model}}, {{prompt}}, {{image_base64}}
    /// and {{mime_type}} placeholders.
    nlohmann::json request_template;
    /// JSON pointer to the reply text in the response body.
    std::string response_pointer = "/choices/0/message/content";

    /// Reads a JSON config file; the key is taken from the environment
    /// variable named by api_key_env.
    static ProviderConfig from_file(const std::filesystem::path& path);
    static nlohmann::json default_request_template();

    /// Description safe for logs (no key).
    std::string describe() const;
};

/// Generic vision-LLM client over HTTP(S) driven by a request template.
class HttpProvider final : public SurpriseProvider {
public:
    explicit HttpProvider(ProviderConfig config);
    std::string name() const override;
    std::string complete(const std::string& prompt, const ImagePayload& image) override;

    nlohmann::json render_request(const std::string& prompt, const ImagePayload& image) const;

private:
    ProviderConfig config_;
};

struct RetryPolicy {
    int max_retries = 3;
    std::int64_t backoff_ms = 500;  ///< doubled after every failed attempt
};

/// Prompts the provider, retrying transient and unparseable replies with
/// exponential backoff.
SurpriseResult score_image(SurpriseProvider& provider, const ImagePayload& image, const std::string& image_id,
                           const SurprisePrompt& prompt = build_prompt(), const RetryPolicy& retry = {},
                           Clock& clock = system_clock());

/// Spaces request starts at least 60 / rpm seconds apart.
class RateLimiter {
public:
    RateLimiter(double requests_per_minute, Clock& clock);
    void acquire();

private:
    std::int64_t interval_ms_;
    std::int64_t next_ms_;
    bool started_ = false;
    Clock& clock_;
    std::mutex mutex_;
};

struct CorpusItem {
    std::string image_id;
    std::filesystem::path path;
};

struct CorpusOptions {
    std::filesystem::path results_path;  ///< append-only JSON lines; enables resume
    double requests_per_minute = 0.0;    ///< 0 disables limiting
    int in_flight = 1;
    RetryPolicy retry;
    SurprisePrompt prompt = build_prompt();
};

struct CorpusOutcome {
    std::string image_id;
    std::optional<SurpriseResult> result;
    std::string error;
    bool resumed = false;  ///< taken from an earlier run's results file
};

/// Scores every item, in manifest order. Items already scored in the results
/// file are not re-requested; per-item failures are recorded and skipped.
std::vector<CorpusOutcome> score_corpus(SurpriseProvider& provider, std::span<const CorpusItem> items,
                                        const CorpusOptions& options, Clock& clock = system_clock());

/// Successful results recorded in a results file; unreadable lines are skipped.
std::vector<SurpriseResult> read_results(const std::filesystem::path& path);

}  // namespace vcx
