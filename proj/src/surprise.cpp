#include "vcx/surprise.hpp"

#include "vcx/error.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <regex>
#include <sstream>
#include <thread>

namespace vcx {

SurprisePrompt build_prompt() {
    return {
        "Q: Step by step, explain why this image is surprising or not. Consider factors like rare events, or "
        "unexpected content. Be precise in your reasoning. Then, on a precise scale from 0 to 100, rate the "
        "surprisal of this image.\n"
        "Provide your reasoning and numeric rating as follows:\n"
        "Reasoning: [your explanation]\n"
        "Rating: <<number>>"};
}

SurprisePrompt load_prompt(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kNotFound, "prompt file not found: " + path.string());
    return {std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>())};
}

std::string format_response(int rating, const std::string& reasoning) {
    return "Reasoning: " + reasoning + "\nRating: " + std::to_string(rating);
}

// ---------------------------------------------------------------------------
// Response parsing

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string strip_markup(std::string s) {
    for (const char* token : {"≪", "≫", "«", "»", "<<", ">>"}) {
        for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token)) {
            s.erase(pos, std::char_traits<char>::length(token));
        }
    }
    s.erase(std::remove_if(s.begin(), s.end(),
                           [](char c) { return c == '*' || c == '_' || c == '`' || c == '#' || c == '[' || c == ']'; }),
            s.end());
    return trim(s);
}

struct RatingLine {
    std::size_t offset;  ///< start of the line in the text
    double value;
};

std::optional<double> leading_number(const std::string& s) {
    static const std::regex kNumber(R"(^([+-]?\d+(?:\.\d+)?))");
    std::smatch m;
    if (!std::regex_search(s, m, kNumber)) return std::nullopt;
    return std::stod(m[1].str());
}

}  // namespace

SurpriseResult parse_response(const std::string& text) {
    // "Rating: 85", or "Surprise score: 85" when the score leads.
    static constexpr std::string_view kLabels[] = {"rating:", "score:"};
    static constexpr std::string_view kReasoning = "reasoning:";
    const std::string folded = lower(text);

    std::optional<RatingLine> found;
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        const std::string line = folded.substr(line_start, line_end - line_start);
        std::size_t pos = std::string::npos, label = 0;
        for (const auto l : kLabels) {
            const auto at = line.rfind(l);
            if (at != std::string::npos && (pos == std::string::npos || at > pos)) {
                pos = at;
                label = l.size();
            }
        }
        if (pos != std::string::npos) {
            const auto value = leading_number(
                strip_markup(text.substr(line_start + pos + label, line_end - line_start - pos - label)));
            // Later rating lines override earlier ones.
            if (value) found = RatingLine{line_start, *value};
        }
        line_start = line_end + 1;
    }
    if (!found) fail(ErrorCode::kParse, "no rating found in response");

    const double rounded = std::round(found->value);
    if (found->value < 0.0 || rounded > 100.0) {
        fail(ErrorCode::kRange, "rating out of range 0..100: " + std::to_string(found->value));
    }

    SurpriseResult result;
    result.rating = static_cast<int>(rounded);
    result.raw = text;
    const std::string before = text.substr(0, found->offset);
    const auto marker = folded.substr(0, found->offset).rfind(kReasoning);
    std::string reasoning = marker == std::string::npos ? before : before.substr(marker + kReasoning.size());
    if (marker == std::string::npos) {
        // Reasoning written after the rating line.
        const auto after = folded.find(kReasoning, found->offset);
        if (after != std::string::npos) reasoning = text.substr(after + kReasoning.size());
    }
    // Leading emphasis left over from "**Reasoning:**".
    const auto body = reasoning.find_first_not_of("*_ \t\r\n");
    reasoning = body == std::string::npos ? std::string() : reasoning.substr(body);
    result.reasoning = trim(reasoning);
    return result;
}

// ---------------------------------------------------------------------------
// Hashing and encoding

std::uint64_t content_hash(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        fail(ErrorCode::kInternal, "sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xF];
    }
    return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

ImagePayload payload_from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kNotFound, "image not found: " + path.string());
    ImagePayload payload;
    payload.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    const auto& b = payload.bytes;
    if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8) {
        payload.mime_type = "image/jpeg";
    } else if (b.size() >= 8 && b[0] == 0x89 && b[1] == 'P') {
        payload.mime_type = "image/png";
    } else {
        payload.mime_type = "application/octet-stream";
    }
    return payload;
}

ImagePayload payload_from_image(const RgbImage& img) { return {encode_png(img), "image/png"}; }

// ---------------------------------------------------------------------------
// Providers

std::string StubProvider::complete(const std::string& /*prompt*/, const ImagePayload& image) {
    const int rating = static_cast<int>(content_hash(image.bytes) % 101);
    return format_response(rating, "Stub provider: rating derived from a hash of the image bytes.");
}

nlohmann::json ProviderConfig::default_request_template() {
    return nlohmann::json::parse(R"({
        "model": "{{model}}",
        "messages": [{
            "role": "user",
            "content": [
                {"type": "text", "text": "{{prompt}}"},
                {"type": "image_url", "image_url": {"url": "data:{{mime_type}};base64,{{image_base64}}"}}
            ]
        }]
    })");
}

ProviderConfig ProviderConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kNotFound, "provider config not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kParse, "invalid provider config " + path.string() + ": " + e.what());
    }
    ProviderConfig cfg;
    cfg.endpoint = j.value("endpoint", "");
    cfg.model_name = j.value("model_name", "");
    cfg.api_key_env = j.value("api_key_env", cfg.api_key_env);
    cfg.auth_header = j.value("auth_header", cfg.auth_header);
    cfg.auth_prefix = j.value("auth_prefix", cfg.auth_prefix);
    cfg.timeout_s = j.value("timeout_s", cfg.timeout_s);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.backoff_ms = j.value("backoff_ms", cfg.backoff_ms);
    cfg.response_pointer = j.value("response_pointer", cfg.response_pointer);
    cfg.request_template = j.contains("request_template") ? j["request_template"] : default_request_template();
    if (j.contains("api_key")) {
        fail(ErrorCode::kInvalidArgument, "provider config must not contain api_key; set " + cfg.api_key_env);
    }
    if (cfg.endpoint.empty()) fail(ErrorCode::kInvalidArgument, "provider config needs an endpoint");
    if (const char* key = std::getenv(cfg.api_key_env.c_str())) cfg.api_key = key;
    return cfg;
}

std::string ProviderConfig::describe() const {
    std::ostringstream out;
    out << "endpoint=" << endpoint << " model=" << model_name << " key_env=" << api_key_env
        << " key=" << (api_key.empty() ? "unset" : "set") << " timeout_s=" << timeout_s
        << " max_retries=" << max_retries;
    return out.str();
}

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {
    if (config_.request_template.is_null()) config_.request_template = ProviderConfig::default_request_template();
}

std::string HttpProvider::name() const { return config_.model_name.empty() ? "http" : "http:" + config_.model_name; }

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

void substitute(nlohmann::json& node, const std::map<std::string, std::string>& vars) {
    if (node.is_string()) {
        auto s = node.get<std::string>();
        for (const auto& [k, v] : vars) replace_all(s, k, v);
        node = s;
    } else if (node.is_structured()) {
        for (auto& child : node) substitute(child, vars);
    }
}

struct Url {
    std::string origin;  ///< scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, kUrl)) fail(ErrorCode::kInvalidArgument, "unsupported endpoint URL: " + url);
    return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

std::string redact(std::string text, const std::string& secret) {
    if (!secret.empty()) replace_all(text, secret, "***");
    return text;
}

}  // namespace

nlohmann::json HttpProvider::render_request(const std::string& prompt, const ImagePayload& image) const {
    nlohmann::json body = config_.request_template;
    substitute(body, {{"{{model}}", config_.model_name},
                      {"{{prompt}}", prompt},
                      {"{{mime_type}}", image.mime_type},
                      {"{{image_base64}}", base64_encode(image.bytes)}});
    return body;
}

std::string HttpProvider::complete(const std::string& prompt, const ImagePayload& image) {
    const Url url = split_url(config_.endpoint);
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::duration<double>(config_.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace(config_.auth_header, config_.auth_prefix + config_.api_key);

    const auto res = client.Post(url.path, headers, render_request(prompt, image).dump(), "application/json");
    if (!res) fail(ErrorCode::kNetwork, "request to " + url.origin + " failed: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403) {
        fail(ErrorCode::kAuth, "provider rejected credentials (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status == 429 || res->status >= 500) {
        fail(ErrorCode::kNetwork, "provider unavailable (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status != 200) {
        fail(ErrorCode::kInvalidArgument, "provider returned HTTP " + std::to_string(res->status) + ": " +
                                              redact(res->body.substr(0, 200), config_.api_key));
    }
    try {
        const auto body = nlohmann::json::parse(res->body);
        return body.at(nlohmann::json::json_pointer(config_.response_pointer)).get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kParse, std::string("unexpected provider response shape: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Scoring

SurpriseResult score_image(SurpriseProvider& provider, const ImagePayload& image, const std::string& image_id,
                           const SurprisePrompt& prompt, const RetryPolicy& retry, Clock& clock) {
    std::int64_t backoff = retry.backoff_ms;
    for (int attempt = 0;; ++attempt) {
        try {
            SurpriseResult result = parse_response(provider.complete(prompt.text, image));
            result.provider = provider.name();
            result.image_id = image_id;
            return result;
        } catch (const Error& e) {
            const bool transient =
                e.code() == ErrorCode::kNetwork || e.code() == ErrorCode::kParse || e.code() == ErrorCode::kRange;
            if (!transient || attempt >= retry.max_retries) throw;
        }
        clock.sleep_ms(backoff);
        backoff *= 2;
    }
}

RateLimiter::RateLimiter(double requests_per_minute, Clock& clock)
    : interval_ms_(requests_per_minute > 0.0 ? static_cast<std::int64_t>(std::ceil(60000.0 / requests_per_minute)) : 0),
      next_ms_(0),
      clock_(clock) {}

void RateLimiter::acquire() {
    if (interval_ms_ == 0) return;
    std::lock_guard lock(mutex_);
    std::int64_t now = clock_.now_ms();
    if (started_ && now < next_ms_) {
        clock_.sleep_ms(next_ms_ - now);
        now = next_ms_;
    }
    started_ = true;
    next_ms_ = now + interval_ms_;
}

namespace {

nlohmann::ordered_json result_to_json(const SurpriseResult& r, std::int64_t ts, const std::string& sha) {
    nlohmann::ordered_json j;
    j["image_id"] = r.image_id;
    j["rating"] = r.rating;
    j["reasoning"] = r.reasoning;
    j["provider"] = r.provider;
    j["timestamp"] = format_timestamp(ts);
    j["sha256"] = sha;
    j["raw"] = r.raw;
    return j;
}

}  // namespace

std::vector<SurpriseResult> read_results(const std::filesystem::path& path) {
    std::vector<SurpriseResult> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            continue;  // torn trailing write
        }
        if (!j.contains("rating")) continue;
        SurpriseResult r;
        r.image_id = j.value("image_id", "");
        r.rating = j.value("rating", 0);
        r.reasoning = j.value("reasoning", "");
        r.provider = j.value("provider", "");
        r.raw = j.value("raw", "");
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<CorpusOutcome> score_corpus(SurpriseProvider& provider, std::span<const CorpusItem> items,
                                        const CorpusOptions& options, Clock& clock) {
    std::map<std::string, SurpriseResult> done;
    if (!options.results_path.empty()) {
        for (auto& r : read_results(options.results_path)) done[r.image_id] = std::move(r);
    }

    std::vector<CorpusOutcome> outcomes(items.size());
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < items.size(); ++i) {
        outcomes[i].image_id = items[i].image_id;
        if (auto it = done.find(items[i].image_id); it != done.end()) {
            outcomes[i].result = it->second;
            outcomes[i].resumed = true;
        } else {
            todo.push_back(i);
        }
    }

    std::ofstream log;
    if (!options.results_path.empty()) {
        log.open(options.results_path, std::ios::app);
        if (!log) fail(ErrorCode::kIo, "cannot open results file " + options.results_path.string());
    }
    std::mutex log_mutex;
    auto append = [&](const nlohmann::ordered_json& j) {
        if (!log.is_open()) return;
        std::lock_guard lock(log_mutex);
        log << j.dump() << '\n';
        log.flush();
    };

    RateLimiter limiter(options.requests_per_minute, clock);
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (std::size_t k = cursor++; k < todo.size(); k = cursor++) {
            const std::size_t i = todo[k];
            CorpusOutcome& out = outcomes[i];
            try {
                const ImagePayload payload = payload_from_file(items[i].path);
                limiter.acquire();
                out.result = score_image(provider, payload, items[i].image_id, options.prompt, options.retry, clock);
                append(result_to_json(*out.result, clock.now_ms(), sha256_hex(payload.bytes)));
            } catch (const Error& e) {
                out.error = std::string(error_code_name(e.code())) + ": " + e.what();
                nlohmann::ordered_json j;
                j["image_id"] = items[i].image_id;
                j["error"] = out.error;
                j["provider"] = provider.name();
                j["timestamp"] = format_timestamp(clock.now_ms());
                append(j);
            }
        }
    };
    const int threads = std::max(1, std::min<int>(options.in_flight, static_cast<int>(todo.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    return outcomes;
}

}  // namespace vcx
