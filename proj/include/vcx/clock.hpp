#pragma once

#include <atomic>
#include <cstdint>
#include <string>

namespace vcx {

/// Time source for timestamps, rate limiting and retry backoff.
class Clock {
public:
    virtual ~Clock() = default;
    /// Milliseconds since the Unix epoch.
    virtual std::int64_t now_ms() = 0;
    virtual void sleep_ms(std::int64_t ms) = 0;
};

class SystemClock final : public Clock {
public:
    std::int64_t now_ms() override;
    void sleep_ms(std::int64_t ms) override;
};

/// Deterministic clock for tests. Each now_ms() call advances time by
/// `step_ms`; sleep_ms() advances it by the requested amount.
class ManualClock final : public Clock {
public:
    explicit ManualClock(std::int64_t start_ms = 1'700'000'000'000, std::int64_t step_ms = 0)
        : now_(start_ms), step_(step_ms) {}

    std::int64_t now_ms() override { return now_.fetch_add(step_); }
    void sleep_ms(std::int64_t ms) override {
        if (ms > 0) now_.fetch_add(ms);
    }
    std::int64_t peek() const { return now_.load(); }

private:
    std::atomic<std::int64_t> now_;
    std::int64_t step_;
};

SystemClock& system_clock();

/// "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string format_timestamp(std::int64_t ms);
/// Inverse of format_timestamp; throws kParse on malformed input.
std::int64_t parse_timestamp(const std::string& text);

}  // namespace vcx
