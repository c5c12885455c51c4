#pragma once

#include "vcx/btrank.hpp"
#include "vcx/clock.hpp"
#include "vcx/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vcx {

enum class Task { kComplexity, kSurprise };

const char* task_name(Task task) noexcept;
Task parse_task(const std::string& name);

struct ExperimentConfig {
    std::vector<std::string> corpus;
    int trials_per_session = 200;
    int raters_per_pair = 3;
    int attention_checks_per_session = 3;
    std::int64_t target_total_comparisons = 6000;
    std::uint64_t seed = 0;
    Task task = Task::kComplexity;
    /// Write a state snapshot every this many logged events; 0 disables.
    int snapshot_every = 500;

    void validate() const;
    nlohmann::ordered_json to_json() const;
};

/// Times each image has been drawn into a fresh pair.
using SelectionCounts = std::map<std::string, std::int64_t>;

/// Probability that each corpus image is drawn first: weights 1 / (1 + count).
std::vector<double> first_draw_probabilities(std::span<const std::string> corpus, const SelectionCounts& counts);

/// Two distinct images drawn without replacement with weights 1 / (1 + count).
/// Does not modify the counts.
std::pair<std::string, std::string> draw_pair(std::span<const std::string> corpus, const SelectionCounts& counts,
                                              Rng& rng);

inline constexpr const char* kLeft = "left";
inline constexpr const char* kRight = "right";

struct Trial {
    int index = 0;
    std::string image_a;  ///< shown on the left
    std::string image_b;  ///< shown on the right
    bool attention = false;
    std::string instructed_side;  ///< kLeft or kRight on attention trials
    std::int64_t pair_id = -1;    ///< -1 on attention trials
};

enum class SessionStatus { kActive, kComplete, kExcluded };

const char* status_name(SessionStatus status) noexcept;

struct Session {
    std::string session_id;
    std::string rater_id;
    std::vector<int> attention_positions;  ///< sorted
    std::vector<Trial> issued_trials;
    std::vector<std::size_t> record_indices;  ///< into the experiment's record list
    SessionStatus status = SessionStatus::kActive;
    int failed_checks = 0;
    std::optional<nlohmann::json> questionnaire;

    bool awaiting_answer() const { return status == SessionStatus::kActive && record_indices.size() < issued_trials.size(); }
};

struct ChoiceOutcome {
    ComparisonRecord record;
    SessionStatus status = SessionStatus::kActive;
    std::optional<Trial> next_trial;
};

nlohmann::ordered_json record_to_json(const ComparisonRecord& r);
ComparisonRecord record_from_json(const nlohmann::json& j);
/// Reads exported comparison lines; blank lines are ignored.
std::vector<ComparisonRecord> read_comparisons(const std::filesystem::path& path);

/// Pairwise-comparison collection protocol.
///
/// Pairs needing more raters are served before fresh pairs; fresh pairs are
/// drawn with inverse-frequency weights. Attention checks sit at seeded
/// positions in every session and a second failed check excludes the
/// session, returning its pair slots to the pending queue.
///
/// With a data directory every successful command is appended to
/// events.jsonl before the call returns, and the state is rebuilt from the
/// latest snapshot plus the log tail on construction. All public methods
/// are serialized by one mutex.
class Experiment {
public:
    Experiment(ExperimentConfig config, std::filesystem::path data_dir = {}, Clock& clock = system_clock());
    ~Experiment();

    Experiment(const Experiment&) = delete;
    Experiment& operator=(const Experiment&) = delete;

    /// Returns the new session and its first trial (none if the comparison
    /// budget is already exhausted, in which case the session is complete).
    std::pair<Session, std::optional<Trial>> start_session(const std::string& rater_id);
    std::optional<Trial> current_trial(const std::string& session_id) const;
    ChoiceOutcome record_choice(const std::string& session_id, int trial_index, const std::string& winner);
    void submit_questionnaire(const std::string& session_id, const nlohmann::json& answers);

    /// Comparison records in timestamp order.
    std::vector<ComparisonRecord> export_comparisons(bool include_excluded = false) const;
    /// {session_id, rater_id, answers} per submitted questionnaire.
    std::vector<nlohmann::ordered_json> questionnaires() const;

    Session session(const std::string& session_id) const;
    SelectionCounts counts() const;
    std::int64_t fresh_pairs() const;
    const ExperimentConfig& config() const noexcept { return config_; }

    /// Canonical serialization of the complete in-memory state.
    nlohmann::ordered_json state_json() const;
    /// Writes a snapshot now (no-op without a data directory).
    void snapshot();

private:
    struct PairState {
        std::string a;
        std::string b;
        int live_slots = 0;
        std::set<std::string> raters;
    };

    Session& find_session(const std::string& session_id);
    const Session& find_session(const std::string& session_id) const;
    std::optional<Trial> issue_trial(Session& session);
    std::optional<std::int64_t> pending_pair_for(const std::string& rater) const;
    void exclude(Session& session);

    Session& apply_start(const std::string& rater_id, std::int64_t ts);
    ChoiceOutcome apply_choice(const std::string& session_id, int trial_index, const std::string& winner,
                               std::int64_t ts);
    void apply_questionnaire(const std::string& session_id, const nlohmann::json& answers, std::int64_t ts);

    void open_log();
    void replay(const std::filesystem::path& log_path, std::int64_t after_seq);
    void append_event(nlohmann::ordered_json event);
    void restore(const nlohmann::json& state);

    ExperimentConfig config_;
    std::filesystem::path data_dir_;
    Clock& clock_;
    Rng rng_;
    mutable std::mutex mutex_;

    SelectionCounts counts_;
    std::vector<PairState> pairs_;
    std::set<std::int64_t> pending_;
    std::map<std::string, std::set<std::pair<std::string, std::string>>> rater_seen_;
    std::map<std::string, Session> sessions_;
    std::map<std::string, std::string> active_by_rater_;
    std::vector<ComparisonRecord> records_;
    std::int64_t session_counter_ = 0;

    std::FILE* log_ = nullptr;
    std::int64_t next_seq_ = 1;
    std::int64_t events_since_snapshot_ = 0;
};

/// Static texts shown to raters for a task.
struct TaskTexts {
    std::string instructions;
    std::string practice_preamble;
    std::vector<std::string> questions;
    std::string trial_question;
};

TaskTexts task_texts(Task task);

}  // namespace vcx
