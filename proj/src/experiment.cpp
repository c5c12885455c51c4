#include "vcx/experiment.hpp"

#include "vcx/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>

namespace vcx {

const char* task_name(Task task) noexcept { return task == Task::kSurprise ? "surprise" : "complexity"; }

Task parse_task(const std::string& name) {
    if (name == "complexity") return Task::kComplexity;
    if (name == "surprise") return Task::kSurprise;
    fail(ErrorCode::kInvalidArgument, "unknown task '" + name + "' (expected complexity or surprise)");
}

const char* status_name(SessionStatus status) noexcept {
    switch (status) {
        case SessionStatus::kActive: return "active";
        case SessionStatus::kComplete: return "complete";
        case SessionStatus::kExcluded: return "excluded";
    }
    return "unknown";
}

void ExperimentConfig::validate() const {
    if (corpus.size() < 2) fail(ErrorCode::kInvalidArgument, "experiment corpus needs at least 2 images");
    auto sorted = corpus;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        fail(ErrorCode::kInvalidArgument, "experiment corpus ids must be unique");
    }
    if (attention_checks_per_session < 0 || trials_per_session <= attention_checks_per_session) {
        fail(ErrorCode::kInvalidArgument, "trials_per_session must exceed attention_checks_per_session");
    }
    if (raters_per_pair < 1) fail(ErrorCode::kInvalidArgument, "raters_per_pair must be >= 1");
    if (target_total_comparisons < 1) fail(ErrorCode::kInvalidArgument, "target_total_comparisons must be >= 1");
    if (snapshot_every < 0) fail(ErrorCode::kInvalidArgument, "snapshot_every must be >= 0");
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    j["corpus"] = corpus;
    j["trials_per_session"] = trials_per_session;
    j["raters_per_pair"] = raters_per_pair;
    j["attention_checks_per_session"] = attention_checks_per_session;
    j["target_total_comparisons"] = target_total_comparisons;
    j["seed"] = seed;
    j["task"] = task_name(task);
    return j;
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<double> first_draw_probabilities(std::span<const std::string> corpus, const SelectionCounts& counts) {
    std::vector<double> w(corpus.size());
    double total = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto it = counts.find(corpus[i]);
        w[i] = 1.0 / (1.0 + static_cast<double>(it == counts.end() ? 0 : it->second));
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

namespace {

std::size_t weighted_index(std::span<const double> weights, Rng& rng) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last = i;
        if (u < acc) return i;
    }
    return last;
}

std::pair<std::string, std::string> pair_key(const std::string& a, const std::string& b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
}

}  // namespace

std::pair<std::string, std::string> draw_pair(std::span<const std::string> corpus, const SelectionCounts& counts,
                                              Rng& rng) {
    if (corpus.size() < 2) fail(ErrorCode::kInvalidArgument, "pair sampling needs at least 2 images");
    std::vector<double> w(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto it = counts.find(corpus[i]);
        w[i] = 1.0 / (1.0 + static_cast<double>(it == counts.end() ? 0 : it->second));
    }
    const std::size_t first = weighted_index(w, rng);
    w[first] = 0.0;
    const std::size_t second = weighted_index(w, rng);
    return {corpus[first], corpus[second]};
}

// ---------------------------------------------------------------------------
// Records

nlohmann::ordered_json record_to_json(const ComparisonRecord& r) {
    nlohmann::ordered_json j;
    j["session_id"] = r.session_id;
    j["rater_id"] = r.rater;
    j["trial_index"] = r.trial_index;
    j["item_a"] = r.item_a;
    j["item_b"] = r.item_b;
    j["winner"] = r.winner;
    j["timestamp"] = format_timestamp(r.timestamp_ms);
    j["is_attention_check"] = r.is_attention_check;
    j["attention_passed"] = r.attention_passed;
    j["excluded"] = r.excluded;
    j["task"] = r.task;
    return j;
}

ComparisonRecord record_from_json(const nlohmann::json& j) {
    try {
        ComparisonRecord r;
        r.session_id = j.value("session_id", "");
        r.rater = j.value("rater_id", "");
        r.trial_index = j.value("trial_index", 0);
        r.item_a = j.at("item_a").get<std::string>();
        r.item_b = j.at("item_b").get<std::string>();
        r.winner = j.at("winner").get<std::string>();
        r.timestamp_ms = j.contains("timestamp") ? parse_timestamp(j.at("timestamp").get<std::string>()) : 0;
        r.is_attention_check = j.value("is_attention_check", false);
        r.attention_passed = j.value("attention_passed", false);
        r.excluded = j.value("excluded", false);
        r.task = j.value("task", "complexity");
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kParse, std::string("malformed comparison record: ") + e.what());
    }
}

std::vector<ComparisonRecord> read_comparisons(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kNotFound, "comparisons file not found: " + path.string());
    std::vector<ComparisonRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::kParse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// State machine

Experiment::Experiment(ExperimentConfig config, std::filesystem::path data_dir, Clock& clock)
    : config_(std::move(config)), data_dir_(std::move(data_dir)), clock_(clock), rng_(config_.seed) {
    config_.validate();
    for (const auto& id : config_.corpus) counts_[id] = 0;
    if (!data_dir_.empty()) open_log();
}

Experiment::~Experiment() {
    if (log_) std::fclose(log_);
}

Session& Experiment::find_session(const std::string& session_id) {
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) fail(ErrorCode::kNotFound, "unknown session " + session_id);
    return it->second;
}

const Session& Experiment::find_session(const std::string& session_id) const {
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) fail(ErrorCode::kNotFound, "unknown session " + session_id);
    return it->second;
}

std::optional<std::int64_t> Experiment::pending_pair_for(const std::string& rater) const {
    const auto seen = rater_seen_.find(rater);
    for (const std::int64_t id : pending_) {
        const PairState& p = pairs_[static_cast<std::size_t>(id)];
        if (seen == rater_seen_.end() || !seen->second.contains(pair_key(p.a, p.b))) return id;
    }
    return std::nullopt;
}

std::optional<Trial> Experiment::issue_trial(Session& session) {
    const int index = static_cast<int>(session.issued_trials.size());
    if (index >= config_.trials_per_session) return std::nullopt;
    Trial trial;
    trial.index = index;
    if (std::binary_search(session.attention_positions.begin(), session.attention_positions.end(), index)) {
        const auto& image = config_.corpus[rng_.below(config_.corpus.size())];
        trial.attention = true;
        trial.image_a = image;
        trial.image_b = image;
        trial.instructed_side = rng_.below(2) == 0 ? kLeft : kRight;
        session.issued_trials.push_back(trial);
        return trial;
    }

    auto& seen = rater_seen_[session.rater_id];
    std::optional<std::int64_t> pid = pending_pair_for(session.rater_id);
    if (!pid && static_cast<std::int64_t>(pairs_.size()) < config_.target_total_comparisons) {
        constexpr int kMaxDraws = 64;
        for (int attempt = 0; attempt < kMaxDraws && !pid; ++attempt) {
            auto [a, b] = draw_pair(config_.corpus, counts_, rng_);
            if (seen.contains(pair_key(a, b))) continue;
            ++counts_[a];
            ++counts_[b];
            pairs_.push_back(PairState{std::move(a), std::move(b), 0, {}});
            pid = static_cast<std::int64_t>(pairs_.size()) - 1;
        }
    }
    if (!pid) return std::nullopt;

    PairState& pair = pairs_[static_cast<std::size_t>(*pid)];
    ++pair.live_slots;
    pair.raters.insert(session.rater_id);
    seen.insert(pair_key(pair.a, pair.b));
    if (pair.live_slots >= config_.raters_per_pair) {
        pending_.erase(*pid);
    } else {
        pending_.insert(*pid);
    }
    const bool swap = rng_.below(2) == 1;
    trial.image_a = swap ? pair.b : pair.a;
    trial.image_b = swap ? pair.a : pair.b;
    trial.pair_id = *pid;
    session.issued_trials.push_back(trial);
    return trial;
}

void Experiment::exclude(Session& session) {
    session.status = SessionStatus::kExcluded;
    active_by_rater_.erase(session.rater_id);
    for (const auto idx : session.record_indices) records_[idx].excluded = true;
    // The excluded rater stays in each pair's rater set so they are never
    // shown the pair again; the slot itself goes back to the queue.
    for (const Trial& t : session.issued_trials) {
        if (t.attention) continue;
        PairState& pair = pairs_[static_cast<std::size_t>(t.pair_id)];
        --pair.live_slots;
        pending_.insert(t.pair_id);
    }
}

Session& Experiment::apply_start(const std::string& rater_id, std::int64_t /*ts*/) {
    if (rater_id.empty()) fail(ErrorCode::kInvalidArgument, "rater_id must be nonempty");
    if (active_by_rater_.contains(rater_id)) {
        fail(ErrorCode::kState, "rater " + rater_id + " already has an active session");
    }
    char id[32];
    std::snprintf(id, sizeof id, "s%06lld", static_cast<long long>(++session_counter_));
    Session session;
    session.session_id = id;
    session.rater_id = rater_id;

    // Partial Fisher-Yates over trial positions.
    std::vector<int> positions(static_cast<std::size_t>(config_.trials_per_session));
    std::iota(positions.begin(), positions.end(), 0);
    const auto k = static_cast<std::size_t>(config_.attention_checks_per_session);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng_.below(positions.size() - i));
        std::swap(positions[i], positions[j]);
    }
    session.attention_positions.assign(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(session.attention_positions.begin(), session.attention_positions.end());

    auto [it, inserted] = sessions_.emplace(session.session_id, std::move(session));
    Session& s = it->second;
    active_by_rater_[rater_id] = s.session_id;
    if (!issue_trial(s)) {
        s.status = SessionStatus::kComplete;
        active_by_rater_.erase(rater_id);
    }
    return s;
}

ChoiceOutcome Experiment::apply_choice(const std::string& session_id, int trial_index, const std::string& winner,
                                       std::int64_t ts) {
    Session& session = find_session(session_id);
    if (session.status == SessionStatus::kExcluded) fail(ErrorCode::kState, "session " + session_id + " is excluded");
    if (session.status == SessionStatus::kComplete) fail(ErrorCode::kState, "session " + session_id + " is complete");
    if (!session.awaiting_answer() || trial_index != session.issued_trials.back().index) {
        fail(ErrorCode::kState, "out-of-order trial " + std::to_string(trial_index) + " for session " + session_id);
    }
    const Trial& trial = session.issued_trials.back();
    std::string side;
    if (winner == kLeft || (!trial.attention && winner == trial.image_a)) {
        side = kLeft;
    } else if (winner == kRight || (!trial.attention && winner == trial.image_b)) {
        side = kRight;
    } else {
        fail(ErrorCode::kInvalidArgument, "invalid winner '" + winner + "' for trial " + std::to_string(trial_index));
    }

    ComparisonRecord record;
    record.session_id = session.session_id;
    record.rater = session.rater_id;
    record.trial_index = trial.index;
    record.item_a = trial.image_a;
    record.item_b = trial.image_b;
    record.winner = side == kLeft ? trial.image_a : trial.image_b;
    record.timestamp_ms = ts;
    record.is_attention_check = trial.attention;
    record.attention_passed = trial.attention && side == trial.instructed_side;
    record.task = task_name(config_.task);
    records_.push_back(record);
    session.record_indices.push_back(records_.size() - 1);

    ChoiceOutcome outcome;
    if (trial.attention && !record.attention_passed && ++session.failed_checks > 1) {
        exclude(session);
        outcome.record = records_.back();
        outcome.status = session.status;
        return outcome;
    }
    outcome.next_trial = issue_trial(session);
    if (!outcome.next_trial) {
        session.status = SessionStatus::kComplete;
        active_by_rater_.erase(session.rater_id);
    }
    outcome.record = records_.back();
    outcome.status = session.status;
    return outcome;
}

void Experiment::apply_questionnaire(const std::string& session_id, const nlohmann::json& answers, std::int64_t /*ts*/) {
    Session& session = find_session(session_id);
    if (session.status != SessionStatus::kComplete) {
        fail(ErrorCode::kState, "questionnaire is only accepted for complete sessions");
    }
    if (session.questionnaire) fail(ErrorCode::kState, "questionnaire already submitted for " + session_id);
    if (!answers.is_object()) fail(ErrorCode::kInvalidArgument, "questionnaire answers must be an object");
    session.questionnaire = answers;
}

// ---------------------------------------------------------------------------
// Public commands

std::pair<Session, std::optional<Trial>> Experiment::start_session(const std::string& rater_id) {
    std::lock_guard lock(mutex_);
    const std::int64_t ts = clock_.now_ms();
    Session& s = apply_start(rater_id, ts);
    nlohmann::ordered_json ev;
    ev["type"] = "start_session";
    ev["rater_id"] = rater_id;
    ev["ts_ms"] = ts;
    append_event(std::move(ev));
    std::optional<Trial> first;
    if (s.awaiting_answer()) first = s.issued_trials.back();
    return {s, first};
}

std::optional<Trial> Experiment::current_trial(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    const Session& s = find_session(session_id);
    if (!s.awaiting_answer()) return std::nullopt;
    return s.issued_trials.back();
}

ChoiceOutcome Experiment::record_choice(const std::string& session_id, int trial_index, const std::string& winner) {
    std::lock_guard lock(mutex_);
    const std::int64_t ts = clock_.now_ms();
    ChoiceOutcome outcome = apply_choice(session_id, trial_index, winner, ts);
    nlohmann::ordered_json ev;
    ev["type"] = "choice";
    ev["session_id"] = session_id;
    ev["index"] = trial_index;
    ev["winner"] = winner;
    ev["ts_ms"] = ts;
    ev["record"] = record_to_json(outcome.record);
    append_event(std::move(ev));
    return outcome;
}

void Experiment::submit_questionnaire(const std::string& session_id, const nlohmann::json& answers) {
    std::lock_guard lock(mutex_);
    const std::int64_t ts = clock_.now_ms();
    apply_questionnaire(session_id, answers, ts);
    nlohmann::ordered_json ev;
    ev["type"] = "questionnaire";
    ev["session_id"] = session_id;
    ev["answers"] = answers;
    ev["ts_ms"] = ts;
    append_event(std::move(ev));
}

std::vector<ComparisonRecord> Experiment::export_comparisons(bool include_excluded) const {
    std::lock_guard lock(mutex_);
    std::vector<ComparisonRecord> out;
    for (const auto& r : records_) {
        if (include_excluded || !r.excluded) out.push_back(r);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ComparisonRecord& a, const ComparisonRecord& b) { return a.timestamp_ms < b.timestamp_ms; });
    return out;
}

std::vector<nlohmann::ordered_json> Experiment::questionnaires() const {
    std::lock_guard lock(mutex_);
    std::vector<nlohmann::ordered_json> out;
    for (const auto& [id, s] : sessions_) {
        if (!s.questionnaire) continue;
        nlohmann::ordered_json j;
        j["session_id"] = id;
        j["rater_id"] = s.rater_id;
        j["answers"] = *s.questionnaire;
        out.push_back(std::move(j));
    }
    return out;
}

Session Experiment::session(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    return find_session(session_id);
}

SelectionCounts Experiment::counts() const {
    std::lock_guard lock(mutex_);
    return counts_;
}

std::int64_t Experiment::fresh_pairs() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::int64_t>(pairs_.size());
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

nlohmann::ordered_json trial_to_json(const Trial& t) {
    nlohmann::ordered_json j;
    j["index"] = t.index;
    j["image_a"] = t.image_a;
    j["image_b"] = t.image_b;
    j["attention"] = t.attention;
    j["instructed_side"] = t.instructed_side;
    j["pair_id"] = t.pair_id;
    return j;
}

Trial trial_from_json(const nlohmann::json& j) {
    Trial t;
    t.index = j.at("index").get<int>();
    t.image_a = j.at("image_a").get<std::string>();
    t.image_b = j.at("image_b").get<std::string>();
    t.attention = j.at("attention").get<bool>();
    t.instructed_side = j.at("instructed_side").get<std::string>();
    t.pair_id = j.at("pair_id").get<std::int64_t>();
    return t;
}

SessionStatus status_from_name(const std::string& s) {
    if (s == "active") return SessionStatus::kActive;
    if (s == "complete") return SessionStatus::kComplete;
    if (s == "excluded") return SessionStatus::kExcluded;
    fail(ErrorCode::kParse, "unknown session status " + s);
}

const char* kLogName = "events.jsonl";
const char* kSnapshotName = "snapshot.json";

}  // namespace

nlohmann::ordered_json Experiment::state_json() const {
    nlohmann::ordered_json j;
    j["rng"] = rng_.serialize();
    j["session_counter"] = session_counter_;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (const auto& [id, c] : counts_) counts[id] = c;
    j["counts"] = counts;
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (const auto& p : pairs_) {
        pairs.push_back({{"a", p.a}, {"b", p.b}, {"live_slots", p.live_slots}, {"raters", p.raters}});
    }
    j["pairs"] = pairs;
    nlohmann::ordered_json sessions = nlohmann::ordered_json::array();
    for (const auto& [id, s] : sessions_) {
        nlohmann::ordered_json sj;
        sj["session_id"] = s.session_id;
        sj["rater_id"] = s.rater_id;
        sj["attention_positions"] = s.attention_positions;
        nlohmann::ordered_json trials = nlohmann::ordered_json::array();
        for (const auto& t : s.issued_trials) trials.push_back(trial_to_json(t));
        sj["issued_trials"] = trials;
        sj["record_indices"] = s.record_indices;
        sj["status"] = status_name(s.status);
        sj["failed_checks"] = s.failed_checks;
        sj["questionnaire"] = s.questionnaire ? *s.questionnaire : nlohmann::json();
        sessions.push_back(std::move(sj));
    }
    j["sessions"] = sessions;
    nlohmann::ordered_json records = nlohmann::ordered_json::array();
    for (const auto& r : records_) records.push_back(record_to_json(r));
    j["records"] = records;
    return j;
}

void Experiment::restore(const nlohmann::json& j) {
    rng_ = Rng::deserialize(j.at("rng").get<std::string>());
    session_counter_ = j.at("session_counter").get<std::int64_t>();
    counts_.clear();
    for (const auto& [id, c] : j.at("counts").items()) counts_[id] = c.get<std::int64_t>();
    pairs_.clear();
    pending_.clear();
    rater_seen_.clear();
    for (const auto& pj : j.at("pairs")) {
        PairState p{pj.at("a").get<std::string>(), pj.at("b").get<std::string>(), pj.at("live_slots").get<int>(),
                    pj.at("raters").get<std::set<std::string>>()};
        const auto id = static_cast<std::int64_t>(pairs_.size());
        if (p.live_slots < config_.raters_per_pair) pending_.insert(id);
        for (const auto& r : p.raters) rater_seen_[r].insert(pair_key(p.a, p.b));
        pairs_.push_back(std::move(p));
    }
    sessions_.clear();
    active_by_rater_.clear();
    for (const auto& sj : j.at("sessions")) {
        Session s;
        s.session_id = sj.at("session_id").get<std::string>();
        s.rater_id = sj.at("rater_id").get<std::string>();
        s.attention_positions = sj.at("attention_positions").get<std::vector<int>>();
        for (const auto& tj : sj.at("issued_trials")) s.issued_trials.push_back(trial_from_json(tj));
        s.record_indices = sj.at("record_indices").get<std::vector<std::size_t>>();
        s.status = status_from_name(sj.at("status").get<std::string>());
        s.failed_checks = sj.at("failed_checks").get<int>();
        if (!sj.at("questionnaire").is_null()) s.questionnaire = sj.at("questionnaire");
        if (s.status == SessionStatus::kActive) active_by_rater_[s.rater_id] = s.session_id;
        sessions_.emplace(s.session_id, std::move(s));
    }
    records_.clear();
    for (const auto& rj : j.at("records")) records_.push_back(record_from_json(rj));
}

void Experiment::open_log() {
    std::filesystem::create_directories(data_dir_);
    const auto log_path = data_dir_ / kLogName;
    const auto snap_path = data_dir_ / kSnapshotName;
    const std::string identity = config_.to_json().dump();

    std::int64_t after_seq = 0;
    if (std::filesystem::exists(snap_path)) {
        std::ifstream in(snap_path);
        nlohmann::json snap;
        try {
            snap = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::kState, std::string("corrupt snapshot: ") + e.what());
        }
        if (snap.at("config").dump() != nlohmann::json::parse(identity).dump()) {
            fail(ErrorCode::kState, "data directory was created with a different experiment config");
        }
        restore(snap.at("state"));
        after_seq = snap.at("seq").get<std::int64_t>();
        next_seq_ = after_seq + 1;
    }
    const bool fresh = !std::filesystem::exists(log_path) || std::filesystem::file_size(log_path) == 0;
    if (!fresh) replay(log_path, after_seq);

    log_ = std::fopen(log_path.c_str(), "ab");
    if (!log_) fail(ErrorCode::kIo, "cannot open event log " + log_path.string());
    if (fresh) {
        nlohmann::ordered_json header;
        header["seq"] = 0;
        header["type"] = "config";
        header["config"] = config_.to_json();
        const std::string line = header.dump() + "\n";
        std::fwrite(line.data(), 1, line.size(), log_);
        std::fflush(log_);
    }
}

void Experiment::replay(const std::filesystem::path& log_path, std::int64_t after_seq) {
    std::string content;
    {
        std::ifstream in(log_path, std::ios::binary);
        content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    std::size_t pos = 0;
    std::size_t good_end = 0;
    std::int64_t last_seq = after_seq;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) break;  // torn final write
        const std::string line = content.substr(pos, nl - pos);
        pos = nl + 1;
        nlohmann::json ev;
        try {
            ev = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            if (pos >= content.size()) break;
            fail(ErrorCode::kState, "corrupt event log line before offset " + std::to_string(pos));
        }
        good_end = pos;
        const auto seq = ev.at("seq").get<std::int64_t>();
        const auto type = ev.at("type").get<std::string>();
        if (type == "config") {
            if (ev.at("config").dump() != nlohmann::json::parse(config_.to_json().dump()).dump()) {
                fail(ErrorCode::kState, "data directory was created with a different experiment config");
            }
            continue;
        }
        if (seq <= after_seq) continue;
        const auto ts = ev.at("ts_ms").get<std::int64_t>();
        if (type == "start_session") {
            apply_start(ev.at("rater_id").get<std::string>(), ts);
        } else if (type == "choice") {
            apply_choice(ev.at("session_id").get<std::string>(), ev.at("index").get<int>(),
                         ev.at("winner").get<std::string>(), ts);
        } else if (type == "questionnaire") {
            apply_questionnaire(ev.at("session_id").get<std::string>(), ev.at("answers"), ts);
        } else {
            fail(ErrorCode::kState, "unknown event type " + type);
        }
        last_seq = seq;
    }
    if (good_end < content.size()) std::filesystem::resize_file(log_path, good_end);
    next_seq_ = last_seq + 1;
}

void Experiment::append_event(nlohmann::ordered_json event) {
    if (!log_) return;
    nlohmann::ordered_json line;
    line["seq"] = next_seq_++;
    for (auto& [k, v] : event.items()) line[k] = std::move(v);
    const std::string text = line.dump() + "\n";
    if (std::fwrite(text.data(), 1, text.size(), log_) != text.size() || std::fflush(log_) != 0) {
        fail(ErrorCode::kIo, "failed to append to event log");
    }
    if (config_.snapshot_every > 0 && ++events_since_snapshot_ >= config_.snapshot_every) {
        events_since_snapshot_ = 0;
        nlohmann::ordered_json snap;
        snap["seq"] = next_seq_ - 1;
        snap["config"] = config_.to_json();
        snap["state"] = state_json();
        const auto tmp = data_dir_ / (std::string(kSnapshotName) + ".tmp");
        {
            std::ofstream out(tmp, std::ios::trunc);
            out << snap.dump();
            if (!out) fail(ErrorCode::kIo, "failed to write snapshot");
        }
        std::filesystem::rename(tmp, data_dir_ / kSnapshotName);
    }
}

void Experiment::snapshot() {
    std::lock_guard lock(mutex_);
    if (!log_) return;
    nlohmann::ordered_json snap;
    snap["seq"] = next_seq_ - 1;
    snap["config"] = config_.to_json();
    snap["state"] = state_json();
    const auto tmp = data_dir_ / (std::string(kSnapshotName) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << snap.dump();
        if (!out) fail(ErrorCode::kIo, "failed to write snapshot");
    }
    std::filesystem::rename(tmp, data_dir_ / kSnapshotName);
}

// ---------------------------------------------------------------------------

TaskTexts task_texts(Task task) {
    TaskTexts t;
    if (task == Task::kSurprise) {
        t.instructions =
            "You will see two images side by side. Click the image whose content you find more surprising. "
            "There are no right or wrong answers; go with your first impression.";
        t.trial_question = "Which image is more surprising?";
        t.questions = {"What strategy did you use to decide which image was more surprising?",
                       "Were there particular kinds of images you consistently found more surprising?",
                       "Any other comments about the experiment?"};
    } else {
        t.instructions =
            "You will see two images side by side. Click the image that looks more visually complex to you. "
            "There are no right or wrong answers; go with your first impression.";
        t.trial_question = "Which image is more visually complex?";
        t.questions = {"What strategy did you use to rate visual complexity?",
                       "Were there particular kinds of images you consistently found more complex?",
                       "Any other comments about the experiment?"};
    }
    t.practice_preamble = "We will now show you some example pairs. These practice trials are not recorded.";
    return t;
}

}  // namespace vcx
