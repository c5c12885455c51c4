#pragma once

#include "vcx/dataset.hpp"
#include "vcx/experiment.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <variant>

namespace vcx {

using TomlValue = std::variant<std::string, std::int64_t, double, bool>;

/// Flat subset of TOML: `key = value` lines with basic and literal strings, integers,
/// floats and booleans, `#` comments, and `[table]` headers that prefix the
/// following keys as "table.key".
std::map<std::string, TomlValue> parse_toml(const std::string& text);

struct ServeConfig {
    ExperimentConfig experiment;
    Manifest manifest;  ///< supplies the corpus ids and the image files
    std::string host = "127.0.0.1";
};

/// Reads an experiment config. Keys (optionally under [experiment]):
/// manifest (required, relative to the config file), trials_per_session,
/// raters_per_pair, attention_checks_per_session, target_total_comparisons,
/// seed, task, snapshot_every, host.
ServeConfig load_serve_config(const std::filesystem::path& path);
ServeConfig parse_serve_config(const std::string& text, const std::filesystem::path& base_dir);

/// JSON shape of a trial served to the rater UI.
nlohmann::ordered_json trial_json(const Trial& trial, int total_trials);

/// HTTP front end of an Experiment.
///
///   POST /session                       {rater_id}
///   GET  /session/{id}/trial
///   POST /session/{id}/choice           {index, winner}
///   POST /session/{id}/questionnaire    {answers}
///   GET  /export?include_excluded=bool  line-delimited records
///   GET  /export/questionnaires
///   GET  /images/{id}
///   GET  /instructions
///   GET  /health
///
/// Errors are {"error": <code name>, "message": ...} with status 400 for
/// invalid arguments, 404 for unknown ids, 409 for state conflicts.
class ExperimentServer {
public:
    ExperimentServer(Experiment& experiment, std::map<std::string, std::filesystem::path> images);
    ~ExperimentServer();

    ExperimentServer(const ExperimentServer&) = delete;
    ExperimentServer& operator=(const ExperimentServer&) = delete;

    /// Binds the listening socket; port 0 picks a free port. Returns the port.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void run();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace vcx
