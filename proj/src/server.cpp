#include "vcx/server.hpp"

#include "vcx/error.hpp"

#include <httplib.h>

#include <charconv>
#include <fstream>
#include <iterator>

namespace vcx {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is outside any string.
std::string strip_comment(const std::string& line) {
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quote == '"' && c == '\\') {
            ++i;
        } else if (c == '"' || c == '\'') {
            if (!quote) {
                quote = c;
            } else if (quote == c) {
                quote = 0;
            }
        } else if (c == '#' && !quote) {
            return line.substr(0, i);
        }
    }
    return line;
}

TomlValue parse_toml_value(const std::string& raw, const std::string& where) {
    if (raw.empty()) fail(ErrorCode::kParse, where + ": missing value");
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"') fail(ErrorCode::kParse, where + ": unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
            char c = raw[i];
            if (c == '\\') {
                if (i + 2 >= raw.size()) fail(ErrorCode::kParse, where + ": bad escape");
                switch (raw[++i]) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: fail(ErrorCode::kParse, where + ": unsupported escape");
                }
            } else if (c == '"') {
                fail(ErrorCode::kParse, where + ": unexpected quote");
            }
            out += c;
        }
        return out;
    }
    if (raw.front() == '\'') {
        // Literal string: no escapes.
        if (raw.size() < 2 || raw.back() != '\'') fail(ErrorCode::kParse, where + ": unterminated string");
        const std::string out = raw.substr(1, raw.size() - 2);
        if (out.find('\'') != std::string::npos) fail(ErrorCode::kParse, where + ": unexpected quote");
        return out;
    }
    if (raw == "true") return true;
    if (raw == "false") return false;
    std::string digits;
    for (char c : raw) {
        if (c != '_') digits += c;
    }
    const char* first = digits.data();
    const char* last = first + digits.size();
    if (*first == '+') ++first;
    std::int64_t iv = 0;
    auto r = std::from_chars(first, last, iv);
    if (r.ec == std::errc() && r.ptr == last) return iv;
    double dv = 0.0;
    auto rd = std::from_chars(first, last, dv);
    if (rd.ec == std::errc() && rd.ptr == last) return dv;
    fail(ErrorCode::kParse, where + ": unsupported value '" + raw + "'");
}

}  // namespace

std::map<std::string, TomlValue> parse_toml(const std::string& text) {
    std::map<std::string, TomlValue> out;
    std::string table;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = trim(strip_comment(text.substr(pos, nl - pos)));
        pos = nl + 1;
        ++lineno;
        const std::string where = "line " + std::to_string(lineno);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.rfind("[[", 0) == 0) fail(ErrorCode::kParse, where + ": bad table header");
            table = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorCode::kParse, where + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) fail(ErrorCode::kParse, where + ": empty key");
        if (!table.empty()) key = table + "." + key;
        if (!out.emplace(key, parse_toml_value(trim(line.substr(eq + 1)), where)).second) {
            fail(ErrorCode::kParse, where + ": duplicate key " + key);
        }
    }
    return out;
}

ServeConfig parse_serve_config(const std::string& text, const std::filesystem::path& base_dir) {
    auto values = parse_toml(text);
    ServeConfig cfg;
    auto take = [&](const std::string& key) -> std::optional<TomlValue> {
        for (const std::string& k : {key, "experiment." + key}) {
            const auto it = values.find(k);
            if (it != values.end()) {
                auto v = it->second;
                values.erase(it);
                return v;
            }
        }
        return std::nullopt;
    };
    auto as_int = [](const TomlValue& v, const char* key) -> std::int64_t {
        if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
        fail(ErrorCode::kInvalidArgument, std::string("config key ") + key + " must be an integer");
    };
    auto as_string = [](const TomlValue& v, const char* key) -> std::string {
        if (const auto* s = std::get_if<std::string>(&v)) return *s;
        fail(ErrorCode::kInvalidArgument, std::string("config key ") + key + " must be a string");
    };

    const auto manifest = take("manifest");
    if (!manifest) fail(ErrorCode::kInvalidArgument, "config lacks the manifest key");
    std::filesystem::path mpath = as_string(*manifest, "manifest");
    if (mpath.is_relative()) mpath = base_dir / mpath;
    cfg.manifest = read_manifest(mpath);

    auto& e = cfg.experiment;
    for (const auto& r : cfg.manifest.rows) e.corpus.push_back(r.image_id);
    if (auto v = take("trials_per_session")) e.trials_per_session = static_cast<int>(as_int(*v, "trials_per_session"));
    if (auto v = take("raters_per_pair")) e.raters_per_pair = static_cast<int>(as_int(*v, "raters_per_pair"));
    if (auto v = take("attention_checks_per_session")) {
        e.attention_checks_per_session = static_cast<int>(as_int(*v, "attention_checks_per_session"));
    }
    if (auto v = take("target_total_comparisons")) e.target_total_comparisons = as_int(*v, "target_total_comparisons");
    if (auto v = take("seed")) e.seed = static_cast<std::uint64_t>(as_int(*v, "seed"));
    if (auto v = take("task")) e.task = parse_task(as_string(*v, "task"));
    if (auto v = take("snapshot_every")) e.snapshot_every = static_cast<int>(as_int(*v, "snapshot_every"));
    if (auto v = take("host")) cfg.host = as_string(*v, "host");
    if (!values.empty()) fail(ErrorCode::kInvalidArgument, "unknown config key " + values.begin()->first);
    e.validate();
    return cfg;
}

ServeConfig load_serve_config(const std::filesystem::path& path) {
    return parse_serve_config(read_text_file(path), path.parent_path());
}

nlohmann::ordered_json trial_json(const Trial& trial, int total_trials) {
    nlohmann::ordered_json j;
    j["index"] = trial.index;
    j["image_a"] = trial.image_a;
    j["image_b"] = trial.image_b;
    j["image_a_url"] = "/images/" + trial.image_a;
    j["image_b_url"] = "/images/" + trial.image_b;
    nlohmann::ordered_json att;
    att["active"] = trial.attention;
    att["instructed_side"] = trial.attention ? nlohmann::ordered_json(trial.instructed_side) : nlohmann::ordered_json();
    j["attention"] = att;
    j["total"] = total_trials;
    return j;
}

// ---------------------------------------------------------------------------

struct ExperimentServer::Impl {
    Experiment& experiment;
    std::map<std::string, std::filesystem::path> images;
    httplib::Server http;

    Impl(Experiment& e, std::map<std::string, std::filesystem::path> img) : experiment(e), images(std::move(img)) {}

    static int http_status(ErrorCode code) {
        switch (code) {
            case ErrorCode::kInvalidArgument:
            case ErrorCode::kParse:
            case ErrorCode::kRange: return 400;
            case ErrorCode::kNotFound: return 404;
            case ErrorCode::kState: return 409;
            default: return 500;
        }
    }

    static void send_json(httplib::Response& res, const nlohmann::ordered_json& body, int status = 200) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
        nlohmann::ordered_json body;
        body["error"] = code;
        body["message"] = message;
        send_json(res, body, status);
    }

    template <typename F>
    auto guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, http_status(e.code()), error_code_name(e.code()), e.what());
            } catch (const nlohmann::json::exception& e) {
                send_error(res, 400, error_code_name(ErrorCode::kInvalidArgument), e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, error_code_name(ErrorCode::kInternal), e.what());
            }
        };
    }

    static nlohmann::json body_object(const httplib::Request& req) {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object()) fail(ErrorCode::kInvalidArgument, "request body must be a JSON object");
        return j;
    }

    static std::string string_field(const nlohmann::json& j, const char* key) {
        const auto it = j.find(key);
        if (it == j.end() || !it->is_string()) fail(ErrorCode::kInvalidArgument, std::string("missing string field ") + key);
        return it->get<std::string>();
    }

    nlohmann::ordered_json completion_json(SessionStatus status) const {
        nlohmann::ordered_json j;
        j["complete"] = true;
        j["status"] = status_name(status);
        if (status == SessionStatus::kComplete) j["questionnaire"] = task_texts(experiment.config().task).questions;
        return j;
    }

    void install() {
        const int total = experiment.config().trials_per_session;
        http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });

        http.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
                     send_json(res, {{"status", "ok"}});
                 }));

        http.Get("/instructions", guarded([this](const httplib::Request&, httplib::Response& res) {
                     const Task task = experiment.config().task;
                     const TaskTexts t = task_texts(task);
                     nlohmann::ordered_json j;
                     j["task"] = task_name(task);
                     j["instructions"] = t.instructions;
                     j["practice_preamble"] = t.practice_preamble;
                     j["trial_question"] = t.trial_question;
                     j["questions"] = t.questions;
                     j["trials_per_session"] = experiment.config().trials_per_session;
                     send_json(res, j);
                 }));

        http.Post("/session", guarded([this, total](const httplib::Request& req, httplib::Response& res) {
                      const auto body = body_object(req);
                      auto [session, trial] = experiment.start_session(string_field(body, "rater_id"));
                      nlohmann::ordered_json j;
                      j["session_id"] = session.session_id;
                      j["rater_id"] = session.rater_id;
                      j["task"] = task_name(experiment.config().task);
                      j["total"] = total;
                      if (trial) {
                          j["trial"] = trial_json(*trial, total);
                      } else {
                          j["trial"] = nullptr;
                          j.update(completion_json(session.status));
                      }
                      send_json(res, j, 201);
                  }));

        http.Get(R"(/session/([^/]+)/trial)", guarded([this, total](const httplib::Request& req, httplib::Response& res) {
                     const std::string id = req.matches[1];
                     if (const auto trial = experiment.current_trial(id)) {
                         send_json(res, trial_json(*trial, total));
                     } else {
                         send_json(res, completion_json(experiment.session(id).status));
                     }
                 }));

        http.Post(R"(/session/([^/]+)/choice)",
                  guarded([this, total](const httplib::Request& req, httplib::Response& res) {
                      const auto body = body_object(req);
                      const auto idx = body.find("index");
                      if (idx == body.end() || !idx->is_number_integer()) {
                          fail(ErrorCode::kInvalidArgument, "missing integer field index");
                      }
                      const auto outcome =
                          experiment.record_choice(req.matches[1], idx->get<int>(), string_field(body, "winner"));
                      nlohmann::ordered_json j;
                      j["accepted"] = true;
                      j["status"] = status_name(outcome.status);
                      if (outcome.next_trial) {
                          j["next_trial"] = trial_json(*outcome.next_trial, total);
                      } else {
                          j.update(completion_json(outcome.status));
                      }
                      send_json(res, j);
                  }));

        http.Post(R"(/session/([^/]+)/questionnaire)",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto body = body_object(req);
                      const auto answers = body.find("answers");
                      if (answers == body.end()) fail(ErrorCode::kInvalidArgument, "missing field answers");
                      experiment.submit_questionnaire(req.matches[1], *answers);
                      send_json(res, {{"accepted", true}});
                  }));

        http.Get("/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     bool include = false;
                     if (req.has_param("include_excluded")) {
                         const auto v = req.get_param_value("include_excluded");
                         if (v == "true" || v == "1") {
                             include = true;
                         } else if (v != "false" && v != "0") {
                             fail(ErrorCode::kInvalidArgument, "include_excluded must be true or false");
                         }
                     }
                     std::string out;
                     for (const auto& r : experiment.export_comparisons(include)) out += record_to_json(r).dump() + "\n";
                     res.set_content(out, "application/x-ndjson");
                 }));

        http.Get("/export/questionnaires", guarded([this](const httplib::Request&, httplib::Response& res) {
                     std::string out;
                     for (const auto& q : experiment.questionnaires()) out += q.dump() + "\n";
                     res.set_content(out, "application/x-ndjson");
                 }));

        http.Get(R"(/images/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const auto it = images.find(req.matches[1]);
                     if (it == images.end()) fail(ErrorCode::kNotFound, "unknown image " + std::string(req.matches[1]));
                     std::ifstream in(it->second, std::ios::binary);
                     if (!in) fail(ErrorCode::kNotFound, "image file missing for " + it->first);
                     std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
                     auto ext = it->second.extension().string();
                     for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                     const char* mime = ext == ".png"                    ? "image/png"
                                        : ext == ".jpg" || ext == ".jpeg" ? "image/jpeg"
                                                                          : "application/octet-stream";
                     res.set_content(std::move(bytes), mime);
                 }));
    }
};

ExperimentServer::ExperimentServer(Experiment& experiment, std::map<std::string, std::filesystem::path> images)
    : impl_(std::make_unique<Impl>(experiment, std::move(images))) {
    impl_->install();
}

ExperimentServer::~ExperimentServer() { stop(); }

int ExperimentServer::bind(const std::string& host, int port) {
    if (port < 0 || port > 65535) fail(ErrorCode::kInvalidArgument, "port out of range");
    int bound = port;
    if (port == 0) {
        bound = impl_->http.bind_to_any_port(host);
    } else if (!impl_->http.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) fail(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(port));
    return bound;
}

void ExperimentServer::run() { impl_->http.listen_after_bind(); }

void ExperimentServer::stop() {
    if (impl_->http.is_running()) impl_->http.stop();
}

void ExperimentServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace vcx
