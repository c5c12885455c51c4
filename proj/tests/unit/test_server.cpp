#include "vcx/error.hpp"
#include "vcx/server.hpp"

#include "served.hpp"
#include "synth.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <sstream>

using vcx::ErrorCode;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const vcx::Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::kInternal;
}

vcx::ExperimentConfig config(int trials = 6, int checks = 1) {
    vcx::ExperimentConfig c;
    for (int i = 0; i < 8; ++i) c.corpus.push_back("im" + std::to_string(i));
    c.trials_per_session = trials;
    c.attention_checks_per_session = checks;
    c.target_total_comparisons = 50;
    c.seed = 5;
    return c;
}

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
    const auto res = c.Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res) << path;
    if (!res) return {};
    EXPECT_EQ(res->status, expect) << path << " " << res->body;
    return json::parse(res->body);
}

json get(httplib::Client& c, const std::string& path, int expect = 200) {
    const auto res = c.Get(path);
    EXPECT_TRUE(res) << path;
    if (!res) return {};
    EXPECT_EQ(res->status, expect) << path << " " << res->body;
    return json::parse(res->body);
}

std::vector<json> ndjson(const std::string& text) {
    std::vector<json> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.push_back(json::parse(line));
    }
    return out;
}

std::string answer(const json& trial) {
    if (trial["attention"]["active"].get<bool>()) return trial["attention"]["instructed_side"];
    return trial["image_a"];
}

}  // namespace

TEST(Toml, FlatSubset) {
    const auto t = vcx::parse_toml(R"(# experiment
name = "run \"one\""  # trailing comment
count = 42
ratio = 0.5
on = true

[experiment]
seed = -3
path = 'C:\raw'
)");
    EXPECT_EQ(std::get<std::string>(t.at("name")), "run \"one\"");
    EXPECT_EQ(std::get<std::int64_t>(t.at("count")), 42);
    EXPECT_EQ(std::get<double>(t.at("ratio")), 0.5);
    EXPECT_EQ(std::get<bool>(t.at("on")), true);
    EXPECT_EQ(std::get<std::int64_t>(t.at("experiment.seed")), -3);
    EXPECT_EQ(std::get<std::string>(t.at("experiment.path")), "C:\\raw");
    EXPECT_EQ(code_of([] { vcx::parse_toml("a = 1\na = 2\n"); }), ErrorCode::kParse);
    EXPECT_EQ(code_of([] { vcx::parse_toml("a = \n"); }), ErrorCode::kParse);
    EXPECT_EQ(code_of([] { vcx::parse_toml("a = \"open\n"); }), ErrorCode::kParse);
}

TEST(ServeConfigFile, ParsesAndValidates) {
    synth::TempDir dir;
    synth::spit(dir / "m.csv", "image_id,image_path\na,a.png\nb,b.png\nc,c.png\n");
    const auto cfg = vcx::parse_serve_config(R"(
manifest = "m.csv"
[experiment]
trials_per_session = 20
attention_checks_per_session = 1
raters_per_pair = 2
target_total_comparisons = 9
seed = 77
task = "surprise"
)",
                                             dir.path());
    EXPECT_EQ(cfg.experiment.corpus, (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(cfg.experiment.trials_per_session, 20);
    EXPECT_EQ(cfg.experiment.raters_per_pair, 2);
    EXPECT_EQ(cfg.experiment.seed, 77u);
    EXPECT_EQ(cfg.experiment.task, vcx::Task::kSurprise);
    EXPECT_EQ(cfg.host, "127.0.0.1");
    EXPECT_EQ(code_of([&] { vcx::parse_serve_config("manifest = \"m.csv\"\ncolour = 1\n", dir.path()); }),
              ErrorCode::kInvalidArgument);
    EXPECT_EQ(code_of([&] { vcx::parse_serve_config("seed = 1\n", dir.path()); }), ErrorCode::kInvalidArgument);
    EXPECT_EQ(code_of([&] {
                  vcx::parse_serve_config("manifest = \"m.csv\"\ntrials_per_session = \"ten\"\n", dir.path());
              }),
              ErrorCode::kInvalidArgument);
    EXPECT_EQ(code_of([&] { vcx::load_serve_config(dir / "none.toml"); }), ErrorCode::kNotFound);
}

TEST(TrialJson, Shape) {
    vcx::Trial t;
    t.index = 3;
    t.image_a = "x";
    t.image_b = "y";
    const auto j = vcx::trial_json(t, 200);
    EXPECT_EQ(j["index"], 3);
    EXPECT_EQ(j["image_a_url"], "/images/x");
    EXPECT_EQ(j["image_b_url"], "/images/y");
    EXPECT_EQ(j["attention"]["active"], false);
    EXPECT_TRUE(j["attention"]["instructed_side"].is_null());
    EXPECT_EQ(j["total"], 200);
}

TEST(Http, FullSessionFlow) {
    vcx::ManualClock clock(0, 1);
    vcx::Experiment exp(config(), {}, clock);
    synth::Served served(exp);
    auto c = served.client();

    EXPECT_EQ(get(*c, "/health")["status"], "ok");
    EXPECT_EQ(get(*c, "/instructions")["questions"].size(), 3u);

    const auto start = post(*c, "/session", {{"rater_id", "p1"}}, 201);
    const std::string sid = start["session_id"];
    EXPECT_EQ(start["total"], 6);
    json trial = start["trial"];
    EXPECT_EQ(get(*c, "/session/" + sid + "/trial"), trial);
    int checks = 0;
    json last;
    while (true) {
        checks += trial["attention"]["active"].get<bool>();
        last = post(*c, "/session/" + sid + "/choice", {{"index", trial["index"]}, {"winner", answer(trial)}}, 200);
        EXPECT_EQ(last["accepted"], true);
        if (!last.contains("next_trial")) break;
        trial = last["next_trial"];
    }
    EXPECT_EQ(checks, 1);
    EXPECT_EQ(last["complete"], true);
    EXPECT_EQ(last["status"], "complete");
    EXPECT_EQ(last["questionnaire"].size(), 3u);
    EXPECT_EQ(get(*c, "/session/" + sid + "/trial")["complete"], true);

    EXPECT_EQ(post(*c, "/session/" + sid + "/questionnaire", {{"answers", {{"q1", "texture"}}}}, 200)["accepted"], true);
    const auto qs = ndjson(c->Get("/export/questionnaires")->body);
    ASSERT_EQ(qs.size(), 1u);
    EXPECT_EQ(qs[0]["answers"]["q1"], "texture");

    const auto res = c->Get("/export");
    EXPECT_EQ(res->get_header_value("Content-Type"), "application/x-ndjson");
    const auto records = ndjson(res->body);
    ASSERT_EQ(records.size(), 6u);
    int tagged = 0;
    for (const auto& r : records) tagged += r["is_attention_check"].get<bool>();
    EXPECT_EQ(tagged, 1);
    EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST(Http, DoubleSubmitRecordsOnce) {
    vcx::ManualClock clock(0, 1);
    vcx::Experiment exp(config(6, 0), {}, clock);
    synth::Served served(exp);
    auto c = served.client();
    const auto start = post(*c, "/session", {{"rater_id", "p"}}, 201);
    const std::string sid = start["session_id"];
    const json body{{"index", 0}, {"winner", start["trial"]["image_b"]}};
    post(*c, "/session/" + sid + "/choice", body, 200);
    EXPECT_EQ(post(*c, "/session/" + sid + "/choice", body, 409)["error"], "invalid-state");
    EXPECT_EQ(ndjson(c->Get("/export")->body).size(), 1u);
}

TEST(Http, ErrorMapping) {
    vcx::ManualClock clock(0, 1);
    vcx::Experiment exp(config(), {}, clock);
    synth::Served served(exp);
    auto c = served.client();
    EXPECT_EQ(c->Post("/session", "{", "application/json")->status, 400);
    post(*c, "/session", {{"nobody", 1}}, 400);
    const auto start = post(*c, "/session", {{"rater_id", "p"}}, 201);
    post(*c, "/session", {{"rater_id", "p"}}, 409);
    const std::string sid = start["session_id"];
    post(*c, "/session/" + sid + "/choice", {{"index", 0}, {"winner", "not-shown"}}, 400);
    post(*c, "/session/" + sid + "/choice", {{"winner", "left"}}, 400);
    post(*c, "/session/nosuch/choice", {{"index", 0}, {"winner", "left"}}, 404);
    get(*c, "/session/nosuch/trial", 404);
    post(*c, "/session/" + sid + "/questionnaire", {{"answers", json::object()}}, 409);
    EXPECT_EQ(c->Get("/export?include_excluded=maybe")->status, 400);
    EXPECT_EQ(c->Get("/images/none")->status, 404);
    const auto opt = c->Options("/session");
    ASSERT_TRUE(opt);
    EXPECT_EQ(opt->status, 204);
}

TEST(Http, ExclusionOverHttp) {
    vcx::ManualClock clock(0, 1);
    vcx::Experiment exp(config(8, 3), {}, clock);
    synth::Served served(exp);
    auto c = served.client();
    const auto start = post(*c, "/session", {{"rater_id", "careless"}}, 201);
    const std::string sid = start["session_id"];
    json trial = start["trial"];
    json last;
    while (true) {
        std::string w = answer(trial);
        if (trial["attention"]["active"].get<bool>()) w = w == "left" ? "right" : "left";
        last = post(*c, "/session/" + sid + "/choice", {{"index", trial["index"]}, {"winner", w}}, 200);
        if (!last.contains("next_trial")) break;
        trial = last["next_trial"];
    }
    EXPECT_EQ(last["status"], "excluded");
    EXPECT_FALSE(last.contains("questionnaire"));
    EXPECT_TRUE(ndjson(c->Get("/export")->body).empty());
    const auto all = ndjson(c->Get("/export?include_excluded=true")->body);
    ASSERT_FALSE(all.empty());
    for (const auto& r : all) EXPECT_TRUE(r["excluded"].get<bool>());
    post(*c, "/session/" + sid + "/choice", {{"index", 0}, {"winner", "left"}}, 409);
}

TEST(Http, ServesImageBytes) {
    synth::TempDir dir;
    synth::spit(dir / "a.png", std::string("\x89PNG fake", 9));
    synth::spit(dir / "b.JPG", "jpeg bytes");
    vcx::ManualClock clock(0, 1);
    vcx::Experiment exp(config(), {}, clock);
    synth::Served served(exp, {{"im0", dir / "a.png"}, {"im1", dir / "b.JPG"}, {"im2", dir / "gone.png"}});
    auto c = served.client();
    auto res = c->Get("/images/im0");
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->body, std::string("\x89PNG fake", 9));
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(c->Get("/images/im1")->get_header_value("Content-Type"), "image/jpeg");
    EXPECT_EQ(c->Get("/images/im2")->status, 404);
}

TEST(Http, ConcurrentClients) {
    vcx::ManualClock clock(0, 1);
    auto cfg = config(10, 1);
    cfg.target_total_comparisons = 200;
    vcx::Experiment exp(cfg, {}, clock);
    synth::Served served(exp);
    std::vector<std::thread> threads;
    std::atomic<int> completed{0};
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            auto c = served.client();
            const auto start = json::parse(
                c->Post("/session", json{{"rater_id", "c" + std::to_string(t)}}.dump(), "application/json")->body);
            const std::string sid = start["session_id"];
            json trial = start["trial"];
            while (true) {
                const auto res = c->Post("/session/" + sid + "/choice",
                                         json{{"index", trial["index"]}, {"winner", answer(trial)}}.dump(),
                                         "application/json");
                const auto j = json::parse(res->body);
                if (!j.contains("next_trial")) break;
                trial = j["next_trial"];
            }
            ++completed;
        });
    }
    for (auto& th : threads) th.join();
    EXPECT_EQ(completed.load(), 8);
    EXPECT_EQ(exp.export_comparisons().size(), 80u);
}
