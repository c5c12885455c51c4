#include "vcx/commands.hpp"
#include "vcx/experiment.hpp"
#include "vcx/server.hpp"

#include "process.hpp"
#include "synth.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <csignal>

using nlohmann::json;

namespace {

const std::filesystem::path kData = VCX_TEST_DATA_DIR;
const std::string kCli = VCX_CLI_PATH;
const std::string kManifest = (kData / "golden" / "manifest.csv").string();

synth::RunResult vcx_run(std::vector<std::string> args, const std::map<std::string, std::string>& env = {}) {
    args.insert(args.begin(), kCli);
    return synth::run(args, env);
}

std::string choose(const json& trial) {
    if (trial["attention"]["active"].get<bool>()) return trial["attention"]["instructed_side"];
    return std::min(trial["image_a"].get<std::string>(), trial["image_b"].get<std::string>());
}

std::string choose(const vcx::Trial& t) {
    return t.attention ? t.instructed_side : std::min(t.image_a, t.image_b);
}

// Drives one rater over HTTP for at most `limit` choices; returns the
// session id.
std::string http_rater(httplib::Client& c, const std::string& rater, int limit = 1 << 30) {
    const auto start = json::parse(c.Post("/session", json{{"rater_id", rater}}.dump(), "application/json")->body);
    json trial = start["trial"];
    for (int k = 0; k < limit && !trial.is_null(); ++k) {
        const auto res = json::parse(c.Post("/session/" + start["session_id"].get<std::string>() + "/choice",
                                            json{{"index", trial["index"]}, {"winner", choose(trial)}}.dump(),
                                            "application/json")
                                         ->body);
        trial = res.contains("next_trial") ? res["next_trial"] : json();
    }
    return start["session_id"];
}

void http_finish(httplib::Client& c, const std::string& sid) {
    json trial = json::parse(c.Get("/session/" + sid + "/trial")->body);
    while (!trial.contains("complete")) {
        const auto res = json::parse(c.Post("/session/" + sid + "/choice",
                                            json{{"index", trial["index"]}, {"winner", choose(trial)}}.dump(),
                                            "application/json")
                                         ->body);
        trial = res.contains("next_trial") ? res["next_trial"] : json{{"complete", true}};
    }
}

std::vector<json> without_timestamps(const std::string& ndjson) {
    std::vector<json> out;
    std::istringstream in(ndjson);
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        auto j = json::parse(line);
        j.erase("timestamp");
        out.push_back(j);
    }
    return out;
}

struct ServeProcess {
    synth::Child child;
    int port = 0;

    ServeProcess(const std::filesystem::path& config, const std::filesystem::path& data)
        : child({kCli, "serve", "--config", config.string(), "--port", "0", "--data-dir", data.string()}) {
        const std::string line = child.read_line();
        const std::string prefix = "listening on port ";
        if (line.rfind(prefix, 0) == 0) port = std::stoi(line.substr(prefix.size()));
    }
};

}  // namespace

TEST(Cli, UsageExitCodes) {
    EXPECT_EQ(vcx_run({"--help"}).exit_code, 0);
    EXPECT_EQ(vcx_run({"--version"}).out, "1.0.0\n");
    EXPECT_EQ(vcx_run({}).exit_code, 2);
    EXPECT_EQ(vcx_run({"extract"}).exit_code, 2);
    EXPECT_EQ(vcx_run({"extract", "--manifest", kManifest, "--frobnicate"}).exit_code, 2);
    EXPECT_EQ(vcx_run({"extract", "--manifest", kManifest, "--bits", "9"}).exit_code, 2);
    const auto missing = vcx_run({"extract", "--manifest", "/nonexistent/m.csv"});
    EXPECT_EQ(missing.exit_code, 2);
    EXPECT_NE(missing.err.find("not-found"), std::string::npos);
}

TEST(Cli, ExtractEvalFitPermtestKs) {
    synth::TempDir dir;
    const auto features = (dir / "f.csv").string();
    ASSERT_EQ(vcx_run({"extract", "--manifest", kManifest, "--out", features, "--jobs", "4"}).exit_code, 0);
    EXPECT_EQ(synth::slurp(features),
              vcx::format_feature_table(vcx::cmd_extract(vcx::read_manifest(kManifest), {}).table));

    const auto ev = vcx_run({"eval", "--manifest", kManifest, "--features", features, "--model", "msg,muc", "--reps",
                             "4", "--seed", "2"});
    ASSERT_EQ(ev.exit_code, 0) << ev.err;
    const auto report = json::parse(ev.out);
    EXPECT_EQ(report["repetitions"], 4);
    EXPECT_EQ(report["seed"], 2);

    const auto bad_model = vcx_run({"eval", "--manifest", kManifest, "--features", features, "--model", "msg,edge_density"});
    EXPECT_EQ(bad_model.exit_code, 2);
    EXPECT_NE(bad_model.err.find("edge_density"), std::string::npos);

    const auto fit = vcx_run({"fit", "--manifest", kManifest, "--features", features, "--model", "msg"});
    ASSERT_EQ(fit.exit_code, 0) << fit.err;
    EXPECT_TRUE(json::parse(fit.out)["coefficients"].contains("msg"));

    const auto perm = vcx_run({"permtest", "--manifest", kManifest, "--features", features, "--x", "msg", "--y",
                               "msg_gray"});
    ASSERT_EQ(perm.exit_code, 0) << perm.err;
    EXPECT_EQ(json::parse(perm.out)["n_perm"], 1000);

    const auto ks = vcx_run({"ks", "--manifest", kManifest, "--features", features, "--against", kManifest,
                             "--against-features", features, "--column", "msg", "--out", (dir / "ks.json").string()});
    ASSERT_EQ(ks.exit_code, 0) << ks.err;
    EXPECT_EQ(json::parse(synth::slurp(dir / "ks.json"))["statistic"], 0.0);
}

TEST(Cli, DecodeFailureIsRuntimeError) {
    synth::TempDir dir;
    synth::spit(dir / "bad.png", "garbage");
    synth::spit(dir / "m.csv", "image_id,image_path\nok," + (kData / "golden" / "g1.png").string() + "\nbad,bad.png\n");
    const auto fail = vcx_run({"extract", "--manifest", (dir / "m.csv").string()});
    EXPECT_EQ(fail.exit_code, 1);
    EXPECT_NE(fail.err.find("undecodable-format"), std::string::npos);
    const auto skip = vcx_run({"extract", "--manifest", (dir / "m.csv").string(), "--skip-bad"});
    EXPECT_EQ(skip.exit_code, 0);
    EXPECT_NE(skip.err.find("skipped bad"), std::string::npos);
    EXPECT_EQ(std::count(skip.out.begin(), skip.out.end(), '\n'), 2);
}

TEST(Cli, BtMatchesLibrary) {
    synth::TempDir dir;
    vcx::Rng rng(6);
    std::vector<std::string> ids{"a", "b", "c", "d", "e"};
    const auto records = synth::sample_bt(ids, {1, 2, 3, 4, 5}, 10, 3, rng);
    std::string text;
    for (const auto& r : records) text += vcx::record_to_json(r).dump() + "\n";
    synth::spit(dir / "c.jsonl", text);
    const auto bt = vcx_run({"bt", "--in", (dir / "c.jsonl").string()});
    ASSERT_EQ(bt.exit_code, 0) << bt.err;
    EXPECT_EQ(bt.out, vcx::cmd_bt(records));

    std::vector<vcx::ComparisonRecord> split{records[0]};
    split[0].item_a = "x";
    split[0].item_b = "y";
    split[0].winner = "x";
    split.push_back(records[1]);
    split[1].item_a = "p";
    split[1].item_b = "q";
    split[1].winner = "q";
    text.clear();
    for (const auto& r : split) text += vcx::record_to_json(r).dump() + "\n";
    synth::spit(dir / "split.jsonl", text);
    const auto disc = vcx_run({"bt", "--in", (dir / "split.jsonl").string()});
    EXPECT_EQ(disc.exit_code, 1);
    EXPECT_NE(disc.err.find("disconnected"), std::string::npos);
}

TEST(Cli, StubSurpriseMakesNoNetworkCalls) {
    synth::TempDir dir;
    const auto log = (dir / "connects.log").string();
    const std::map<std::string, std::string> env{{"LD_PRELOAD", VCX_NOCONNECT_PATH}, {"VCX_NOCONNECT_LOG", log}};
    const auto res = vcx_run({"surprise", "--manifest", kManifest, "--provider", "stub", "--jobs", "4"}, env);
    ASSERT_EQ(res.exit_code, 0) << res.err;
    EXPECT_EQ(std::count(res.out.begin(), res.out.end(), '\n'), 11);
    EXPECT_FALSE(std::filesystem::exists(log));

    // The shim does catch real attempts.
    synth::spit(dir / "p.json", R"({"endpoint":"http://127.0.0.1:9/v1","model_name":"m","max_retries":0})");
    const auto http = vcx_run({"surprise", "--manifest", kManifest, "--provider", "http", "--provider-config",
                               (dir / "p.json").string()},
                              env);
    EXPECT_EQ(http.exit_code, 0);
    EXPECT_NE(http.err.find("network-error"), std::string::npos);
    EXPECT_TRUE(std::filesystem::exists(log));
}

TEST(Cli, ApiKeyStaysOutOfOutputs) {
    const std::string key = "sk-cli-SECRET-987654321";
    synth::TempDir dir;
    httplib::Server mock;
    const int port = mock.bind_to_any_port("127.0.0.1");
    mock.Post("/v1", [&](const httplib::Request& req, httplib::Response& res) {
        res.status = 401;
        res.set_content("denied " + req.get_header_value("Authorization"), "text/plain");
    });
    std::thread th([&] { mock.listen_after_bind(); });
    mock.wait_until_ready();
    synth::spit(dir / "p.json", "{\"endpoint\":\"http://127.0.0.1:" + std::to_string(port) +
                                    "/v1\",\"model_name\":\"m\",\"max_retries\":0,\"api_key_env\":\"MY_KEY\"}");
    const auto res = vcx_run({"surprise", "--manifest", kManifest, "--provider", "http", "--provider-config",
                              (dir / "p.json").string(), "--results", (dir / "r.jsonl").string(), "--out",
                              (dir / "s.csv").string()},
                             {{"MY_KEY", key}});
    mock.stop();
    th.join();
    EXPECT_EQ(res.exit_code, 0);
    EXPECT_NE(res.err.find("authentication-failure"), std::string::npos);
    for (const std::string& text : {res.out, res.err, synth::slurp(dir / "r.jsonl"), synth::slurp(dir / "s.csv")}) {
        EXPECT_EQ(text.find(key), std::string::npos);
    }
}

TEST(Cli, ServeStopsOnSigterm) {
    synth::TempDir dir;
    synth::spit(dir / "exp.toml", "manifest = \"" + kManifest + "\"\ntrials_per_session = 4\n"
                                  "attention_checks_per_session = 1\n");
    ServeProcess serve(dir / "exp.toml", dir / "data");
    ASSERT_GT(serve.port, 0);
    httplib::Client c("127.0.0.1", serve.port);
    EXPECT_EQ(c.Get("/health")->status, 200);
    const auto img = c.Get("/images/g1");
    EXPECT_EQ(img->status, 200);
    EXPECT_EQ(img->body, synth::slurp(kData / "golden" / "g1.png"));
    serve.child.signal(SIGTERM);
    EXPECT_EQ(serve.child.wait(), 0);

    synth::spit(dir / "bad.toml", "manifest = \"" + kManifest + "\"\nbogus = 1\n");
    EXPECT_EQ(vcx_run({"serve", "--config", (dir / "bad.toml").string(), "--port", "0"}).exit_code, 2);
}

TEST(Cli, ServeSurvivesSigkill) {
    synth::TempDir dir;
    const std::string toml = "manifest = \"" + kManifest +
                             "\"\n[experiment]\ntrials_per_session = 8\nattention_checks_per_session = 1\n"
                             "target_total_comparisons = 30\nseed = 9\nsnapshot_every = 4\n";
    synth::spit(dir / "exp.toml", toml);

    std::string sid_b;
    {
        ServeProcess serve(dir / "exp.toml", dir / "data");
        ASSERT_GT(serve.port, 0);
        httplib::Client c("127.0.0.1", serve.port);
        http_rater(c, "A");
        sid_b = http_rater(c, "B", 3);
        serve.child.signal(SIGKILL);
        EXPECT_EQ(serve.child.wait(), -SIGKILL);
    }
    std::string exported;
    {
        ServeProcess serve(dir / "exp.toml", dir / "data");
        ASSERT_GT(serve.port, 0);
        httplib::Client c("127.0.0.1", serve.port);
        http_finish(c, sid_b);
        http_rater(c, "C");
        exported = c.Get("/export?include_excluded=true")->body;
        serve.child.signal(SIGTERM);
        EXPECT_EQ(serve.child.wait(), 0);
    }

    // Uninterrupted reference run with the same seed and choices.
    const auto cfg = vcx::parse_serve_config(toml, dir.path());
    vcx::ManualClock clock;
    vcx::Experiment ref(cfg.experiment, {}, clock);
    for (const std::string rater : {"A", "B", "C"}) {
        auto [s, t] = ref.start_session(rater);
        while (t) t = ref.record_choice(s.session_id, t->index, choose(*t)).next_trial;
    }
    std::string expected;
    for (const auto& r : ref.export_comparisons(true)) expected += vcx::record_to_json(r).dump() + "\n";
    EXPECT_EQ(without_timestamps(exported), without_timestamps(expected));
    EXPECT_EQ(without_timestamps(exported).size(), 24u);
}
