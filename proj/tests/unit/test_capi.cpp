#include "vcx/vcx.h"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

namespace {

const std::filesystem::path kData = VCX_TEST_DATA_DIR;

struct Output {
    vcx_status status;
    std::string out;
    std::string diag;
};

Output command(const char* name, const nlohmann::json& options) {
    char* out = nullptr;
    char* diag = nullptr;
    Output o;
    o.status = vcx_command(name, options.dump().c_str(), &out, &diag);
    if (out) o.out = out;
    if (diag) o.diag = diag;
    vcx_string_free(out);
    vcx_string_free(diag);
    return o;
}

}  // namespace

TEST(CApi, VersionAndStatusNames) {
    EXPECT_STREQ(vcx_version(), "1.0.0");
    EXPECT_STREQ(vcx_status_name(VCX_OK), "ok");
    EXPECT_STREQ(vcx_status_name(VCX_ERR_DISCONNECTED), "disconnected-graph");
    EXPECT_STREQ(vcx_status_name(static_cast<vcx_status>(99)), "unknown");
}

TEST(CApi, ImageLifecycleAndFeatures) {
    std::vector<uint8_t> rgb(6 * 5 * 3);
    for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<uint8_t>((i * 37) % 256);
    vcx_image* img = nullptr;
    ASSERT_EQ(vcx_image_from_rgb(6, 5, rgb.data(), &img), VCX_OK);
    int h = 0, w = 0;
    ASSERT_EQ(vcx_image_size(img, &h, &w), VCX_OK);
    EXPECT_EQ(h, 6);
    EXPECT_EQ(w, 5);

    double msg = -1, explicit_msg = -2;
    ASSERT_EQ(vcx_msg(img, nullptr, nullptr, 0, &msg), VCX_OK);
    const int scales[] = {1, 2, 4, 8};
    const double weights[] = {0.4, 0.3, 0.2, 0.1};
    ASSERT_EQ(vcx_msg(img, scales, weights, 4, &explicit_msg), VCX_OK);
    EXPECT_EQ(msg, explicit_msg);
    EXPECT_GT(msg, 0);

    double muc = 0, color = 0, gray = 0, edges = -1, sym = -1;
    EXPECT_EQ(vcx_msg_gray(img, nullptr, nullptr, 0, &gray), VCX_OK);
    EXPECT_EQ(vcx_muc(img, 7, nullptr, nullptr, 0, &muc), VCX_OK);
    EXPECT_EQ(vcx_colorfulness(img, 8, &color), VCX_OK);
    EXPECT_EQ(color, 30.0);
    EXPECT_EQ(vcx_edge_density(img, 1.4, 0.1, 0.2, &edges), VCX_OK);
    EXPECT_GE(edges, 0.0);
    EXPECT_EQ(vcx_patch_symmetry(img, 2, &sym), VCX_OK);
    EXPECT_GE(sym, 0.0);

    EXPECT_EQ(vcx_muc(img, 0, nullptr, nullptr, 0, &muc), VCX_ERR_INVALID_ARGUMENT);
    EXPECT_NE(std::string(vcx_last_error()), "");
    EXPECT_EQ(vcx_msg(img, scales, nullptr, 4, &msg), VCX_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(vcx_msg(nullptr, nullptr, nullptr, 0, &msg), VCX_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(vcx_msg(img, nullptr, nullptr, 0, &msg), VCX_OK);
    EXPECT_STREQ(vcx_last_error(), "");
    vcx_image_free(img);
    vcx_image_free(nullptr);
}

TEST(CApi, LoadErrors) {
    vcx_image* img = nullptr;
    EXPECT_EQ(vcx_image_load((kData / "missing.png").c_str(), &img), VCX_ERR_NOT_FOUND);
    EXPECT_EQ(vcx_image_load((kData / "corrupt.png").c_str(), &img), VCX_ERR_DECODE);
    ASSERT_EQ(vcx_image_load((kData / "rgba_3x2.png").c_str(), &img), VCX_OK);
    int h = 0, w = 0;
    vcx_image_size(img, &h, &w);
    EXPECT_EQ(h, 2);
    EXPECT_EQ(w, 3);
    vcx_image_free(img);
}

TEST(CApi, Statistics) {
    const double x[] = {1, 2, 3, 4, 5}, y[] = {2, 1, 4, 3, 5}, c[] = {1, 1, 1, 1, 1};
    double rho = 0;
    ASSERT_EQ(vcx_spearman(x, y, 5, &rho), VCX_OK);
    EXPECT_NEAR(rho, 0.8, 1e-12);
    EXPECT_EQ(vcx_spearman(x, c, 5, &rho), VCX_ERR_DEGENERATE);
    double d = 0, p = 0;
    ASSERT_EQ(vcx_ks_test(x, 5, y, 5, &d, &p), VCX_OK);
    EXPECT_EQ(d, 0.0);
    EXPECT_EQ(p, 1.0);
    ASSERT_EQ(vcx_permutation_test(y, x, x, 5, 100, 1, &p, &d), VCX_OK);
    EXPECT_EQ(p, 1.0);
    EXPECT_EQ(d, 0.0);
}

TEST(CApi, CommandsOnGoldenCorpus) {
    const auto manifest = (kData / "golden" / "manifest.csv").string();
    auto ex = command("extract", {{"manifest", manifest}, {"jobs", 3}});
    ASSERT_EQ(ex.status, VCX_OK) << vcx_last_error();
    EXPECT_EQ(ex.out.substr(0, ex.out.find('\n')), "image_id,msg,msg_gray,muc_b7,colorfulness_b7");

    const auto features = std::filesystem::temp_directory_path() / "vcx_capi_features.csv";
    std::ofstream(features) << ex.out;
    auto ev = command("eval", {{"manifest", manifest}, {"features", features.string()}, {"model", "msg,muc"}, {"reps", 3}});
    ASSERT_EQ(ev.status, VCX_OK) << vcx_last_error();
    const auto report = nlohmann::json::parse(ev.out);
    EXPECT_EQ(report["command"], "eval");
    EXPECT_EQ(report["repetitions"], 3);
    std::filesystem::remove(features);

    EXPECT_EQ(command("eval", {{"manifest", manifest}, {"model", "msg"}, {"bogus", 1}}).status, VCX_ERR_INVALID_ARGUMENT);
    EXPECT_NE(std::string(vcx_last_error()).find("bogus"), std::string::npos);
    EXPECT_EQ(command("eval", {{"manifest", manifest}, {"model", "msg"}}).status, VCX_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(command("extract", {{"manifest", "/none.csv"}}).status, VCX_ERR_NOT_FOUND);
    EXPECT_EQ(command("teleport", nlohmann::json::object()).status, VCX_ERR_INVALID_ARGUMENT);
    char* out = reinterpret_cast<char*>(1);
    EXPECT_EQ(vcx_command("extract", "{not json", &out, nullptr), VCX_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(out, nullptr);
    auto st = command("surprise", {{"manifest", manifest}});
    ASSERT_EQ(st.status, VCX_OK);
    EXPECT_EQ(std::count(st.out.begin(), st.out.end(), '\n'), 11);
}

TEST(CApi, LastErrorIsPerThread) {
    vcx_image* img = nullptr;
    EXPECT_EQ(vcx_image_load("/nonexistent.png", &img), VCX_ERR_NOT_FOUND);
    std::string other;
    std::thread([&] { other = vcx_last_error(); }).join();
    EXPECT_EQ(other, "");
    EXPECT_NE(std::string(vcx_last_error()), "");
}

TEST(CApi, ServerLifecycle) {
    const auto dir = std::filesystem::temp_directory_path() / "vcx_capi_server";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "exp.toml") << "manifest = \"" << (kData / "golden" / "manifest.csv").string()
                                    << "\"\ntrials_per_session = 4\nattention_checks_per_session = 1\n";
    vcx_server* server = nullptr;
    ASSERT_EQ(vcx_server_create((dir / "exp.toml").c_str(), (dir / "data").c_str(), nullptr, 0, &server), VCX_OK)
        << vcx_last_error();
    EXPECT_GT(vcx_server_port(server), 0);
    std::thread t([&] { EXPECT_EQ(vcx_server_run(server), VCX_OK); });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    vcx_server_stop(server);
    t.join();
    vcx_server_free(server);
    EXPECT_TRUE(std::filesystem::exists(dir / "data" / "events.jsonl"));
    EXPECT_EQ(vcx_server_create((dir / "nope.toml").c_str(), nullptr, nullptr, 0, &server), VCX_ERR_NOT_FOUND);
    EXPECT_EQ(vcx_server_port(nullptr), -1);
    std::filesystem::remove_all(dir);
}
