// Command-line front end over the C API.

#include "vcx/vcx.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <string>
#include <thread>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

int exit_code(vcx_status status) {
    switch (status) {
        case VCX_OK: return kExitOk;
        case VCX_ERR_INVALID_ARGUMENT:
        case VCX_ERR_NOT_FOUND:
        case VCX_ERR_PARSE:
        case VCX_ERR_RANGE: return kExitValidation;
        default: return kExitRuntime;
    }
}

int report_failure(vcx_status status) {
    std::cerr << "error (" << vcx_status_name(status) << "): " << vcx_last_error() << "\n";
    return exit_code(status);
}

int write_output(const std::string& out_path, const char* text) {
    if (out_path.empty() || out_path == "-") {
        std::fputs(text, stdout);
        std::fflush(stdout);
        return kExitOk;
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    if (!out) {
        std::cerr << "error (io-error): cannot write " << out_path << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int run_command(const std::string& name, const nlohmann::json& options, const std::string& out_path) {
    char* output = nullptr;
    char* diag = nullptr;
    const vcx_status status = vcx_command(name.c_str(), options.dump().c_str(), &output, &diag);
    if (diag && *diag) std::cerr << diag;
    vcx_string_free(diag);
    if (status != VCX_OK) return report_failure(status);
    const int rc = write_output(out_path, output);
    vcx_string_free(output);
    return rc;
}

// Set fields only when the flag was given so library defaults apply.
template <typename T>
void put_if(nlohmann::json& j, const char* key, const CLI::Option* opt, const T& value) {
    if (opt->count() > 0) j[key] = value;
}

int serve(const std::string& config, const std::string& data_dir, const std::string& host, int port) {
    // Block termination signals before any thread starts; a helper thread
    // waits for them and stops the server.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    vcx_server* server = nullptr;
    const vcx_status st = vcx_server_create(config.c_str(), data_dir.empty() ? nullptr : data_dir.c_str(),
                                            host.empty() ? nullptr : host.c_str(), port, &server);
    if (st != VCX_OK) return report_failure(st);
    std::cout << "listening on port " << vcx_server_port(server) << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        vcx_server_stop(server);
    });
    const vcx_status run = vcx_server_run(server);
    // Wake the waiter if the server stopped on its own.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    vcx_server_free(server);
    return run == VCX_OK ? kExitOk : report_failure(run);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Visual complexity features, evaluation and rating collection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", vcx_version());

    std::string manifest, features, out, model, target = "complexity";
    std::string scales, weights;
    int bits = 7, jobs = 1, reps = 0, patch = 16;
    double sigma = 1.4, low = 0.1, high = 0.2;
    bool with_baselines = false, skip_bad = false;
    std::uint64_t seed = 0;

    auto* extract = app.add_subcommand("extract", "Compute the feature table for a manifest");
    extract->add_option("--manifest", manifest, "Manifest CSV")->required();
    extract->add_option("--out", out, "Feature table CSV (default stdout)");
    auto* o_bits = extract->add_option("--bits", bits, "Bits kept per channel for unique colours")->check(CLI::Range(1, 8));
    auto* o_scales = extract->add_option("--scales", scales, "Comma-separated downscale factors");
    auto* o_weights = extract->add_option("--weights", weights, "Comma-separated scale weights");
    extract->add_flag("--with-baselines", with_baselines, "Add edge_density and patch_symmetry");
    auto* o_sigma = extract->add_option("--canny-sigma", sigma, "Gaussian sigma for edge density");
    auto* o_low = extract->add_option("--canny-low", low, "Low hysteresis threshold");
    auto* o_high = extract->add_option("--canny-high", high, "High hysteresis threshold");
    auto* o_patch = extract->add_option("--patch", patch, "Block size for patch symmetry");
    auto* o_jobs = extract->add_option("--jobs", jobs, "Worker threads");
    extract->add_flag("--skip-bad", skip_bad, "Skip undecodable images instead of failing");

    auto* eval = app.add_subcommand("eval", "Repeated 3-fold cross-validated linear regression");
    eval->add_option("--manifest", manifest, "Manifest CSV with the target column")->required();
    eval->add_option("--features", features, "Feature table CSV");
    eval->add_option("--model", model, "Comma-separated predictor columns")->required();
    auto* o_reps = eval->add_option("--reps", reps, "Repetitions (default from dataset size)");
    auto* o_seed_eval = eval->add_option("--seed", seed, "Shuffle seed");
    eval->add_option("--target", target, "Target column");
    eval->add_option("--out", out, "Report path (default stdout)");

    auto* fit = app.add_subcommand("fit", "Fit a linear model on all rows");
    fit->add_option("--manifest", manifest, "Manifest CSV with the target column")->required();
    fit->add_option("--features", features, "Feature table CSV");
    fit->add_option("--model", model, "Comma-separated predictor columns")->required();
    fit->add_option("--target", target, "Target column");
    fit->add_option("--out", out, "Report path (default stdout)");

    std::string x, y;
    std::size_t n_perm = 1000;
    auto* perm = app.add_subcommand("permtest", "Permutation test of |rho(C,X)| against |rho(C,Y)|");
    perm->add_option("--manifest", manifest, "Manifest CSV with the target column")->required();
    perm->add_option("--features", features, "Feature table CSV");
    perm->add_option("--x", x, "First predictor column")->required();
    perm->add_option("--y", y, "Second predictor column")->required();
    perm->add_option("--n", n_perm, "Permutations")->check(CLI::PositiveNumber);
    auto* o_seed_perm = perm->add_option("--seed", seed, "Shuffle seed");
    perm->add_option("--target", target, "Target column");
    perm->add_option("--out", out, "Report path (default stdout)");

    std::string against, against_features, column;
    auto* ks = app.add_subcommand("ks", "Two-sample Kolmogorov-Smirnov test of one column");
    ks->add_option("--manifest", manifest, "First dataset manifest")->required();
    ks->add_option("--features", features, "First dataset feature table");
    ks->add_option("--against", against, "Second dataset manifest")->required();
    ks->add_option("--against-features", against_features, "Second dataset feature table");
    ks->add_option("--column", column, "Column to compare")->required();
    ks->add_option("--out", out, "Report path (default stdout)");

    std::string in;
    auto* bt = app.add_subcommand("bt", "Bradley-Terry scores from exported comparisons");
    bt->add_option("--in", in, "Comparisons JSONL")->required();
    bt->add_option("--out", out, "Scores CSV (default stdout)");

    std::string provider = "stub", provider_config, results, prompt_file;
    double rpm = 0.0;
    auto* surprise = app.add_subcommand("surprise", "Score images with a vision LLM or the offline stub");
    surprise->add_option("--manifest", manifest, "Manifest CSV")->required();
    surprise->add_option("--provider", provider, "stub or http")->check(CLI::IsMember({"stub", "http"}));
    surprise->add_option("--provider-config", provider_config, "JSON provider config for http");
    surprise->add_option("--results", results, "Resumable JSONL results file");
    surprise->add_option("--prompt-file", prompt_file, "Alternative prompt text");
    surprise->add_option("--rpm", rpm, "Request rate limit per minute (0 = none)");
    auto* o_jobs_s = surprise->add_option("--jobs", jobs, "Requests in flight");
    surprise->add_option("--out", out, "Scores CSV (default stdout)");

    std::string config, data_dir, host;
    int port = 8080;
    auto* srv = app.add_subcommand("serve", "Run the pairwise comparison experiment service");
    srv->add_option("--config", config, "Experiment TOML config")->required();
    srv->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    srv->add_option("--data-dir", data_dir, "Directory for the event log and snapshots");
    srv->add_option("--host", host, "Bind address (default from config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    nlohmann::json opts = nlohmann::json::object();
    if (*extract) {
        opts["manifest"] = manifest;
        put_if(opts, "bits", o_bits, bits);
        put_if(opts, "scales", o_scales, scales);
        put_if(opts, "weights", o_weights, weights);
        opts["with_baselines"] = with_baselines;
        put_if(opts, "sigma", o_sigma, sigma);
        put_if(opts, "low", o_low, low);
        put_if(opts, "high", o_high, high);
        put_if(opts, "patch", o_patch, patch);
        put_if(opts, "jobs", o_jobs, jobs);
        opts["skip_bad"] = skip_bad;
        return run_command("extract", opts, out);
    }
    if (*eval) {
        opts["manifest"] = manifest;
        if (!features.empty()) opts["features"] = features;
        opts["model"] = model;
        put_if(opts, "reps", o_reps, reps);
        put_if(opts, "seed", o_seed_eval, seed);
        opts["target"] = target;
        return run_command("eval", opts, out);
    }
    if (*fit) {
        opts["manifest"] = manifest;
        if (!features.empty()) opts["features"] = features;
        opts["model"] = model;
        opts["target"] = target;
        return run_command("fit", opts, out);
    }
    if (*perm) {
        opts["manifest"] = manifest;
        if (!features.empty()) opts["features"] = features;
        opts["x"] = x;
        opts["y"] = y;
        opts["n"] = n_perm;
        put_if(opts, "seed", o_seed_perm, seed);
        opts["target"] = target;
        return run_command("permtest", opts, out);
    }
    if (*ks) {
        opts["manifest"] = manifest;
        if (!features.empty()) opts["features"] = features;
        opts["against"] = against;
        if (!against_features.empty()) opts["against_features"] = against_features;
        opts["column"] = column;
        return run_command("ks", opts, out);
    }
    if (*bt) {
        opts["in"] = in;
        return run_command("bt", opts, out);
    }
    if (*surprise) {
        opts["manifest"] = manifest;
        opts["provider"] = provider;
        if (!provider_config.empty()) opts["provider_config"] = provider_config;
        if (!results.empty()) opts["results"] = results;
        if (!prompt_file.empty()) opts["prompt_file"] = prompt_file;
        opts["rpm"] = rpm;
        put_if(opts, "jobs", o_jobs_s, jobs);
        return run_command("surprise", opts, out);
    }
    return serve(config, data_dir, host, port);
}
