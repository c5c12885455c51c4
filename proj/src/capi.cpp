#include "vcx/vcx.h"

#include "vcx/commands.hpp"
#include "vcx/error.hpp"
#include "vcx/experiment.hpp"
#include "vcx/msg.hpp"
#include "vcx/server.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>
#include <set>

struct vcx_image {
    vcx::RgbImage img;
};

struct vcx_server {
    vcx::ServeConfig config;
    std::unique_ptr<vcx::Experiment> experiment;
    std::unique_ptr<vcx::ExperimentServer> http;
    int port = 0;
};

namespace {

thread_local std::string g_last_error;

vcx_status to_status(vcx::ErrorCode code) { return static_cast<vcx_status>(static_cast<int>(code)); }

template <typename F>
vcx_status guard(F&& f) {
    try {
        g_last_error.clear();
        f();
        return VCX_OK;
    } catch (const vcx::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const nlohmann::json::exception& e) {
        g_last_error = e.what();
        return VCX_ERR_INVALID_ARGUMENT;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return VCX_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return VCX_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

void require(bool ok, const char* what) {
    if (!ok) vcx::fail(vcx::ErrorCode::kInvalidArgument, what);
}

vcx::ScaleSchedule schedule_from(const int* scales, const double* weights, size_t n) {
    if (!scales) return vcx::ScaleSchedule::standard();
    require(weights != nullptr && n > 0, "weights must accompany scales");
    return vcx::ScaleSchedule(std::vector<int>(scales, scales + n), std::vector<double>(weights, weights + n));
}

// Typed, strict access to a command's option object.
class Options {
public:
    explicit Options(const char* text) {
        json_ = text && *text ? nlohmann::json::parse(text) : nlohmann::json::object();
        require(json_.is_object(), "options must be a JSON object");
    }

    std::optional<std::string> str(const char* key) {
        const auto* v = take(key);
        if (!v) return std::nullopt;
        require(v->is_string(), (std::string("option ") + key + " must be a string").c_str());
        return v->get<std::string>();
    }
    std::string str_or(const char* key, std::string dflt) { return str(key).value_or(std::move(dflt)); }
    std::string required(const char* key) {
        auto v = str(key);
        if (!v || v->empty()) vcx::fail(vcx::ErrorCode::kInvalidArgument, std::string("missing option ") + key);
        return *v;
    }
    std::int64_t integer(const char* key, std::int64_t dflt) {
        const auto* v = take(key);
        if (!v) return dflt;
        require(v->is_number_integer(), (std::string("option ") + key + " must be an integer").c_str());
        return v->get<std::int64_t>();
    }
    std::uint64_t seed(const char* key) {
        const auto* v = take(key);
        if (!v) return 0;
        require(v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0),
                (std::string("option ") + key + " must be a nonnegative integer").c_str());
        return v->get<std::uint64_t>();
    }
    double number(const char* key, double dflt) {
        const auto* v = take(key);
        if (!v) return dflt;
        require(v->is_number(), (std::string("option ") + key + " must be a number").c_str());
        return v->get<double>();
    }
    bool flag(const char* key) {
        const auto* v = take(key);
        if (!v) return false;
        require(v->is_boolean(), (std::string("option ") + key + " must be a boolean").c_str());
        return v->get<bool>();
    }
    void done() const {
        for (const auto& [k, v] : json_.items()) {
            if (!used_.contains(k)) vcx::fail(vcx::ErrorCode::kInvalidArgument, "unknown option " + k);
        }
    }

private:
    const nlohmann::json* take(const char* key) {
        used_.insert(key);
        const auto it = json_.find(key);
        if (it == json_.end() || it->is_null()) return nullptr;
        return &*it;
    }

    nlohmann::json json_;
    std::set<std::string> used_;
};

std::optional<vcx::FeatureTable> features_from(Options& o, const char* key) {
    if (auto path = o.str(key)) {
        if (!path->empty()) return vcx::read_feature_table(*path);
    }
    return std::nullopt;
}

const vcx::FeatureTable* ptr(const std::optional<vcx::FeatureTable>& t) { return t ? &*t : nullptr; }

std::string report_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

std::string run_command(const std::string& name, Options& o, std::string& diag) {
    if (name == "extract") {
        const auto manifest = vcx::read_manifest(o.required("manifest"));
        vcx::ExtractOptions e;
        e.bits = static_cast<int>(o.integer("bits", vcx::BitPrecision::kDefault));
        e.schedule = vcx::parse_schedule(o.str_or("scales", ""), o.str_or("weights", ""));
        e.with_baselines = o.flag("with_baselines");
        e.canny.sigma = o.number("sigma", e.canny.sigma);
        e.canny.low = o.number("low", e.canny.low);
        e.canny.high = o.number("high", e.canny.high);
        e.patch = static_cast<int>(o.integer("patch", e.patch));
        e.jobs = static_cast<int>(o.integer("jobs", 1));
        e.skip_bad = o.flag("skip_bad");
        o.done();
        const auto res = vcx::cmd_extract(manifest, e);
        for (const auto& f : res.failures) diag += "skipped " + f + "\n";
        return vcx::format_feature_table(res.table);
    }
    if (name == "eval") {
        const auto manifest = vcx::read_manifest(o.required("manifest"));
        const auto features = features_from(o, "features");
        vcx::EvalOptions e;
        e.model = o.required("model");
        e.repetitions = static_cast<int>(o.integer("reps", 0));
        e.seed = o.seed("seed");
        e.target = o.str_or("target", "complexity");
        o.done();
        return report_text(vcx::cmd_eval(manifest, ptr(features), e));
    }
    if (name == "fit") {
        const auto manifest = vcx::read_manifest(o.required("manifest"));
        const auto features = features_from(o, "features");
        const auto model = o.required("model");
        const auto target = o.str_or("target", "complexity");
        o.done();
        return report_text(vcx::cmd_fit(manifest, ptr(features), model, target));
    }
    if (name == "permtest") {
        const auto manifest = vcx::read_manifest(o.required("manifest"));
        const auto features = features_from(o, "features");
        vcx::PermtestOptions p;
        p.x = o.required("x");
        p.y = o.required("y");
        const auto n = o.integer("n", static_cast<std::int64_t>(vcx::kDefaultPermutations));
        require(n >= 1, "option n must be >= 1");
        p.n_perm = static_cast<std::size_t>(n);
        p.seed = o.seed("seed");
        p.target = o.str_or("target", "complexity");
        o.done();
        return report_text(vcx::cmd_permtest(manifest, ptr(features), p));
    }
    if (name == "ks") {
        const auto a = vcx::read_manifest(o.required("manifest"));
        const auto fa = features_from(o, "features");
        const auto b = vcx::read_manifest(o.required("against"));
        const auto fb = features_from(o, "against_features");
        const auto column = o.required("column");
        o.done();
        return report_text(vcx::cmd_ks(a, ptr(fa), b, ptr(fb), column));
    }
    if (name == "bt") {
        const auto records = vcx::read_comparisons(o.required("in"));
        vcx::BtOptions bt;
        bt.max_iter = static_cast<int>(o.integer("max_iter", bt.max_iter));
        bt.tol = o.number("tol", bt.tol);
        require(bt.max_iter >= 1 && bt.tol > 0, "max_iter must be >= 1 and tol > 0");
        o.done();
        return vcx::cmd_bt(records, bt);
    }
    if (name == "surprise") {
        const auto manifest = vcx::read_manifest(o.required("manifest"));
        vcx::SurpriseCommandOptions s;
        s.provider = o.str_or("provider", "stub");
        s.provider_config = o.str_or("provider_config", "");
        s.results_path = o.str_or("results", "");
        s.prompt_file = o.str_or("prompt_file", "");
        s.requests_per_minute = o.number("rpm", 0.0);
        s.in_flight = static_cast<int>(o.integer("jobs", 1));
        o.done();
        std::vector<std::string> errors;
        auto out = vcx::cmd_surprise(manifest, s, &errors);
        for (const auto& e : errors) diag += "failed " + e + "\n";
        return out;
    }
    vcx::fail(vcx::ErrorCode::kInvalidArgument, "unknown command " + name);
}

}  // namespace

extern "C" {

const char* vcx_version(void) { return "1.0.0"; }

const char* vcx_status_name(vcx_status status) {
    if (status == VCX_OK) return "ok";
    if (status < VCX_ERR_INVALID_ARGUMENT || status > VCX_ERR_INTERNAL) return "unknown";
    return vcx::error_code_name(static_cast<vcx::ErrorCode>(static_cast<int>(status)));
}

const char* vcx_last_error(void) { return g_last_error.c_str(); }

void vcx_string_free(char* s) { std::free(s); }

vcx_status vcx_image_load(const char* path, vcx_image** out) {
    return guard([&] {
        require(path && out, "null argument");
        *out = new vcx_image{vcx::load_image(path)};
    });
}

vcx_status vcx_image_from_rgb(int height, int width, const uint8_t* rgb, vcx_image** out) {
    return guard([&] {
        require(rgb && out, "null argument");
        require(height > 0 && width > 0, "image dimensions must be positive");
        const auto n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
        std::vector<vcx::Rgb> px(n);
        for (std::size_t i = 0; i < n; ++i) px[i] = {rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]};
        *out = new vcx_image{vcx::RgbImage(height, width, std::move(px))};
    });
}

vcx_status vcx_image_size(const vcx_image* img, int* height, int* width) {
    return guard([&] {
        require(img && height && width, "null argument");
        *height = img->img.height();
        *width = img->img.width();
    });
}

void vcx_image_free(vcx_image* img) { delete img; }

vcx_status vcx_msg(const vcx_image* img, const int* scales, const double* weights, size_t n, double* out) {
    return guard([&] {
        require(img && out, "null argument");
        *out = vcx::msg_score(img->img, schedule_from(scales, weights, n));
    });
}

vcx_status vcx_msg_gray(const vcx_image* img, const int* scales, const double* weights, size_t n, double* out) {
    return guard([&] {
        require(img && out, "null argument");
        *out = vcx::msg_score_grayscale(img->img, schedule_from(scales, weights, n));
    });
}

vcx_status vcx_muc(const vcx_image* img, int bits, const int* scales, const double* weights, size_t n, double* out) {
    return guard([&] {
        require(img && out, "null argument");
        *out = vcx::muc_score(img->img, vcx::BitPrecision(bits), schedule_from(scales, weights, n));
    });
}

vcx_status vcx_colorfulness(const vcx_image* img, int bits, double* out) {
    return guard([&] {
        require(img && out, "null argument");
        *out = vcx::colorfulness(img->img, vcx::BitPrecision(bits));
    });
}

vcx_status vcx_edge_density(const vcx_image* img, double sigma, double low, double high, double* out) {
    return guard([&] {
        require(img && out, "null argument");
        require(sigma > 0, "sigma must be positive");
        *out = vcx::canny_edge_density(img->img, vcx::CannyParams{sigma, low, high});
    });
}

vcx_status vcx_patch_symmetry(const vcx_image* img, int patch, double* out) {
    return guard([&] {
        require(img && out, "null argument");
        *out = vcx::patch_symmetry(img->img, patch);
    });
}

vcx_status vcx_spearman(const double* x, const double* y, size_t n, double* out) {
    return guard([&] {
        require(x && y && out, "null argument");
        *out = vcx::spearman({x, n}, {y, n});
    });
}

vcx_status vcx_ks_test(const double* a, size_t n_a, const double* b, size_t n_b, double* statistic,
                       double* p_value) {
    return guard([&] {
        require(a && b && statistic && p_value, "null argument");
        const auto r = vcx::ks_test({a, n_a}, {b, n_b});
        *statistic = r.statistic;
        *p_value = r.p_value;
    });
}

vcx_status vcx_permutation_test(const double* complexity, const double* x, const double* y, size_t n,
                                size_t n_perm, uint64_t seed, double* p_value, double* delta_obs) {
    return guard([&] {
        require(complexity && x && y && p_value && delta_obs, "null argument");
        const auto r = vcx::permutation_test({complexity, n}, {x, n}, {y, n}, n_perm, seed);
        *p_value = r.p_value;
        *delta_obs = r.delta_obs;
    });
}

vcx_status vcx_command(const char* name, const char* options_json, char** output, char** diagnostics) {
    if (output) *output = nullptr;
    if (diagnostics) *diagnostics = nullptr;
    return guard([&] {
        require(name && output, "null argument");
        Options opts(options_json);
        std::string diag;
        const std::string out = run_command(name, opts, diag);
        char* o = dup_string(out);
        if (diagnostics) {
            try {
                *diagnostics = dup_string(diag);
            } catch (...) {
                std::free(o);
                throw;
            }
        }
        *output = o;
    });
}

vcx_status vcx_server_create(const char* config_path, const char* data_dir, const char* host, int port,
                             vcx_server** out) {
    return guard([&] {
        require(config_path && out, "null argument");
        auto s = std::make_unique<vcx_server>();
        s->config = vcx::load_serve_config(config_path);
        s->experiment = std::make_unique<vcx::Experiment>(s->config.experiment,
                                                          data_dir ? std::filesystem::path(data_dir) : std::filesystem::path());
        std::map<std::string, std::filesystem::path> images;
        for (const auto& row : s->config.manifest.rows) images[row.image_id] = s->config.manifest.resolve(row);
        s->http = std::make_unique<vcx::ExperimentServer>(*s->experiment, std::move(images));
        s->port = s->http->bind(host ? host : s->config.host, port);
        *out = s.release();
    });
}

int vcx_server_port(const vcx_server* server) { return server ? server->port : -1; }

vcx_status vcx_server_run(vcx_server* server) {
    return guard([&] {
        require(server != nullptr, "null argument");
        server->http->run();
    });
}

void vcx_server_stop(vcx_server* server) {
    if (server) server->http->stop();
}

void vcx_server_free(vcx_server* server) { delete server; }

}  // extern "C"
