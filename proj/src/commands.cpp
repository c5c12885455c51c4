#include "vcx/commands.hpp"

#include "vcx/error.hpp"
#include "vcx/msg.hpp"

#include <atomic>
#include <cmath>
#include <set>
#include <thread>

namespace vcx {

namespace {

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ' && c != '\t') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string join(const std::vector<std::string>& parts, const char* sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> out;
    for (const auto& p : split_commas(text)) {
        const double v = parse_number(p, what);
        if (v != std::floor(v) || std::abs(v) > 1e9) fail(ErrorCode::kInvalidArgument, what + " must be integers");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& p : split_commas(text)) out.push_back(parse_number(p, what));
    return out;
}

ScaleSchedule parse_schedule(const std::string& scales, const std::string& weights) {
    if (scales.empty() && weights.empty()) return ScaleSchedule::standard();
    if (scales.empty() || weights.empty()) {
        fail(ErrorCode::kInvalidArgument, "--scales and --weights must be given together");
    }
    try {
        return ScaleSchedule(parse_int_list(scales, "--scales"), parse_double_list(weights, "--weights"));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::kParse) fail(ErrorCode::kInvalidArgument, e.what());
        throw;
    }
}

// ---------------------------------------------------------------------------

ExtractResult cmd_extract(const Manifest& manifest, const ExtractOptions& options) {
    manifest.validate();
    const BitPrecision bits(options.bits);
    if (options.jobs < 1) fail(ErrorCode::kInvalidArgument, "--jobs must be >= 1");
    if (options.with_baselines) {
        if (!(options.canny.low > 0 && options.canny.low < options.canny.high) || !(options.canny.sigma > 0)) {
            fail(ErrorCode::kInvalidArgument, "Canny parameters need sigma > 0 and 0 < low < high");
        }
        if (options.patch < 2) fail(ErrorCode::kInvalidArgument, "patch size must be >= 2");
    }

    ExtractResult result;
    auto& t = result.table;
    const std::string b = std::to_string(bits.bits());
    t.columns = {"msg", "msg_gray", "muc_b" + b, "colorfulness_b" + b};
    if (options.with_baselines) {
        t.columns.push_back("edge_density");
        t.columns.push_back("patch_symmetry");
    }

    const std::size_t n = manifest.rows.size();
    std::vector<std::vector<double>> rows(n);
    std::vector<std::string> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                const RgbImage img = load_image(manifest.resolve(manifest.rows[i]));
                std::vector<double> v{msg_score(img, options.schedule), msg_score_grayscale(img, options.schedule),
                                      muc_score(img, bits, options.schedule), colorfulness(img, bits)};
                if (options.with_baselines) {
                    v.push_back(canny_edge_density(img, options.canny));
                    v.push_back(patch_symmetry(img, options.patch));
                }
                rows[i] = std::move(v);
            } catch (const Error& e) {
                errors[i] = manifest.rows[i].image_id + ": " + e.what();
            }
        }
    };
    const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(options.jobs), std::max<std::size_t>(n, 1)));
    std::vector<std::thread> pool;
    for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i].empty()) {
            result.failures.push_back(errors[i]);
            continue;
        }
        t.ids.push_back(manifest.rows[i].image_id);
        t.values.push_back(std::move(rows[i]));
    }
    if (!result.failures.empty() && !options.skip_bad) {
        fail(ErrorCode::kDecode, std::to_string(result.failures.size()) + " image(s) failed: " + join(result.failures, "; "));
    }
    return result;
}

// ---------------------------------------------------------------------------

std::vector<std::string> parse_model_spec(const std::string& spec) {
    std::vector<std::string> out;
    for (auto& name : split_commas(spec)) {
        if (name.empty()) fail(ErrorCode::kInvalidArgument, "empty column name in model '" + spec + "'");
        out.push_back(name);
    }
    std::set<std::string> uniq(out.begin(), out.end());
    if (uniq.size() != out.size()) fail(ErrorCode::kInvalidArgument, "repeated column in model '" + spec + "'");
    return out;
}

namespace {

struct Resolver {
    const Manifest& manifest;
    const FeatureTable* features;
    std::vector<std::size_t> feature_row;  // per manifest row
    std::vector<std::string> missing;

    Resolver(const Manifest& m, const FeatureTable* f) : manifest(m), features(f) {
        if (!features) return;
        std::map<std::string, std::size_t> index;
        for (std::size_t r = 0; r < f->ids.size(); ++r) index[f->ids[r]] = r;
        std::vector<std::string> absent;
        for (const auto& row : m.rows) {
            const auto it = index.find(row.image_id);
            if (it == index.end()) {
                absent.push_back(row.image_id);
            } else {
                feature_row.push_back(it->second);
            }
        }
        if (!absent.empty()) {
            if (absent.size() > 5) absent.resize(5), absent.push_back("...");
            fail(ErrorCode::kInvalidArgument, "feature table has no row for: " + join(absent));
        }
    }

    std::optional<std::string> alias(const std::string& prefix) const {
        if (!features) return std::nullopt;
        std::vector<std::string> hits;
        for (const auto& c : features->columns) {
            if (c.rfind(prefix, 0) == 0) hits.push_back(c);
        }
        if (hits.size() > 1) {
            fail(ErrorCode::kInvalidArgument, "ambiguous column " + prefix.substr(0, prefix.size() - 2) + ": " + join(hits));
        }
        if (hits.empty()) return std::nullopt;
        return hits[0];
    }

    std::optional<std::vector<double>> base(const std::string& name) const {
        std::string col = name;
        if (name == "muc" || name == "colorfulness") {
            if (auto a = alias(name + "_b")) col = *a;
        }
        if (features) {
            if (const auto k = features->column_index(col)) {
                std::vector<double> out;
                for (const auto r : feature_row) out.push_back(features->values[r][*k]);
                return out;
            }
        }
        std::vector<double> out;
        std::size_t absent = 0;
        for (const auto& row : manifest.rows) {
            std::optional<double> v;
            if (name == "complexity") {
                v = row.complexity;
            } else if (name == "surprise") {
                v = row.surprise;
            } else if (name == "num_seg") {
                if (row.num_seg) v = static_cast<double>(*row.num_seg);
            } else if (name == "num_class") {
                if (row.num_class) v = static_cast<double>(*row.num_class);
            } else {
                return std::nullopt;
            }
            if (!v) ++absent;
            out.push_back(v.value_or(0.0));
        }
        if (absent == out.size()) return std::nullopt;
        if (absent > 0) {
            fail(ErrorCode::kInvalidArgument,
                 "column " + name + " is blank for " + std::to_string(absent) + " manifest row(s)");
        }
        return out;
    }

    std::optional<std::vector<double>> column(const std::string& name) {
        if (name.rfind("sqrt_", 0) == 0) {
            auto v = base(name.substr(5));
            if (!v) {
                missing.push_back(name.substr(5));
                return std::nullopt;
            }
            return sqrt_transform(*v);
        }
        auto v = base(name);
        if (!v) {
            missing.push_back(name);
            return v;
        }
        // Segment and class counts always enter models as square roots.
        if (name == "num_seg" || name == "num_class") return sqrt_transform(*v);
        return v;
    }
};

}  // namespace

ModelData assemble(const Manifest& manifest, const FeatureTable* features, const std::vector<std::string>& columns,
                   const std::string& target) {
    Resolver res(manifest, features);
    std::vector<std::vector<double>> cols;
    for (const auto& name : columns) {
        if (auto v = res.column(name)) cols.push_back(std::move(*v));
    }
    std::optional<std::vector<double>> y;
    if (!target.empty()) y = res.column(target);
    if (!res.missing.empty()) fail(ErrorCode::kInvalidArgument, "missing columns: " + join(res.missing));

    ModelData data{{}, FeatureMatrix(columns, manifest.rows.size()), y.value_or(std::vector<double>{})};
    for (const auto& row : manifest.rows) data.ids.push_back(row.image_id);
    for (std::size_t c = 0; c < cols.size(); ++c) data.x.set_column(c, cols[c]);
    data.x.validate();
    return data;
}

nlohmann::ordered_json cmd_eval(const Manifest& manifest, const FeatureTable* features, const EvalOptions& options) {
    const auto columns = parse_model_spec(options.model);
    const ModelData data = assemble(manifest, features, columns, options.target);
    if (options.repetitions < 0) fail(ErrorCode::kInvalidArgument, "--reps must be >= 0");
    const int reps = options.repetitions > 0 ? options.repetitions : default_repetitions(data.x.rows());
    const EvalReport rep = cv_evaluate(data.x, data.target, reps, options.seed);

    nlohmann::ordered_json j;
    j["command"] = "eval";
    j["model"] = columns;
    j["target"] = options.target;
    j["n_rows"] = data.x.rows();
    j["repetitions"] = rep.repetitions;
    j["folds"] = rep.folds;
    j["seed"] = rep.seed;
    j["mean_spearman"] = rep.mean_spearman;
    j["skipped_splits"] = rep.skipped_splits;
    j["per_split_spearman"] = rep.per_split_spearman;
    return j;
}

nlohmann::ordered_json cmd_fit(const Manifest& manifest, const FeatureTable* features, const std::string& model,
                               const std::string& target) {
    const auto columns = parse_model_spec(model);
    const ModelData data = assemble(manifest, features, columns, target);
    const LinearModel fit = ols_fit(data.x, data.target);
    std::vector<double> pred;
    for (std::size_t r = 0; r < data.x.rows(); ++r) pred.push_back(fit.predict(data.x.row(r)));

    nlohmann::ordered_json j;
    j["command"] = "fit";
    j["model"] = columns;
    j["target"] = target;
    j["n_rows"] = data.x.rows();
    j["intercept"] = fit.intercept;
    nlohmann::ordered_json coef = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < columns.size(); ++c) coef[columns[c]] = fit.coefficients[c];
    j["coefficients"] = coef;
    try {
        j["train_spearman"] = spearman(pred, data.target);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerate) throw;
        j["train_spearman"] = nullptr;
    }
    return j;
}

nlohmann::ordered_json cmd_permtest(const Manifest& manifest, const FeatureTable* features,
                                    const PermtestOptions& options) {
    if (options.x.empty() || options.y.empty()) fail(ErrorCode::kInvalidArgument, "permtest needs --x and --y");
    if (options.n_perm < 1) fail(ErrorCode::kInvalidArgument, "--n must be >= 1");
    const bool same = options.x == options.y;
    const ModelData data = assemble(manifest, features,
                                    same ? std::vector<std::string>{options.x} : std::vector<std::string>{options.x, options.y},
                                    options.target);
    std::vector<double> x, y;
    for (std::size_t r = 0; r < data.x.rows(); ++r) {
        x.push_back(data.x.at(r, 0));
        y.push_back(data.x.at(r, same ? 0 : 1));
    }
    const auto res = permutation_test(data.target, x, y, options.n_perm, options.seed, options.x, options.y);

    nlohmann::ordered_json j;
    j["command"] = "permtest";
    j["x"] = options.x;
    j["y"] = options.y;
    j["target"] = options.target;
    j["n_rows"] = data.x.rows();
    j["rho_x"] = res.rho_x;
    j["rho_y"] = res.rho_y;
    j["delta_obs"] = res.delta_obs;
    j["n_perm"] = res.n_perm;
    j["seed"] = res.seed;
    j["exceed_count"] = res.exceed_count;
    j["p_value"] = res.p_value;
    j["significant"] = res.winner.has_value();
    j["winner"] = res.winner ? nlohmann::ordered_json(*res.winner) : nlohmann::ordered_json();
    return j;
}

nlohmann::ordered_json cmd_ks(const Manifest& a, const FeatureTable* features_a, const Manifest& b,
                              const FeatureTable* features_b, const std::string& column) {
    if (column.empty()) fail(ErrorCode::kInvalidArgument, "ks needs --column");
    const ModelData da = assemble(a, features_a, {column}, "");
    const ModelData db = assemble(b, features_b, {column}, "");
    std::vector<double> va, vb;
    for (std::size_t r = 0; r < da.x.rows(); ++r) va.push_back(da.x.at(r, 0));
    for (std::size_t r = 0; r < db.x.rows(); ++r) vb.push_back(db.x.at(r, 0));
    const KsResult res = ks_test(va, vb);
    double mean_a = 0, mean_b = 0;
    for (double v : va) mean_a += v;
    for (double v : vb) mean_b += v;

    nlohmann::ordered_json j;
    j["command"] = "ks";
    j["column"] = column;
    j["n_a"] = va.size();
    j["n_b"] = vb.size();
    j["mean_a"] = va.empty() ? 0.0 : mean_a / static_cast<double>(va.size());
    j["mean_b"] = vb.empty() ? 0.0 : mean_b / static_cast<double>(vb.size());
    j["statistic"] = res.statistic;
    j["p_value"] = res.p_value;
    return j;
}

std::string cmd_bt(const std::vector<ComparisonRecord>& records, const BtOptions& options) {
    std::set<std::string> tasks;
    for (const auto& r : records) {
        if (!r.is_attention_check && !r.excluded) tasks.insert(r.task);
    }
    if (tasks.size() > 1) fail(ErrorCode::kInvalidArgument, "comparisons mix tasks: " + join({tasks.begin(), tasks.end()}));
    const std::string column = tasks.empty() ? "complexity" : *tasks.begin();
    const BtFit fit = score_pipeline(records, options);
    std::string out = format_csv_row({"image_id", column, "strength"});
    for (std::size_t i = 0; i < fit.items.size(); ++i) {
        out += format_csv_row({fit.items[i], format_number(fit.scores[i]), format_number(fit.strengths[i])});
    }
    return out;
}

std::unique_ptr<SurpriseProvider> make_provider(const std::string& name, const std::filesystem::path& config) {
    if (name == "stub") return std::make_unique<StubProvider>();
    if (name == "http") {
        if (config.empty()) fail(ErrorCode::kInvalidArgument, "the http provider needs --provider-config");
        return std::make_unique<HttpProvider>(ProviderConfig::from_file(config));
    }
    fail(ErrorCode::kInvalidArgument, "unknown provider '" + name + "' (expected stub or http)");
}

std::string cmd_surprise(const Manifest& manifest, const SurpriseCommandOptions& options,
                         std::vector<std::string>* errors, Clock& clock) {
    manifest.validate();
    if (options.in_flight < 1) fail(ErrorCode::kInvalidArgument, "--jobs must be >= 1");
    if (options.requests_per_minute < 0) fail(ErrorCode::kInvalidArgument, "--rpm must be >= 0");
    auto provider = make_provider(options.provider, options.provider_config);

    std::vector<CorpusItem> items;
    for (const auto& row : manifest.rows) items.push_back({row.image_id, manifest.resolve(row)});
    CorpusOptions copt;
    copt.results_path = options.results_path;
    copt.requests_per_minute = options.requests_per_minute;
    copt.in_flight = options.in_flight;
    if (!options.prompt_file.empty()) copt.prompt = load_prompt(options.prompt_file);
    if (options.provider == "http") {
        const auto cfg = ProviderConfig::from_file(options.provider_config);
        copt.retry = {cfg.max_retries, cfg.backoff_ms};
    }

    const auto outcomes = score_corpus(*provider, items, copt, clock);
    std::string out = format_csv_row({"image_id", "surprise", "reasoning"});
    for (const auto& o : outcomes) {
        if (o.result) {
            out += format_csv_row({o.image_id, std::to_string(o.result->rating), o.result->reasoning});
        } else if (errors) {
            errors->push_back(o.image_id + ": " + o.error);
        }
    }
    return out;
}

}  // namespace vcx
