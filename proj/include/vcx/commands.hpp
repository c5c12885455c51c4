#pragma once

#include "vcx/baselines.hpp"
#include "vcx/btrank.hpp"
#include "vcx/dataset.hpp"
#include "vcx/image.hpp"
#include "vcx/muc.hpp"
#include "vcx/stats.hpp"
#include "vcx/surprise.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vcx {

/// Parses "1,2,4,8" style lists.
std::vector<int> parse_int_list(const std::string& text, const std::string& what);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);
/// Schedule from optional comma lists; either omitted falls back to the standard one.
ScaleSchedule parse_schedule(const std::string& scales, const std::string& weights);

struct ExtractOptions {
    int bits = BitPrecision::kDefault;
    ScaleSchedule schedule = ScaleSchedule::standard();
    bool with_baselines = false;
    CannyParams canny;
    int patch = 16;
    int jobs = 1;
    bool skip_bad = false;
};

struct ExtractResult {
    FeatureTable table;
    std::vector<std::string> failures;  ///< "id: message" for skipped images
};

/// Feature table with columns msg, msg_gray, muc_b{b}, colorfulness_b{b}
/// and, with baselines, edge_density and patch_symmetry. Rows follow the
/// manifest and do not depend on the job count. Undecodable images fail
/// the command unless skip_bad is set.
ExtractResult cmd_extract(const Manifest& manifest, const ExtractOptions& options);

/// Named predictor columns joined from a manifest and a feature table.
///
/// Names resolve to feature columns first, then to the manifest columns
/// complexity, surprise, num_seg and num_class. "sqrt_<name>" takes the
/// square root, and num_seg and num_class are always square-rooted, so
/// "num_seg" and "sqrt_num_seg" are the same column. "muc" and
/// "colorfulness" stand for the single muc_b* or colorfulness_b* column
/// present.
struct ModelData {
    std::vector<std::string> ids;
    FeatureMatrix x;
    std::vector<double> target;
};

std::vector<std::string> parse_model_spec(const std::string& spec);
ModelData assemble(const Manifest& manifest, const FeatureTable* features, const std::vector<std::string>& columns,
                   const std::string& target = "complexity");

struct EvalOptions {
    std::string model;
    int repetitions = 0;  ///< 0 picks default_repetitions(n)
    std::uint64_t seed = 0;
    std::string target = "complexity";
};
nlohmann::ordered_json cmd_eval(const Manifest& manifest, const FeatureTable* features, const EvalOptions& options);
nlohmann::ordered_json cmd_fit(const Manifest& manifest, const FeatureTable* features, const std::string& model,
                               const std::string& target = "complexity");

struct PermtestOptions {
    std::string x;
    std::string y;
    std::size_t n_perm = kDefaultPermutations;
    std::uint64_t seed = 0;
    std::string target = "complexity";
};
nlohmann::ordered_json cmd_permtest(const Manifest& manifest, const FeatureTable* features,
                                    const PermtestOptions& options);

/// KS test of one column between two datasets.
nlohmann::ordered_json cmd_ks(const Manifest& a, const FeatureTable* features_a, const Manifest& b,
                              const FeatureTable* features_b, const std::string& column);

/// CSV with image_id, <task score column>, strength. The score column is
/// named after the records' task.
std::string cmd_bt(const std::vector<ComparisonRecord>& records, const BtOptions& options = {});

struct SurpriseCommandOptions {
    std::string provider = "stub";
    std::filesystem::path provider_config;  ///< required for the http provider
    std::filesystem::path results_path;     ///< resumable JSON lines; optional
    std::filesystem::path prompt_file;
    double requests_per_minute = 0.0;
    int in_flight = 1;
};
/// CSV with image_id, surprise, reasoning for the successfully scored images.
/// Failures are listed in `errors`.
std::string cmd_surprise(const Manifest& manifest, const SurpriseCommandOptions& options,
                         std::vector<std::string>* errors = nullptr, Clock& clock = system_clock());

std::unique_ptr<SurpriseProvider> make_provider(const std::string& name, const std::filesystem::path& config);

}  // namespace vcx
