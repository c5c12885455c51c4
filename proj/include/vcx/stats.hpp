#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vcx {

/// Fractional ranks starting at 1; ties share the mean of their ranks.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks.
///
/// Throws kInvalidArgument for unequal lengths or fewer than 3 samples and
/// kDegenerate when either input is constant.
double spearman(std::span<const double> x, std::span<const double> y);

/// Elementwise square root; throws kInvalidArgument on negative entries.
std::vector<double> sqrt_transform(std::span<const double> column);

/// Min-max map onto [0, 100]. All-equal inputs map to 50.
std::vector<double> to_display_scale(std::span<const double> values);

/// Row-major table of named, finite feature columns.
class FeatureMatrix {
public:
    FeatureMatrix(std::vector<std::string> names, std::size_t rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }

    void set_column(std::size_t c, std::span<const double> column);
    /// Rows selected by index, in the given order.
    FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
    /// Throws kInvalidArgument on any non-finite entry.
    void validate() const;

private:
    std::vector<std::string> names_;
    std::size_t rows_;
    std::vector<double> values_;
};

struct LinearModel {
    std::vector<double> coefficients;
    double intercept = 0.0;

    double predict(std::span<const double> row) const;
};

/// Ordinary least squares with intercept.
///
/// Requires rows > cols + 1 and full column rank (kSingular otherwise).
LinearModel ols_fit(const FeatureMatrix& x, std::span<const double> y);

struct EvalReport {
    std::vector<double> per_split_spearman;  ///< valid splits, in evaluation order
    double mean_spearman = 0.0;
    int repetitions = 0;
    int folds = 3;
    std::uint64_t seed = 0;
    int skipped_splits = 0;  ///< splits with constant predictions or a singular fit
};

/// clamp(round(1500 / n_rows), 1, 50).
int default_repetitions(std::size_t n_rows);

/// Repeated 3-fold cross-validated linear regression scored by Spearman
/// correlation between held-out predictions and targets.
///
/// Repetition r shuffles rows with Rng::substream(seed, r), so results are
/// reproducible and independent of evaluation order.
EvalReport cv_evaluate(const FeatureMatrix& x, std::span<const double> y, int repetitions, std::uint64_t seed);

struct PermTestResult {
    double rho_x = 0.0;
    double rho_y = 0.0;
    double delta_obs = 0.0;
    std::size_t exceed_count = 0;
    double p_value = 1.0;
    std::size_t n_perm = 0;
    std::uint64_t seed = 0;
    std::optional<std::string> winner;
};

inline constexpr std::size_t kDefaultPermutations = 1000;
inline constexpr double kSignificanceLevel = 0.05;

/// Tests whether |rho(C, X)| and |rho(C, Y)| differ by shuffling C.
/// p = (#{|delta_perm| >= |delta_obs|} + 1) / (n + 1).
PermTestResult permutation_test(std::span<const double> complexity, std::span<const double> x,
                                std::span<const double> y, std::size_t n_perm, std::uint64_t seed,
                                const std::string& x_name = "x", const std::string& y_name = "y");

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult ks_test(std::span<const double> a, std::span<const double> b);

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_sf(double lambda);

}  // namespace vcx
