#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace vcx {

/// One pairwise judgment. Attention-check records show the same image on
/// both sides; they never enter the ranking.
struct ComparisonRecord {
    std::string item_a;
    std::string item_b;
    std::string winner;
    std::string rater;
    std::string session_id;
    std::int64_t timestamp_ms = 0;
    int trial_index = 0;
    bool is_attention_check = false;
    bool attention_passed = false;
    bool excluded = false;
    std::string task = "complexity";

    bool operator==(const ComparisonRecord&) const = default;
};

/// Empirical win fractions over an ordered item list.
struct ProbabilityMatrix {
    std::vector<std::string> items;
    std::vector<double> p;             ///< p[i * n + j]: fraction of i-vs-j comparisons won by i
    std::vector<std::uint32_t> count;  ///< comparisons between i and j (symmetric)

    std::size_t size() const noexcept { return items.size(); }
    bool compared(std::size_t i, std::size_t j) const { return count[i * size() + j] > 0; }
    double at(std::size_t i, std::size_t j) const { return p[i * size() + j]; }
};

/// Items sorted by id. Attention checks and excluded records are skipped.
ProbabilityMatrix build_prob_matrix(std::span<const ComparisonRecord> records);

inline constexpr double kRescaleLow = 0.33;
inline constexpr double kRescaleHigh = 0.66;

/// p' = lo + p * (hi - lo) on compared entries.
ProbabilityMatrix rescale_matrix(ProbabilityMatrix m, double lo = kRescaleLow, double hi = kRescaleHigh);

struct BtOptions {
    int max_iter = 10000;
    double tol = 1e-9;
};

struct BtFit {
    std::vector<std::string> items;
    std::vector<double> strengths;  ///< sum to 1
    std::vector<double> scores;     ///< log-strengths min-max mapped to [0, 100]
    int iterations = 0;
    bool converged = false;

    std::map<std::string, double> score_map() const;
};

/// Bradley-Terry strengths by minorization-maximization.
///
/// Pair (i, j) with n comparisons contributes n * p[i][j] wins to i.
/// Throws kDisconnected, naming the components, if the comparison graph is
/// not connected. Non-convergence is reported through BtFit::converged.
BtFit bt_fit(const ProbabilityMatrix& m, const BtOptions& options = {});

/// Bradley-Terry log-likelihood of strengths under the weighted wins of m.
double bt_log_likelihood(const ProbabilityMatrix& m, std::span<const double> strengths);

/// build_prob_matrix -> rescale_matrix(0.33, 0.66) -> bt_fit.
BtFit score_pipeline(std::span<const ComparisonRecord> records, const BtOptions& options = {});

}  // namespace vcx
