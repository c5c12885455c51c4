#include "vcx/stats.hpp"

#include "vcx/error.hpp"
#include "vcx/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace vcx {

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        // Positions i..j-1 hold ranks i+1..j; ties get their mean.
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) fail(ErrorCode::kInvalidArgument, "spearman inputs differ in length");
    if (x.size() < 3) fail(ErrorCode::kInvalidArgument, "spearman needs at least 3 samples");
}

// Centres ranks in place and returns their Euclidean norm.
double centre(std::vector<double>& ranks) {
    const double mean = 0.5 * static_cast<double>(ranks.size() + 1);
    double ss = 0.0;
    for (double& r : ranks) {
        r -= mean;
        ss += r * r;
    }
    return std::sqrt(ss);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double clamp_unit(double r) { return std::clamp(r, -1.0, 1.0); }

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    const double nx = centre(rx);
    const double ny = centre(ry);
    if (nx == 0.0 || ny == 0.0) fail(ErrorCode::kDegenerate, "spearman correlation undefined for constant input");
    return clamp_unit(dot(rx, ry) / (nx * ny));
}

std::vector<double> sqrt_transform(std::span<const double> column) {
    std::vector<double> out(column.size());
    for (std::size_t i = 0; i < column.size(); ++i) {
        if (!(column[i] >= 0.0)) fail(ErrorCode::kInvalidArgument, "sqrt_transform requires nonnegative entries");
        out[i] = std::sqrt(column[i]);
    }
    return out;
}

std::vector<double> to_display_scale(std::span<const double> values) {
    std::vector<double> out(values.size(), 50.0);
    if (values.empty()) return out;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    if (!(range > 1e-12 * std::max(1.0, std::abs(*hi)))) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = 100.0 * (values[i] - *lo) / range;
    return out;
}

// ---------------------------------------------------------------------------

FeatureMatrix::FeatureMatrix(std::vector<std::string> names, std::size_t rows)
    : names_(std::move(names)), rows_(rows), values_(rows * names_.size(), 0.0) {
    auto sorted = names_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        fail(ErrorCode::kInvalidArgument, "feature column names must be unique");
    }
}

void FeatureMatrix::set_column(std::size_t c, std::span<const double> column) {
    if (column.size() != rows_) fail(ErrorCode::kInvalidArgument, "column length does not match row count");
    for (std::size_t r = 0; r < rows_; ++r) at(r, c) = column[r];
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
    FeatureMatrix out(names_, indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(indices[r] * cols()), cols(),
                    out.values_.begin() + static_cast<std::ptrdiff_t>(r * cols()));
    }
    return out;
}

void FeatureMatrix::validate() const {
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols(); ++c) {
            if (!std::isfinite(at(r, c))) {
                fail(ErrorCode::kInvalidArgument,
                     "non-finite value in column '" + names_[c] + "' row " + std::to_string(r));
            }
        }
    }
}

double LinearModel::predict(std::span<const double> row) const {
    double v = intercept;
    for (std::size_t c = 0; c < coefficients.size(); ++c) v += coefficients[c] * row[c];
    return v;
}

LinearModel ols_fit(const FeatureMatrix& x, std::span<const double> y) {
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto p = static_cast<Eigen::Index>(x.cols());
    if (static_cast<std::size_t>(n) != y.size()) fail(ErrorCode::kInvalidArgument, "target length does not match rows");
    if (n <= p + 1) fail(ErrorCode::kInvalidArgument, "ols_fit needs more rows than columns + 1");

    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd target(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < p; ++c) design(r, c) = x.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        target(r) = y[static_cast<std::size_t>(r)];
    }
    // Centring absorbs the intercept.
    const Eigen::RowVectorXd x_mean = design.colwise().mean();
    const double y_mean = target.mean();
    design.rowwise() -= x_mean;
    target.array() -= y_mean;

    LinearModel model;
    model.coefficients.assign(static_cast<std::size_t>(p), 0.0);
    if (p > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        qr.setThreshold(1e-10);
        if (qr.rank() < p) fail(ErrorCode::kSingular, "design matrix is rank deficient");
        const Eigen::VectorXd beta = qr.solve(target);
        for (Eigen::Index c = 0; c < p; ++c) model.coefficients[static_cast<std::size_t>(c)] = beta(c);
    }
    model.intercept = y_mean;
    for (Eigen::Index c = 0; c < p; ++c) model.intercept -= model.coefficients[static_cast<std::size_t>(c)] * x_mean(c);
    return model;
}

int default_repetitions(std::size_t n_rows) {
    if (n_rows == 0) return 50;
    const long m = std::lround(1500.0 / static_cast<double>(n_rows));
    return static_cast<int>(std::clamp(m, 1L, 50L));
}

EvalReport cv_evaluate(const FeatureMatrix& x, std::span<const double> y, int repetitions, std::uint64_t seed) {
    constexpr int kFolds = 3;
    const std::size_t n = x.rows();
    if (n != y.size()) fail(ErrorCode::kInvalidArgument, "target length does not match rows");
    if (n < 9) fail(ErrorCode::kInvalidArgument, "cross-validation needs at least 9 rows");
    if (repetitions < 1) fail(ErrorCode::kInvalidArgument, "repetitions must be >= 1");

    EvalReport report;
    report.repetitions = repetitions;
    report.folds = kFolds;
    report.seed = seed;

    std::vector<std::size_t> order(n);
    for (int rep = 0; rep < repetitions; ++rep) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(rep));
        rng.shuffle(std::span<std::size_t>(order));
        for (int fold = 0; fold < kFolds; ++fold) {
            const std::size_t lo = n * static_cast<std::size_t>(fold) / kFolds;
            const std::size_t hi = n * static_cast<std::size_t>(fold + 1) / kFolds;
            std::vector<std::size_t> train;
            std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                          order.begin() + static_cast<std::ptrdiff_t>(hi));
            train.reserve(n - test.size());
            for (std::size_t i = 0; i < n; ++i) {
                if (i < lo || i >= hi) train.push_back(order[i]);
            }
            std::vector<double> y_train;
            for (auto i : train) y_train.push_back(y[i]);
            try {
                const LinearModel model = ols_fit(x.select_rows(train), y_train);
                std::vector<double> pred;
                std::vector<double> truth;
                for (auto i : test) {
                    pred.push_back(model.predict(x.row(i)));
                    truth.push_back(y[i]);
                }
                report.per_split_spearman.push_back(spearman(pred, truth));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::kDegenerate && e.code() != ErrorCode::kSingular) throw;
                ++report.skipped_splits;
            }
        }
    }
    if (report.per_split_spearman.empty()) {
        fail(ErrorCode::kDegenerate, "every cross-validation split was degenerate");
    }
    double sum = 0.0;
    for (double r : report.per_split_spearman) sum += r;
    report.mean_spearman = sum / static_cast<double>(report.per_split_spearman.size());
    return report;
}

PermTestResult permutation_test(std::span<const double> complexity, std::span<const double> x,
                                std::span<const double> y, std::size_t n_perm, std::uint64_t seed,
                                const std::string& x_name, const std::string& y_name) {
    check_pair(complexity, x);
    check_pair(complexity, y);
    if (n_perm < 1) fail(ErrorCode::kInvalidArgument, "permutation count must be >= 1");

    // Shuffling C permutes its ranks, so ranks are computed once.
    auto rc = average_ranks(complexity);
    auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    const double nc = centre(rc);
    const double nx = centre(rx);
    const double ny = centre(ry);
    if (nc == 0.0 || nx == 0.0 || ny == 0.0) {
        fail(ErrorCode::kDegenerate, "permutation test undefined for constant input");
    }
    auto delta = [&](std::span<const double> ranks_c) {
        const double rho_x = clamp_unit(dot(ranks_c, rx) / (nc * nx));
        const double rho_y = clamp_unit(dot(ranks_c, ry) / (nc * ny));
        return std::pair{rho_x, rho_y};
    };

    PermTestResult result;
    result.n_perm = n_perm;
    result.seed = seed;
    std::tie(result.rho_x, result.rho_y) = delta(rc);
    result.delta_obs = std::abs(result.rho_x) - std::abs(result.rho_y);
    const double threshold = std::abs(result.delta_obs);

    Rng rng(seed);
    for (std::size_t i = 0; i < n_perm; ++i) {
        rng.shuffle(std::span<double>(rc));
        const auto [px, py] = delta(rc);
        if (std::abs(std::abs(px) - std::abs(py)) >= threshold) ++result.exceed_count;
    }
    result.p_value = static_cast<double>(result.exceed_count + 1) / static_cast<double>(n_perm + 1);
    if (result.p_value < kSignificanceLevel) {
        result.winner = result.delta_obs > 0.0 ? x_name : y_name;
    }
    return result;
}

double kolmogorov_sf(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.18) {
        // Small-lambda form of the CDF converges faster here.
        const double pi = std::numbers::pi;
        const double t = -pi * pi / (8.0 * lambda * lambda);
        double cdf = 0.0;
        for (int k = 1; k <= 50; ++k) {
            const double odd = 2.0 * k - 1.0;
            cdf += std::exp(odd * odd * t);
        }
        cdf *= std::sqrt(2.0 * pi) / lambda;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double sf = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sf += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-300) break;
    }
    return std::clamp(sf, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) fail(ErrorCode::kInvalidArgument, "ks_test needs two nonempty samples");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double v = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == v) ++i;
        while (j < sb.size() && sb[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = na * nb / (na + nb);
    return {d, kolmogorov_sf(std::sqrt(ne) * d)};
}

}  // namespace vcx
