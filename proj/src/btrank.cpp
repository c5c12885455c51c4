#include "vcx/btrank.hpp"

#include "vcx/error.hpp"
#include "vcx/stats.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <iostream>

namespace vcx {

std::map<std::string, double> BtFit::score_map() const {
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < items.size(); ++i) out.emplace(items[i], scores[i]);
    return out;
}

ProbabilityMatrix build_prob_matrix(std::span<const ComparisonRecord> records) {
    std::vector<std::string> items;
    for (const auto& r : records) {
        if (r.is_attention_check || r.excluded) continue;
        items.push_back(r.item_a);
        items.push_back(r.item_b);
    }
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    const std::size_t n = items.size();
    auto index = [&](const std::string& id) {
        return static_cast<std::size_t>(std::lower_bound(items.begin(), items.end(), id) - items.begin());
    };

    std::vector<std::uint32_t> wins(n * n, 0);
    ProbabilityMatrix m{items, std::vector<double>(n * n, 0.0), std::vector<std::uint32_t>(n * n, 0)};
    for (const auto& r : records) {
        if (r.is_attention_check || r.excluded) continue;
        if (r.item_a == r.item_b) fail(ErrorCode::kInvalidArgument, "comparison of an item with itself: " + r.item_a);
        if (r.winner != r.item_a && r.winner != r.item_b) {
            fail(ErrorCode::kInvalidArgument, "winner '" + r.winner + "' is not one of the compared items");
        }
        const std::size_t a = index(r.item_a);
        const std::size_t b = index(r.item_b);
        const std::size_t w = r.winner == r.item_a ? a : b;
        const std::size_t l = w == a ? b : a;
        ++wins[w * n + l];
        ++m.count[a * n + b];
        ++m.count[b * n + a];
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto c = m.count[i * n + j];
            if (c > 0) m.p[i * n + j] = static_cast<double>(wins[i * n + j]) / static_cast<double>(c);
        }
    }
    return m;
}

ProbabilityMatrix rescale_matrix(ProbabilityMatrix m, double lo, double hi) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        fail(ErrorCode::kInvalidArgument, "rescale bounds must satisfy lo < hi");
    }
    for (std::size_t k = 0; k < m.p.size(); ++k) {
        if (m.count[k] > 0) m.p[k] = lo + m.p[k] * (hi - lo);
    }
    return m;
}

namespace {

// Connected components of the comparison graph, each as sorted item indices.
std::vector<std::vector<std::size_t>> components(const ProbabilityMatrix& m) {
    const std::size_t n = m.size();
    std::vector<int> label(n, -1);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < n; ++s) {
        if (label[s] >= 0) continue;
        const int id = static_cast<int>(out.size());
        out.emplace_back();
        std::vector<std::size_t> stack{s};
        label[s] = id;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            out.back().push_back(i);
            for (std::size_t j = 0; j < n; ++j) {
                if (label[j] < 0 && m.compared(i, j)) {
                    label[j] = id;
                    stack.push_back(j);
                }
            }
        }
        std::sort(out.back().begin(), out.back().end());
    }
    return out;
}

}  // namespace

double bt_log_likelihood(const ProbabilityMatrix& m, std::span<const double> strengths) {
    const std::size_t n = m.size();
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || !m.compared(i, j)) continue;
            const double w = m.count[i * n + j] * m.at(i, j);
            if (w == 0.0) continue;
            ll += w * (std::log(strengths[i]) - std::log(strengths[i] + strengths[j]));
        }
    }
    return ll;
}

namespace {

// Total weighted wins on pair (i, j). After rescaling this is below the raw
// count, so the denominator uses it rather than the count to keep the update
// a maximizer of the weighted likelihood.
double pair_weight(const ProbabilityMatrix& m, std::size_t i, std::size_t j) {
    const std::size_t n = m.size();
    return m.count[i * n + j] * (m.at(i, j) + m.at(j, i));
}

}  // namespace

BtFit bt_fit(const ProbabilityMatrix& m, const BtOptions& options) {
    const std::size_t n = m.size();
    BtFit fit;
    fit.items = m.items;
    if (n == 0) return fit;

    const auto comps = components(m);
    if (comps.size() > 1) {
        std::string msg = "comparison graph is disconnected into " + std::to_string(comps.size()) + " components:";
        for (const auto& comp : comps) {
            msg += " {";
            for (std::size_t k = 0; k < comp.size(); ++k) msg += (k ? ", " : "") + m.items[comp[k]];
            msg += "}";
        }
        fail(ErrorCode::kDisconnected, msg);
    }

    std::vector<double> wins(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && m.compared(i, j)) wins[i] += m.count[i * n + j] * m.at(i, j);
        }
    }

    std::vector<double> pi(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
#ifndef NDEBUG
    double prev_ll = bt_log_likelihood(m, pi);
#endif
    for (fit.iterations = 0; fit.iterations < options.max_iter && n > 1;) {
        for (std::size_t i = 0; i < n; ++i) {
            double denom = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j && m.compared(i, j)) denom += pair_weight(m, i, j) / (pi[i] + pi[j]);
            }
            next[i] = wins[i] / denom;
        }
        double total = 0.0;
        for (double v : next) total += v;
        double max_delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] /= total;
            max_delta = std::max(max_delta, std::abs(next[i] - pi[i]));
        }
        pi.swap(next);
        ++fit.iterations;
#ifndef NDEBUG
        const double ll = bt_log_likelihood(m, pi);
        assert(ll >= prev_ll - 1e-9 * std::max(1.0, std::abs(prev_ll)));
        prev_ll = ll;
#endif
        if (max_delta < options.tol) {
            fit.converged = true;
            break;
        }
    }
    if (n == 1) fit.converged = true;
    if (!fit.converged) {
        std::cerr << "warning: Bradley-Terry fit did not converge after " << fit.iterations
                  << " iterations; returning last iterate\n";
    }

    fit.strengths = pi;
    std::vector<double> logs(n);
    // Items without any wins (possible only without rescaling) sit at the floor.
    for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(std::max(pi[i], 1e-300));
    fit.scores = to_display_scale(logs);
    return fit;
}

BtFit score_pipeline(std::span<const ComparisonRecord> records, const BtOptions& options) {
    return bt_fit(rescale_matrix(build_prob_matrix(records), kRescaleLow, kRescaleHigh), options);
}

}  // namespace vcx
