#include <algorithm>
#include <cmath>
#include <numeric>

#include "pacmetric/evalstats.hpp"

namespace pacmetric::evalstats {

namespace {

void require_pairs(std::span<const double> x, std::span<const double> y, const char* what) {
    if (x.size() != y.size())
        throw std::invalid_argument(std::string(what) + ": lists differ in length");
    if (x.size() < 2) throw UndefinedCorrelation(std::string(what) + ": need at least 2 items");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw std::invalid_argument(std::string(what) + ": non-finite input at " + std::to_string(i));
}

std::int64_t tied_pairs(std::int64_t run) { return run * (run - 1) / 2; }

// Stable merge sort of `v` counting inversions (pairs out of order).
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += static_cast<std::int64_t>(mid - i);
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

}  // namespace

KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y) {
    require_pairs(x, y, "kendall");
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    KendallCounts c;
    c.n = static_cast<std::int64_t>(n);
    c.pairs = tied_pairs(c.n);

    // Runs of equal x, and of equal (x, y), in the sorted order.
    std::int64_t run_x = 1, run_xy = 1;
    c.distinct_x = 1;
    for (std::size_t i = 1; i < n; ++i) {
        const bool same_x = x[idx[i]] == x[idx[i - 1]];
        const bool same_xy = same_x && y[idx[i]] == y[idx[i - 1]];
        if (same_x) {
            ++run_x;
        } else {
            c.ties_x += tied_pairs(run_x);
            run_x = 1;
            ++c.distinct_x;
        }
        if (same_xy) {
            ++run_xy;
        } else {
            c.ties_xy += tied_pairs(run_xy);
            run_xy = 1;
        }
    }
    c.ties_x += tied_pairs(run_x);
    c.ties_xy += tied_pairs(run_xy);

    std::vector<double> ys(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
    const std::int64_t swaps = merge_count(ys, buf, 0, n);

    std::int64_t run_y = 1;
    c.distinct_y = 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (ys[i] == ys[i - 1]) {
            ++run_y;
        } else {
            c.ties_y += tied_pairs(run_y);
            run_y = 1;
            ++c.distinct_y;
        }
    }
    c.ties_y += tied_pairs(run_y);

    c.concordant_minus_discordant = c.pairs - c.ties_x - c.ties_y + c.ties_xy - 2 * swaps;
    return c;
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    const auto c = kendall_counts(x, y);
    const std::int64_t dx = c.pairs - c.ties_x;
    const std::int64_t dy = c.pairs - c.ties_y;
    if (dx == 0 || dy == 0) throw UndefinedCorrelation("kendall_tau_b: one list is constant");
    return static_cast<double>(c.concordant_minus_discordant) /
           std::sqrt(static_cast<double>(dx) * static_cast<double>(dy));
}

double kendall_tau_c(std::span<const double> x, std::span<const double> y) {
    const auto c = kendall_counts(x, y);
    const auto m = static_cast<double>(std::min(c.distinct_x, c.distinct_y));
    if (m < 2.0) throw UndefinedCorrelation("kendall_tau_c: fewer than 2 distinct values");
    const auto n = static_cast<double>(c.n);
    return 2.0 * m * static_cast<double>(c.concordant_minus_discordant) / (n * n * (m - 1.0));
}

std::vector<double> average_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && x[idx[j]] == x[idx[i]]) ++j;
        // positions i..j-1 share ranks i+1..j
        const double r = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = r;
        i = j;
    }
    return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    require_pairs(x, y, "spearman_rho");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const auto n = static_cast<double>(x.size());
    const double mean = (n + 1.0) / 2.0;  // mean rank, exact with averaged ties
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double a = rx[i] - mean;
        const double b = ry[i] - mean;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("spearman_rho: zero rank variance");
    return sxy / std::sqrt(sxx * syy);
}

CorrelationSummary correlate(const JudgmentSet& set, std::span<const double> metric) {
    if (metric.size() != set.items.size())
        throw std::invalid_argument("correlate: one metric value per judgment required");
    std::vector<double> human(set.items.size());
    for (std::size_t i = 0; i < human.size(); ++i) human[i] = set.items[i].human_score;
    return {kendall_tau_b(metric, human), kendall_tau_c(metric, human), spearman_rho(metric, human),
            human.size()};
}

}  // namespace pacmetric::evalstats
