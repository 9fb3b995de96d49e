#include "oracles.hpp"

#include <algorithm>
#include <limits>
#include <set>

namespace oracle {

PairCounts count_pairs(std::span<const double> x, std::span<const double> y) {
    PairCounts c;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            c.n0 += 1;
            const double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0) c.ties_x += 1;
            if (dy == 0) c.ties_y += 1;
            if (dx == 0 || dy == 0) continue;
            if ((dx > 0) == (dy > 0))
                c.concordant += 1;
            else
                c.discordant += 1;
        }
    return c;
}

double tau_b(std::span<const double> x, std::span<const double> y) {
    const auto c = count_pairs(x, y);
    return (c.concordant - c.discordant) / std::sqrt((c.n0 - c.ties_x) * (c.n0 - c.ties_y));
}

double tau_c(std::span<const double> x, std::span<const double> y) {
    const auto c = count_pairs(x, y);
    const double n = static_cast<double>(x.size());
    const double m = static_cast<double>(std::min(std::set<double>(x.begin(), x.end()).size(),
                                                  std::set<double>(y.begin(), y.end()).size()));
    return 2.0 * m * (c.concordant - c.discordant) / (n * n * (m - 1.0));
}

std::vector<double> naive_ranks(std::span<const double> x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double less = 0, equal = 0;
        for (double v : x) {
            if (v < x[i]) less += 1;
            if (v == x[i]) equal += 1;
        }
        r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = naive_ranks(x), ry = naive_ranks(y);
    return pearson(rx, ry);
}

// ---------------------------------------------------------------------------

PRF brute_fine(const Matrix& frames, const Matrix& tokens, std::span<const double> weights) {
    const auto sim = [&](std::size_t j, std::size_t l) {
        double d = 0;
        for (std::size_t k = 0; k < frames.cols(); ++k) d += frames(j, k) * tokens(l, k);
        return d;
    };
    double wsum = 0;
    for (double w : weights) wsum += w;
    std::vector<double> w(weights.begin(), weights.end());
    if (wsum == 0) {
        std::fill(w.begin(), w.end(), 1.0);
        wsum = static_cast<double>(w.size());
    }
    PRF out;
    for (std::size_t l = 0; l < tokens.rows(); ++l) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < frames.rows(); ++j) best = std::max(best, sim(j, l));
        out.p += w[l] * best;
    }
    out.p /= wsum;
    for (std::size_t j = 0; j < frames.rows(); ++j) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < tokens.rows(); ++l) best = std::max(best, sim(j, l));
        out.r += best;
    }
    out.r /= static_cast<double>(frames.rows());
    out.f1 = out.p + out.r > 0 ? 2 * out.p * out.r / (out.p + out.r) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------

double scalar_info_nce(const Matrix& V, const Matrix& T, double tau) {
    const std::size_t n = V.rows();
    std::vector<std::vector<double>> s(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double d = 0;
            for (std::size_t k = 0; k < V.cols(); ++k) d += V(i, k) * T(j, k);
            s[i][j] = d / tau;
        }
    const auto lse = [](const std::vector<double>& z) {
        const double m = *std::max_element(z.begin(), z.end());
        double acc = 0;
        for (double v : z) acc += std::exp(v - m);
        return m + std::log(acc);
    };
    double i2t = 0, t2i = 0;
    for (std::size_t i = 0; i < n; ++i) {
        i2t += lse(s[i]) - s[i][i];
        std::vector<double> col(n);
        for (std::size_t j = 0; j < n; ++j) col[j] = s[j][i];
        t2i += lse(col) - s[i][i];
    }
    return 0.5 * (i2t + t2i) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

std::vector<double> central_difference(std::span<double> params, const std::function<double()>& f, double h) {
    std::vector<double> g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = f();
        params[i] = saved - h;
        const double down = f();
        params[i] = saved;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    double diff = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

// ---------------------------------------------------------------------------

bool PolicyModel::complete(const Tokens& prefix) const {
    if (prefix.size() >= max_len) return true;
    return !prefix.empty() && eos && prefix.back() == *eos;
}

std::vector<Tokens> PolicyModel::enumerate() const {
    std::vector<Tokens> done, frontier{{}};
    while (!frontier.empty()) {
        std::vector<Tokens> next;
        for (const auto& p : frontier)
            for (std::size_t v = 0; v < vocab(); ++v) {
                Tokens q = p;
                q.push_back(v);
                (complete(q) ? done : next).push_back(std::move(q));
            }
        frontier = std::move(next);
    }
    return done;
}

Dual PolicyModel::prob(std::span<const double> image, const Tokens& seq, std::size_t k) const {
    const std::size_t F = theta.cols();
    const std::size_t D = embed.cols();
    Dual p{1.0, 0.0};
    Vector state(bos.begin(), bos.end());
    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
        std::vector<double> phi(F);
        std::copy(image.begin(), image.end(), phi.begin());
        for (std::size_t d = 0; d < D; ++d) phi[image.size() + d] = state[d];
        phi[F - 1] = 1.0;

        std::vector<Dual> z(vocab());
        for (std::size_t v = 0; v < vocab(); ++v)
            for (std::size_t f = 0; f < F; ++f) {
                const Dual w{theta(v, f), v * F + f == k ? 1.0 : 0.0};
                z[v] = z[v] + w * Dual{phi[f], 0.0};
            }
        Dual denom{0.0, 0.0};
        for (auto& zv : z) denom = denom + exp(zv);
        p = p * (exp(z[seq[pos]]) / denom);
        for (std::size_t d = 0; d < D; ++d) state[d] += embed(seq[pos], d);
    }
    return p;
}

double PolicyModel::expected_reward(std::span<const double> image,
                                    const std::function<double(const Tokens&)>& r) const {
    double e = 0;
    for (const auto& s : enumerate()) e += prob(image, s, std::numeric_limits<std::size_t>::max()).v * r(s);
    return e;
}

Matrix PolicyModel::expected_reward_grad(std::span<const double> image,
                                         const std::function<double(const Tokens&)>& r) const {
    Matrix g(theta.rows(), theta.cols());
    const auto seqs = enumerate();
    for (std::size_t k = 0; k < theta.size(); ++k) {
        double acc = 0;
        for (const auto& s : seqs) acc += prob(image, s, k).d * r(s);
        g.flat()[k] = acc;
    }
    return g;
}

std::vector<std::pair<Tokens, double>> top_sequences(const PolicyModel& m, std::span<const double> image,
                                                     std::size_t l) {
    std::vector<std::pair<Tokens, double>> all;
    for (auto& s : m.enumerate()) {
        const double lp = std::log(m.prob(image, s, std::numeric_limits<std::size_t>::max()).v);
        all.emplace_back(std::move(s), lp);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (all.size() > l) all.resize(l);
    return all;
}

}  // namespace oracle
