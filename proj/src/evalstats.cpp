#include "cmcsl/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cmcsl {

double balanced_accuracy(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
    if (y_true.empty()) throw InvalidArgument("balanced_accuracy: empty input");
    if (y_true.size() != y_pred.size())
        throw InvalidArgument("balanced_accuracy: length mismatch");
    std::vector<double> support(static_cast<std::size_t>(n_classes), 0.0);
    std::vector<double> hits(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        if (t < 0 || t >= n_classes)
            throw InvalidArgument("balanced_accuracy: true label out of range");
        support[static_cast<std::size_t>(t)] += 1.0;
        if (y_pred[i] == t) hits[static_cast<std::size_t>(t)] += 1.0;
    }
    double acc = 0.0;
    int present = 0;
    for (int k = 0; k < n_classes; ++k) {
        if (support[static_cast<std::size_t>(k)] == 0.0) continue;
        acc += hits[static_cast<std::size_t>(k)] / support[static_cast<std::size_t>(k)];
        ++present;
    }
    return acc / present;
}

// --- incomplete beta / F distribution ---

namespace {

// Lentz continued fraction for the incomplete beta (Numerical Recipes form).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;  // symmetry for faster convergence
}

double f_distribution_cdf(double x, double d1, double d2) {
    if (x <= 0.0) return 0.0;
    // Upper-tail form keeps precision for large x.
    return 1.0 - regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

TestOutcome combined_5x2cv_f_test(const ScorePair5x2& pair, double alpha) {
    double sum_sq = 0.0;
    double sum_var = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double p1 = pair.a[static_cast<std::size_t>(i)][0] - pair.b[static_cast<std::size_t>(i)][0];
        const double p2 = pair.a[static_cast<std::size_t>(i)][1] - pair.b[static_cast<std::size_t>(i)][1];
        const double mean = 0.5 * (p1 + p2);
        sum_sq += p1 * p1 + p2 * p2;
        sum_var += (p1 - mean) * (p1 - mean) + (p2 - mean) * (p2 - mean);
    }

    TestOutcome out;
    if (sum_var == 0.0) {
        // Degenerate: no within-repeat variance. Identical methods are not
        // significant; any nonzero difference with zero variance is.
        if (sum_sq == 0.0) {
            out.statistic = 0.0;
            out.p_value = 1.0;
        } else {
            out.statistic = std::numeric_limits<double>::infinity();
            out.p_value = 0.0;
        }
    } else {
        out.statistic = sum_sq / (2.0 * sum_var);
        out.p_value = 1.0 - f_distribution_cdf(out.statistic, 10.0, 5.0);
    }
    out.significant = out.p_value < alpha;
    return out;
}

TestOutcome wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                 double alpha) {
    if (x.size() != y.size() || x.empty())
        throw InvalidArgument("wilcoxon_signed_rank: need equal nonempty vectors");

    std::vector<double> diffs;
    diffs.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (d != 0.0) diffs.push_back(d);
    }
    TestOutcome out;
    if (diffs.empty()) {
        out.statistic = 0.0;
        out.p_value = 1.0;
        out.significant = false;
        return out;
    }

    const std::size_t m = diffs.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(diffs[a]) < std::fabs(diffs[b]);
    });
    // Average ranks within tie groups of |d|.
    std::vector<double> ranks(m, 0.0);
    std::size_t i = 0;
    while (i < m) {
        std::size_t j = i;
        while (j + 1 < m && std::fabs(diffs[order[j + 1]]) == std::fabs(diffs[order[i]])) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }

    double w_plus = 0.0;
    double w_minus = 0.0;
    for (std::size_t k = 0; k < m; ++k) (diffs[k] > 0.0 ? w_plus : w_minus) += ranks[k];
    const double w = std::min(w_plus, w_minus);
    out.statistic = w;

    if (m <= 20) {
        // Exact: enumerate all 2^m sign assignments of the observed ranks and
        // count those with a positive-rank sum at or below w (two-sided by
        // doubling, capped at 1).
        const std::uint64_t total = 1ULL << m;
        std::uint64_t at_or_below = 0;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            double t = 0.0;
            for (std::size_t k = 0; k < m; ++k)
                if (mask & (1ULL << k)) t += ranks[k];
            if (t <= w + 1e-12) ++at_or_below;
        }
        out.p_value = std::min(1.0, 2.0 * static_cast<double>(at_or_below) / static_cast<double>(total));
    } else {
        const double md = static_cast<double>(m);
        const double mean = md * (md + 1.0) / 4.0;
        double var = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0;
        // Tie correction over groups of equal |d|.
        i = 0;
        while (i < m) {
            std::size_t j = i;
            while (j + 1 < m && std::fabs(diffs[order[j + 1]]) == std::fabs(diffs[order[i]])) ++j;
            const double t = static_cast<double>(j - i + 1);
            var -= t * (t * t - 1.0) / 48.0;
            i = j + 1;
        }
        const double z = (w - mean + 0.5) / std::sqrt(var);  // w <= mean by construction
        out.p_value = std::min(1.0, 2.0 * normal_cdf(z));
    }
    out.significant = out.p_value < alpha;
    return out;
}

std::vector<double> mean_ranks(const Matrix& scores) {
    const Eigen::Index methods = scores.rows();
    const Eigen::Index datasets = scores.cols();
    if (methods == 0 || datasets == 0) throw InvalidArgument("mean_ranks: empty score table");
    std::vector<double> sums(static_cast<std::size_t>(methods), 0.0);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(methods));
    for (Eigen::Index d = 0; d < datasets; ++d) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](Eigen::Index a, Eigen::Index b) { return scores(a, d) < scores(b, d); });
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j + 1 < order.size() && scores(order[j + 1], d) == scores(order[i], d)) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) sums[static_cast<std::size_t>(order[k])] += avg;
            i = j + 1;
        }
    }
    for (double& s : sums) s /= static_cast<double>(datasets);
    return sums;
}

}  // namespace cmcsl
