#include "lenslab/prob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lenslab {

void ProbVector::validate(size_t expected_size) const {
    if (probs.empty()) throw std::invalid_argument("ProbVector: empty");
    if (expected_size != 0 && probs.size() != expected_size)
        throw std::invalid_argument("ProbVector: length does not match vocabulary size");
    double sum = 0.0;
    for (double v : probs) {
        if (!(v >= 0.0)) throw std::invalid_argument("ProbVector: negative or NaN entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kProbSumTol)
        throw std::invalid_argument("ProbVector: entries do not sum to 1");
}

ProbVector softmax(const std::vector<double>& logits, double temperature) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be > 0");
    for (double v : logits)
        if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite logit");

    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);

    ProbVector out;
    out.probs.resize(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        const double e = std::exp((logits[i] - mx) / temperature);
        out.probs[i] = e;
        sum += e;
    }
    for (double& v : out.probs) v /= sum;
    return out;
}

double kl_divergence(const double* p, const double* q, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double pi = p[i];
        if (pi <= 0.0) continue;
        acc += pi * std::log(pi / std::max(q[i], kKlFloor));
    }
    return std::max(acc, 0.0);
}

double kl_divergence(const ProbVector& p, const ProbVector& q) {
    if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
    return kl_divergence(p.probs.data(), q.probs.data(), p.size());
}

size_t argmax_index(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("argmax_index: empty");
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

size_t sample_token(const ProbVector& p, SampleStrategy strategy, SeededRng& rng) {
    p.validate();
    if (strategy == SampleStrategy::Argmax) return argmax_index(p.probs);
    const double u = rng.uniform();
    double cum = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        cum += p.probs[i];
        if (u < cum) return i;
    }
    // Rounding can leave cum slightly below 1; fall back to the last
    // positive-mass index.
    for (size_t i = p.size(); i-- > 0;)
        if (p.probs[i] > 0.0) return i;
    return p.size() - 1;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman_rank_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("spearman: need at least 2 points");
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    const size_t n = x.size();
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("spearman: constant input has no defined correlation");
    return sxy / std::sqrt(sxx * syy);
}

} // namespace lenslab
