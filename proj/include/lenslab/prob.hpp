#pragma once

#include <cstddef>
#include <vector>

#include "lenslab/rng.hpp"

namespace lenslab {

// Probability mass over a vocabulary. Entries are nonnegative and sum to 1
// within kProbSumTol.
struct ProbVector {
    std::vector<double> probs;

    size_t size() const { return probs.size(); }
    double operator[](size_t i) const { return probs[i]; }

    // Throws std::invalid_argument when the invariants fail. expected_size 0
    // skips the length check.
    void validate(size_t expected_size = 0) const;
};

inline constexpr double kProbSumTol = 1e-6;

// Divisor floor applied to q so the divergence stays finite everywhere.
inline constexpr double kKlFloor = 1e-12;

enum class SampleStrategy { Argmax, Categorical };

// Numerically stable softmax (max-subtracted). temperature must be > 0 and
// logits finite and non-empty; output order matches input order.
ProbVector softmax(const std::vector<double>& logits, double temperature = 1.0);

// KL(p || q) with q floored at kKlFloor. Requires equal lengths.
double kl_divergence(const ProbVector& p, const ProbVector& q);
// Same divergence over raw arrays of length n.
double kl_divergence(const double* p, const double* q, size_t n);

// Lowest index attaining the maximum.
size_t argmax_index(const std::vector<double>& v);

// Argmax returns the lowest-index maximal entry; Categorical draws index i
// with probability p[i] using one uniform draw from rng.
size_t sample_token(const ProbVector& p, SampleStrategy strategy, SeededRng& rng);

// Spearman rank correlation with average ranks on ties. Requires equal
// lengths >= 2.
double spearman_rank_correlation(const std::vector<double>& x, const std::vector<double>& y);

} // namespace lenslab
