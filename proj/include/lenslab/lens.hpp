#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lenslab/model.hpp"
#include "lenslab/prob.hpp"
#include "lenslab/tensor.hpp"
#include "lenslab/text.hpp"

namespace lenslab {

// Per-layer affine probe applied to the residual stream: y = x * W + b with
// row-vector states. The final layer's translator stays the identity map and
// is never trained, so the lens at layer L reproduces the model's own output
// distribution by construction.
struct TranslatorStack {
    int num_layers = 0;
    int d_model = 0;
    // Fingerprint of the model this stack probes; 0 when the stack was built
    // from a bare config. Checkpoints refuse to load against a different
    // model.
    uint64_t model_fp = 0;
    std::vector<Matrix> weight;  // one d x d matrix per layer, index l-1
    std::vector<Matrix> bias;    // one 1 x d row per layer, index l-1
};

// Identity weights, zero biases. The model overload also records the model
// fingerprint for provenance and checkpoint checks.
TranslatorStack init_translators(const ModelConfig& config);
TranslatorStack init_translators(const TransformerModel& model);

// Digest of the stack's shape and every translator parameter byte.
uint64_t translator_fingerprint(const TranslatorStack& stack);

// Order-sensitive digest of a token sequence.
uint64_t sequence_hash(const TokenSequence& seq);

// Full (layer x position) array of lens token distributions for one sequence,
// with provenance identifying the model, translators, and sequence.
struct LensGrid {
    int num_layers = 0;
    int num_positions = 0;
    std::vector<Matrix> probs;  // probs[l-1] is n x vocab; row x-1 sums to 1
    uint64_t model_fp = 0;
    uint64_t translator_fp = 0;
    uint64_t sequence_hash = 0;

    // 1-based layer in [1, num_layers] and position in [1, num_positions].
    std::span<const double> cell(int layer, int position) const;
};

// softmax(unembedding(final_norm(translator_l(state at layer l, position x)))).
// layer and position are 1-based; out-of-range values raise
// std::invalid_argument. Bitwise consistent with compute_lens_grid.
ProbVector lens_distribution(const TransformerModel& m, const TranslatorStack& stack,
                             const TokenSequence& seq, int layer, int position);

LensGrid compute_lens_grid(const TransformerModel& m, const TranslatorStack& stack,
                           const TokenSequence& seq);

struct LensTrainConfig {
    int steps = 600;  // Adam steps per trained layer
    int batch_positions = 256;
    double learning_rate = 1e-3;
    int warmup_steps = 20;
    double grad_clip = 1.0;
    double holdout_fraction = 0.1;  // sequences taken from the tail of the corpus
    uint64_t seed = 2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.95;
    double adam_eps = 1e-9;
    // false (default): minimize KL(final || lens), the final-layer
    // distribution being the target. true flips the direction.
    bool reverse_kl = false;
};

struct LensTrainResult {
    // loss_trace[l-1][step]; the final layer is frozen so its trace is empty.
    std::vector<std::vector<double>> loss_trace;
    // Mean held-out KL per layer (index l-1), before the first step and after
    // the last. The direction matches LensTrainConfig::reverse_kl.
    std::vector<double> holdout_kl_before;
    std::vector<double> holdout_kl_after;
    int train_positions = 0;
    int holdout_positions = 0;
};

// Trains every non-final layer's translator independently against the frozen
// model with Adam on mini-batches of corpus positions. steps == 0 leaves the
// stack untouched. Throws std::runtime_error naming the layer and step when a
// batch loss turns non-finite, and std::invalid_argument on bad config or an
// unusable corpus.
LensTrainResult train_tuned_lens(const TransformerModel& m, TranslatorStack& stack,
                                 const std::vector<TokenSequence>& corpus,
                                 const LensTrainConfig& cfg);

// Mean divergence over the batch rows for one layer's translator, with
// gradients accumulated into dw (d x d) and db (1 x d). states holds one
// residual-stream row per batch item at that layer; target_probs the
// corresponding final-layer distributions. Exposed so tests can
// finite-difference the trainer's exact objective.
double lens_loss_and_grads(const TransformerModel& m, const TranslatorStack& stack, int layer,
                           const Matrix& states, const Matrix& target_probs, bool reverse_kl,
                           Matrix& dw, Matrix& db);

// Loss-only variant of lens_loss_and_grads.
double lens_mean_kl(const TransformerModel& m, const TranslatorStack& stack, int layer,
                    const Matrix& states, const Matrix& target_probs, bool reverse_kl);

// Translator checkpoints carry the probed model's fingerprint; loading
// verifies it against the supplied model and throws std::runtime_error on any
// mismatch. Saving a stack with no recorded fingerprint is refused.
void save_translators(const std::string& path, const TranslatorStack& stack);
TranslatorStack load_translators(const std::string& path, const TransformerModel& model);

} // namespace lenslab
