#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lenslab/prob.hpp"
#include "lenslab/rng.hpp"
#include "lenslab/tensor.hpp"
#include "lenslab/text.hpp"

namespace lenslab {

struct ModelConfig {
    int num_layers = 8;
    int num_heads = 4;
    int d_model = 64;
    int d_ff = 128;
    int vocab_size = 512;
    int max_seq_len = 128;
    uint64_t init_seed = 0;

    // Throws std::invalid_argument unless d_model % num_heads == 0, every
    // count is >= 1, and max_seq_len >= 16.
    void validate() const;
    int64_t param_count() const;
    bool operator==(const ModelConfig&) const = default;
};

struct LayerParams {
    std::vector<double> norm1_gain;  // d
    Matrix wq, wk, wv, wo;           // d x d, no biases
    std::vector<double> norm2_gain;  // d
    Matrix w1;                       // d x d_ff
    Matrix w2;                       // d_ff x d
};

// Pre-norm decoder-only transformer: learned absolute position embeddings,
// causal multi-head attention, SiLU two-matrix MLP, untied unembedding.
struct TransformerModel {
    ModelConfig config;
    Matrix token_embedding;  // vocab x d
    Matrix pos_embedding;    // max_seq_len x d
    std::vector<LayerParams> layers;
    std::vector<double> final_norm_gain;  // d
    Matrix unembedding;                   // d x vocab
};

// Everything a probe needs from one forward pass: the residual stream after
// the embedding (states[0]) and after each block (states[l], l = 1..L), plus
// the final logits, which are exactly final_norm(states[L]) * unembedding.
struct HiddenStates {
    std::vector<Matrix> states;  // L+1 matrices, each n x d
    Matrix logits;               // n x vocab
};

// Named view of one parameter tensor; gain vectors appear as 1 x d. The
// enumeration order is fixed and shared by init, Adam, checkpoints, and the
// fingerprint.
struct TensorView {
    std::string name;
    double* data;
    int rows = 0;
    int cols = 0;
};
struct ConstTensorView {
    std::string name;
    const double* data;
    int rows = 0;
    int cols = 0;
};
std::vector<TensorView> tensor_views(TransformerModel& m);
std::vector<ConstTensorView> tensor_views(const TransformerModel& m);

// Deterministic seeded init: same config => bit-identical parameters.
TransformerModel init_model(const ModelConfig& config);

// Zero-valued parameter set with the same shapes; used as a gradient and
// Adam-moment container.
TransformerModel zeros_like_model(const ModelConfig& config);

// Full causal forward pass. Throws std::invalid_argument on an empty
// sequence, a sequence longer than max_seq_len, or an id outside the vocab.
HiddenStates forward(const TransformerModel& m, const TokenSequence& seq);

// Mean cross-entropy of next-token prediction, pooled over every predicted
// position of every sequence (positions 0..n-2 predict ids[1..n-1]).
double lm_cross_entropy(const TransformerModel& m, const std::vector<TokenSequence>& seqs);

// Per-sequence mean CE; accumulates d(loss * scale)/d(params) into grads.
// Sequences of length < 2 contribute nothing and return 0.
double lm_loss_and_grads(const TransformerModel& m, const TokenSequence& seq,
                         TransformerModel& grads, double scale);

struct TrainConfig {
    int steps = 1200;
    int batch_size = 8;
    double learning_rate = 1.5e-3;
    int warmup_steps = 40;
    // After warmup the learning rate follows a cosine decay down to
    // learning_rate * final_lr_fraction at the last step.
    double final_lr_fraction = 0.1;
    double grad_clip = 1.0;
    double holdout_fraction = 0.1;  // taken from the tail of the corpus
    uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.95;
    double adam_eps = 1e-9;
};

struct TrainResult {
    std::vector<double> loss_trace;  // one batch-mean loss per step
    double holdout_ce_before = 0.0;
    double holdout_ce_after = 0.0;
    int train_sequences = 0;
    int holdout_sequences = 0;
};

// Adam with linear LR warmup, post-warmup cosine decay, and global-norm
// gradient clipping. Batches are drawn with replacement from the training
// split; the batch loss is the mean of per-sequence mean CEs. steps == 0
// leaves the model untouched. Throws std::runtime_error naming the step if a
// loss or update turns non-finite.
TrainResult train_lm(TransformerModel& m, const std::vector<TokenSequence>& corpus,
                     const TrainConfig& tc);

// Greedy or sampled continuation. Output begins with the prefix; generation
// stops after max_new_tokens, at an emitted end-of-sequence token (which is
// kept), or when the context window is full, whichever comes first.
TokenSequence generate(const TransformerModel& m, const TokenSequence& prefix,
                       int max_new_tokens, SampleStrategy strategy, SeededRng& rng);

// Order- and content-sensitive digest of config plus every parameter byte.
uint64_t model_fingerprint(const TransformerModel& m);

void save_model(const TransformerModel& m, const std::string& path);
// Throws std::runtime_error on container problems (bad magic/version/kind,
// shape mismatch) with a message naming what disagreed.
TransformerModel load_model(const std::string& path);

} // namespace lenslab
