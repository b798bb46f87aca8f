#include "lenslab/lens.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "lenslab/checkpoint.hpp"
#include "lenslab/hash.hpp"
#include "lenslab/kernels.hpp"

namespace lenslab {

namespace {

// In-place row softmax; per-row arithmetic matches prob::softmax at
// temperature 1 so single-row and whole-matrix paths agree bit for bit.
void softmax_rows(Matrix& a) {
    const int n = a.rows, v = a.cols;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* ai = a.row(i);
        double mx = ai[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, ai[j]);
        double sum = 0.0;
        for (int j = 0; j < v; ++j) {
            const double e = std::exp(ai[j] - mx);
            ai[j] = e;
            sum += e;
        }
        for (int j = 0; j < v; ++j) ai[j] /= sum;
    }
}

void check_stack(const TransformerModel& m, const TranslatorStack& st) {
    if (st.num_layers != m.config.num_layers || st.d_model != m.config.d_model ||
        static_cast<int>(st.weight.size()) != st.num_layers ||
        static_cast<int>(st.bias.size()) != st.num_layers)
        throw std::invalid_argument("lens: translator stack does not match the model");
}

// The one lens forward path: (states * W_l + b_l) -> final norm ->
// unembedding -> row softmax. Every public query and the trainer go through
// here, so grid cells, single-cell queries, and training losses are mutually
// consistent. Intermediates are exposed for the backward pass.
void lens_forward_rows(const TransformerModel& m, const TranslatorStack& st, int layer,
                       const Matrix& states, Matrix& translated, Matrix& normed,
                       std::vector<double>& rms, Matrix& probs) {
    const Matrix& w = st.weight[layer - 1];
    const Matrix& b = st.bias[layer - 1];
    kernels::matmul(states, w, translated);
    const int n = translated.rows, d = translated.cols;
    const double* bp = b.row(0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* ti = translated.row(i);
        for (int j = 0; j < d; ++j) ti[j] += bp[j];
    }
    kernels::rmsnorm_rows(translated, m.final_norm_gain, normed, rms);
    kernels::matmul(normed, m.unembedding, probs);
    softmax_rows(probs);
}

Matrix layer_lens_probs(const TransformerModel& m, const TranslatorStack& st, int layer,
                        const Matrix& states) {
    Matrix translated, normed, probs;
    std::vector<double> rms;
    lens_forward_rows(m, st, layer, states, translated, normed, rms, probs);
    return probs;
}

// Shared loss/gradient core. With dw == nullptr only the loss is computed.
// The reported loss applies the kKlFloor/non-negativity contract of
// kl_divergence; gradients are those of the unfloored objective, which only
// differ where a probability sits below the floor.
double lens_loss_core(const TransformerModel& m, const TranslatorStack& st, int layer,
                      const Matrix& states, const Matrix& targets, bool reverse_kl, Matrix* dw,
                      Matrix* db) {
    check_stack(m, st);
    if (layer < 1 || layer > st.num_layers)
        throw std::invalid_argument("lens: layer out of range");
    const int bsz = states.rows, d = m.config.d_model, v = m.config.vocab_size;
    if (states.cols != d) throw std::invalid_argument("lens: state width mismatch");
    if (targets.rows != bsz || targets.cols != v)
        throw std::invalid_argument("lens: target shape mismatch");

    Matrix translated, normed, q;
    std::vector<double> rms;
    lens_forward_rows(m, st, layer, states, translated, normed, rms, q);

    std::vector<double> row_loss(bsz);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < bsz; ++i) {
        const double* pi = targets.row(i);
        const double* qi = q.row(i);
        row_loss[i] = reverse_kl ? kl_divergence(qi, pi, static_cast<size_t>(v))
                                 : kl_divergence(pi, qi, static_cast<size_t>(v));
    }
    double loss = 0.0;
    for (int i = 0; i < bsz; ++i) loss += row_loss[i] / bsz;
    if (dw == nullptr) return loss;

    if (dw->rows != d || dw->cols != d || db->rows != 1 || db->cols != d)
        throw std::invalid_argument("lens: gradient shape mismatch");

    // dL/dlogits, written over q. Forward direction: (q - p) / B per row.
    // Reverse direction: q_i (ln q_i - ln p_i - rowKL) / B.
#pragma omp parallel for schedule(static)
    for (int i = 0; i < bsz; ++i) {
        const double* pi = targets.row(i);
        double* qi = q.row(i);
        if (!reverse_kl) {
            for (int j = 0; j < v; ++j) qi[j] = (qi[j] - pi[j]) / bsz;
        } else {
            double row_kl = 0.0;
            for (int j = 0; j < v; ++j)
                row_kl += qi[j] * std::log(qi[j] / std::max(pi[j], kKlFloor));
            for (int j = 0; j < v; ++j)
                qi[j] = qi[j] * (std::log(qi[j] / std::max(pi[j], kKlFloor)) - row_kl) / bsz;
        }
    }

    Matrix dnormed;
    kernels::matmul_nt(q, m.unembedding, dnormed);
    Matrix dtrans(bsz, d);
    kernels::rmsnorm_backward_rows(translated, rms, m.final_norm_gain, dnormed, dtrans,
                                   nullptr);
    kernels::matmul_tn_acc(states, dtrans, *dw);
    double* dbp = db->row(0);
    for (int i = 0; i < bsz; ++i) {
        const double* ti = dtrans.row(i);
        for (int j = 0; j < d; ++j) dbp[j] += ti[j];
    }
    return loss;
}

} // namespace

TranslatorStack init_translators(const ModelConfig& config) {
    config.validate();
    TranslatorStack st;
    st.num_layers = config.num_layers;
    st.d_model = config.d_model;
    st.weight.reserve(st.num_layers);
    st.bias.reserve(st.num_layers);
    for (int l = 0; l < st.num_layers; ++l) {
        Matrix w(st.d_model, st.d_model);
        for (int i = 0; i < st.d_model; ++i) w(i, i) = 1.0;
        st.weight.push_back(std::move(w));
        st.bias.emplace_back(1, st.d_model);
    }
    return st;
}

TranslatorStack init_translators(const TransformerModel& model) {
    TranslatorStack st = init_translators(model.config);
    st.model_fp = model_fingerprint(model);
    return st;
}

uint64_t translator_fingerprint(const TranslatorStack& st) {
    uint64_t h = kFnvBasis;
    auto mix_i64 = [&h](int64_t v) { h = fnv1a64(&v, sizeof(v), h); };
    mix_i64(st.num_layers);
    mix_i64(st.d_model);
    for (int l = 1; l <= st.num_layers; ++l) {
        const std::string base = "translator_" + std::to_string(l);
        const Matrix& w = st.weight[l - 1];
        const Matrix& b = st.bias[l - 1];
        h = fnv1a64(base + ".weight", h);
        h = fnv1a64(w.data.data(), w.data.size() * sizeof(double), h);
        h = fnv1a64(base + ".bias", h);
        h = fnv1a64(b.data.data(), b.data.size() * sizeof(double), h);
    }
    return h;
}

uint64_t sequence_hash(const TokenSequence& seq) {
    uint64_t h = kFnvBasis;
    for (int id : seq.ids) {
        const int64_t v = id;
        h = fnv1a64(&v, sizeof(v), h);
    }
    return h;
}

std::span<const double> LensGrid::cell(int layer, int position) const {
    if (layer < 1 || layer > num_layers)
        throw std::invalid_argument("LensGrid::cell: layer out of range");
    if (position < 1 || position > num_positions)
        throw std::invalid_argument("LensGrid::cell: position out of range");
    const Matrix& p = probs[static_cast<size_t>(layer - 1)];
    return {p.row(position - 1), static_cast<size_t>(p.cols)};
}

ProbVector lens_distribution(const TransformerModel& m, const TranslatorStack& st,
                             const TokenSequence& seq, int layer, int position) {
    check_stack(m, st);
    if (layer < 1 || layer > m.config.num_layers)
        throw std::invalid_argument("lens_distribution: layer " + std::to_string(layer) +
                                    " out of range [1, " +
                                    std::to_string(m.config.num_layers) + "]");
    if (position < 1 || position > seq.size())
        throw std::invalid_argument("lens_distribution: position " + std::to_string(position) +
                                    " out of range [1, " + std::to_string(seq.size()) + "]");
    const HiddenStates hs = forward(m, seq);
    const Matrix probs = layer_lens_probs(m, st, layer, hs.states[layer]);
    ProbVector out;
    const double* row = probs.row(position - 1);
    out.probs.assign(row, row + probs.cols);
    return out;
}

LensGrid compute_lens_grid(const TransformerModel& m, const TranslatorStack& st,
                           const TokenSequence& seq) {
    check_stack(m, st);
    const HiddenStates hs = forward(m, seq);
    LensGrid g;
    g.num_layers = m.config.num_layers;
    g.num_positions = seq.size();
    g.probs.reserve(g.num_layers);
    for (int l = 1; l <= g.num_layers; ++l)
        g.probs.push_back(layer_lens_probs(m, st, l, hs.states[l]));
    g.model_fp = st.model_fp != 0 ? st.model_fp : model_fingerprint(m);
    g.translator_fp = translator_fingerprint(st);
    g.sequence_hash = lenslab::sequence_hash(seq);
    return g;
}

double lens_loss_and_grads(const TransformerModel& m, const TranslatorStack& st, int layer,
                           const Matrix& states, const Matrix& target_probs, bool reverse_kl,
                           Matrix& dw, Matrix& db) {
    return lens_loss_core(m, st, layer, states, target_probs, reverse_kl, &dw, &db);
}

double lens_mean_kl(const TransformerModel& m, const TranslatorStack& st, int layer,
                    const Matrix& states, const Matrix& target_probs, bool reverse_kl) {
    return lens_loss_core(m, st, layer, states, target_probs, reverse_kl, nullptr, nullptr);
}

LensTrainResult train_tuned_lens(const TransformerModel& m, TranslatorStack& stack,
                                 const std::vector<TokenSequence>& corpus,
                                 const LensTrainConfig& cfg) {
    check_stack(m, stack);
    if (cfg.steps < 0 || cfg.batch_positions < 1 || cfg.learning_rate <= 0.0 ||
        cfg.grad_clip <= 0.0 || cfg.warmup_steps < 0 || cfg.holdout_fraction < 0.0 ||
        cfg.holdout_fraction >= 1.0)
        throw std::invalid_argument("train_tuned_lens: bad training config");
    if (corpus.empty()) throw std::invalid_argument("train_tuned_lens: empty corpus");

    const int L = m.config.num_layers, d = m.config.d_model, v = m.config.vocab_size;

    // Tail split over sequences, the same convention as LM training.
    const size_t total = corpus.size();
    size_t n_hold = static_cast<size_t>(std::ceil(cfg.holdout_fraction * total));
    if (n_hold >= total) n_hold = total - 1;
    const size_t n_train = total - n_hold;

    size_t train_count = 0, hold_count = 0;
    for (size_t i = 0; i < total; ++i) {
        const size_t len = corpus[i].ids.size();
        (i < n_train ? train_count : hold_count) += len;
    }

    // One forward pass per sequence, cached as flat per-layer row blocks:
    // residual states for every layer and the final-layer distribution.
    std::vector<Matrix> st_train, st_hold;
    for (int l = 0; l < L; ++l) {
        st_train.emplace_back(static_cast<int>(train_count), d);
        st_hold.emplace_back(static_cast<int>(hold_count), d);
    }
    Matrix tgt_train(static_cast<int>(train_count), v);
    Matrix tgt_hold(static_cast<int>(hold_count), v);

    size_t train_row = 0, hold_row = 0;
    for (size_t i = 0; i < total; ++i) {
        const HiddenStates hs = forward(m, corpus[i]);
        const bool is_train = i < n_train;
        std::vector<Matrix>& dst = is_train ? st_train : st_hold;
        Matrix& tgt = is_train ? tgt_train : tgt_hold;
        size_t& row = is_train ? train_row : hold_row;
        const int n = static_cast<int>(corpus[i].ids.size());
        for (int pos = 0; pos < n; ++pos) {
            for (int l = 0; l < L; ++l) {
                const double* src = hs.states[l + 1].row(pos);
                std::copy(src, src + d, dst[l].row(static_cast<int>(row) + pos));
            }
            const double* lg = hs.logits.row(pos);
            std::copy(lg, lg + v, tgt.row(static_cast<int>(row) + pos));
        }
        row += static_cast<size_t>(n);
    }
    softmax_rows(tgt_train);
    if (hold_count > 0) softmax_rows(tgt_hold);

    const std::vector<Matrix>& st_eval = hold_count > 0 ? st_hold : st_train;
    const Matrix& tgt_eval = hold_count > 0 ? tgt_hold : tgt_train;

    LensTrainResult res;
    res.train_positions = static_cast<int>(train_count);
    res.holdout_positions = static_cast<int>(hold_count);
    res.loss_trace.assign(L, {});
    res.holdout_kl_before.resize(L);
    res.holdout_kl_after.resize(L);
    for (int l = 1; l <= L; ++l)
        res.holdout_kl_before[l - 1] =
            lens_mean_kl(m, stack, l, st_eval[l - 1], tgt_eval, cfg.reverse_kl);

    Matrix batch_states(cfg.batch_positions, d), batch_tgt(cfg.batch_positions, v);
    Matrix dw(d, d), db(1, d);
    // Every layer but the last; the final translator stays the identity.
    for (int l = 1; l <= L - 1; ++l) {
        Matrix& w = stack.weight[l - 1];
        Matrix& b = stack.bias[l - 1];
        Matrix mw(d, d), vw(d, d), mb(1, d), vb(1, d);
        SeededRng rng(SeededRng::derive(cfg.seed, static_cast<uint64_t>(l)));
        res.loss_trace[l - 1].reserve(cfg.steps);
        for (int step = 0; step < cfg.steps; ++step) {
            for (int bi = 0; bi < cfg.batch_positions; ++bi) {
                const size_t idx = rng.uniform_int(train_count);
                const double* src = st_train[l - 1].row(static_cast<int>(idx));
                std::copy(src, src + d, batch_states.row(bi));
                const double* ts = tgt_train.row(static_cast<int>(idx));
                std::copy(ts, ts + v, batch_tgt.row(bi));
            }
            dw.fill(0.0);
            db.fill(0.0);
            const double loss =
                lens_loss_and_grads(m, stack, l, batch_states, batch_tgt, cfg.reverse_kl, dw, db);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_tuned_lens: non-finite loss at layer " +
                                         std::to_string(l) + " step " + std::to_string(step + 1));
            res.loss_trace[l - 1].push_back(loss);

            double sq = 0.0;
            for (double g : dw.data) sq += g * g;
            for (double g : db.data) sq += g * g;
            const double gnorm = std::sqrt(sq);
            const double gscale = gnorm > cfg.grad_clip ? cfg.grad_clip / gnorm : 1.0;

            const int t = step + 1;
            const double lr =
                cfg.learning_rate *
                (cfg.warmup_steps > 0 ? std::min(1.0, static_cast<double>(t) / cfg.warmup_steps)
                                      : 1.0);
            const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
            const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
            auto adam_update = [&](Matrix& p, const Matrix& g, Matrix& m1, Matrix& m2) {
                for (size_t i = 0; i < p.data.size(); ++i) {
                    const double gi = g.data[i] * gscale;
                    m1.data[i] = cfg.adam_beta1 * m1.data[i] + (1.0 - cfg.adam_beta1) * gi;
                    m2.data[i] = cfg.adam_beta2 * m2.data[i] + (1.0 - cfg.adam_beta2) * gi * gi;
                    p.data[i] -= lr * (m1.data[i] / bc1) / (std::sqrt(m2.data[i] / bc2) + cfg.adam_eps);
                }
            };
            adam_update(w, dw, mw, vw);
            adam_update(b, db, mb, vb);
        }
        if (!w.all_finite() || !b.all_finite())
            throw std::runtime_error("train_tuned_lens: non-finite translator at layer " +
                                     std::to_string(l) + " after training");
    }

    for (int l = 1; l <= L; ++l)
        res.holdout_kl_after[l - 1] =
            lens_mean_kl(m, stack, l, st_eval[l - 1], tgt_eval, cfg.reverse_kl);
    return res;
}

void save_translators(const std::string& path, const TranslatorStack& st) {
    if (st.num_layers <= 0 || static_cast<int>(st.weight.size()) != st.num_layers ||
        static_cast<int>(st.bias.size()) != st.num_layers)
        throw std::invalid_argument("save_translators: malformed stack");
    if (st.model_fp == 0)
        throw std::runtime_error(
            "save_translators: stack has no recorded model fingerprint; build it from a model "
            "before saving");
    ckpt::Container c;
    c.kind = "translators";
    c.meta["num_layers"] = st.num_layers;
    c.meta["d_model"] = st.d_model;
    c.meta["model_fingerprint"] = fingerprint_hex(st.model_fp);
    c.meta["fingerprint"] = fingerprint_hex(translator_fingerprint(st));
    for (int l = 1; l <= st.num_layers; ++l) {
        const std::string base = "translator_" + std::to_string(l);
        ckpt::TensorRecord wrec;
        wrec.name = base + ".weight";
        wrec.rows = st.weight[l - 1].rows;
        wrec.cols = st.weight[l - 1].cols;
        wrec.data = st.weight[l - 1].data;
        c.tensors.push_back(std::move(wrec));
        ckpt::TensorRecord brec;
        brec.name = base + ".bias";
        brec.rows = st.bias[l - 1].rows;
        brec.cols = st.bias[l - 1].cols;
        brec.data = st.bias[l - 1].data;
        c.tensors.push_back(std::move(brec));
    }
    ckpt::save(path, c);
}

TranslatorStack load_translators(const std::string& path, const TransformerModel& model) {
    const ckpt::Container c = ckpt::load(path, "translators");
    int num_layers = 0, d_model = 0;
    std::string stored_model_fp, stored_fp;
    try {
        num_layers = c.meta.at("num_layers").get<int>();
        d_model = c.meta.at("d_model").get<int>();
        stored_model_fp = c.meta.at("model_fingerprint").get<std::string>();
        stored_fp = c.meta.at("fingerprint").get<std::string>();
    } catch (const std::exception& e) {
        throw std::runtime_error("checkpoint: bad translator header in " + path + ": " + e.what());
    }
    if (num_layers != model.config.num_layers || d_model != model.config.d_model)
        throw std::runtime_error("checkpoint: translators in " + path + " are shaped for " +
                                 std::to_string(num_layers) + " layers x d_model " +
                                 std::to_string(d_model) + ", model has " +
                                 std::to_string(model.config.num_layers) + " x " +
                                 std::to_string(model.config.d_model));
    const uint64_t model_fp = model_fingerprint(model);
    if (stored_model_fp != fingerprint_hex(model_fp))
        throw std::runtime_error("checkpoint: translator fingerprint mismatch in " + path +
                                 ": built for model " + stored_model_fp +
                                 ", supplied model is " + fingerprint_hex(model_fp));

    TranslatorStack st;
    st.num_layers = num_layers;
    st.d_model = d_model;
    st.model_fp = model_fp;
    st.weight.reserve(num_layers);
    st.bias.reserve(num_layers);
    for (int l = 1; l <= num_layers; ++l) {
        const std::string base = "translator_" + std::to_string(l);
        const ckpt::TensorRecord& wrec = c.tensor(base + ".weight");
        const ckpt::TensorRecord& brec = c.tensor(base + ".bias");
        if (wrec.rows != d_model || wrec.cols != d_model || brec.rows != 1 ||
            brec.cols != d_model)
            throw std::runtime_error("checkpoint: tensor shapes for " + base + " in " + path +
                                     " do not match d_model " + std::to_string(d_model));
        Matrix w(d_model, d_model);
        w.data = wrec.data;
        Matrix b(1, d_model);
        b.data = brec.data;
        st.weight.push_back(std::move(w));
        st.bias.push_back(std::move(b));
    }
    if (stored_fp != fingerprint_hex(translator_fingerprint(st)))
        throw std::runtime_error("checkpoint: translator fingerprint mismatch in " + path +
                                 ": parameters do not hash to the stored value");
    return st;
}

} // namespace lenslab
