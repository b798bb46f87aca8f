#include "lenslab/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "lenslab/checkpoint.hpp"
#include "lenslab/hash.hpp"
#include "lenslab/kernels.hpp"

namespace lenslab {

namespace {

constexpr double kEmbedInitStd = 0.02;

inline double sigmoid(double h) { return 1.0 / (1.0 + std::exp(-h)); }
inline double silu(double h) { return h * sigmoid(h); }
inline double silu_grad(double h) {
    const double s = sigmoid(h);
    return s * (1.0 + h * (1.0 - s));
}

struct LayerCache {
    std::vector<double> rms1, rms2;
    Matrix n1;                // n x d, post norm1
    Matrix q, k, v;           // n x d
    std::vector<Matrix> att;  // per head, n x n causal rows
    Matrix ctx;               // n x d
    Matrix x_mid;             // n x d, after attention residual
    Matrix n2;                // n x d, post norm2
    Matrix h1;                // n x d_ff, pre-activation
    Matrix a1;                // n x d_ff, post SiLU
};

struct ForwardCache {
    std::vector<Matrix> states;  // L+1 residual-stream snapshots, n x d
    std::vector<LayerCache> layers;
    std::vector<double> rms_f;
    Matrix nf;      // n x d, post final norm
    Matrix logits;  // n x vocab
};

void validate_sequence(const ModelConfig& cfg, const TokenSequence& seq) {
    const int n = static_cast<int>(seq.ids.size());
    if (n == 0) throw std::invalid_argument("forward: empty sequence");
    if (n > cfg.max_seq_len)
        throw std::invalid_argument("forward: sequence length " + std::to_string(n) +
                                    " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    for (int i = 0; i < n; ++i)
        if (seq.ids[i] < 0 || seq.ids[i] >= cfg.vocab_size)
            throw std::invalid_argument("forward: token id " + std::to_string(seq.ids[i]) +
                                        " at position " + std::to_string(i) +
                                        " is outside the vocab");
}

void forward_cached(const TransformerModel& m, const TokenSequence& seq, ForwardCache& fc) {
    const ModelConfig& cfg = m.config;
    validate_sequence(cfg, seq);
    const int n = static_cast<int>(seq.ids.size());
    const int d = cfg.d_model, heads = cfg.num_heads, hd = d / heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));

    fc.states.assign(cfg.num_layers + 1, Matrix(n, d));
    fc.layers.assign(cfg.num_layers, LayerCache{});

    Matrix& x0 = fc.states[0];
    for (int i = 0; i < n; ++i) {
        const double* te = m.token_embedding.row(seq.ids[i]);
        const double* pe = m.pos_embedding.row(i);
        double* xi = x0.row(i);
        for (int j = 0; j < d; ++j) xi[j] = te[j] + pe[j];
    }

    for (int l = 0; l < cfg.num_layers; ++l) {
        const LayerParams& lp = m.layers[l];
        LayerCache& lc = fc.layers[l];
        const Matrix& x_in = fc.states[l];

        kernels::rmsnorm_rows(x_in, lp.norm1_gain, lc.n1, lc.rms1);
        kernels::matmul(lc.n1, lp.wq, lc.q);
        kernels::matmul(lc.n1, lp.wk, lc.k);
        kernels::matmul(lc.n1, lp.wv, lc.v);

        lc.att.assign(heads, Matrix(n, n));
        lc.ctx = Matrix(n, d);
        for (int h = 0; h < heads; ++h) {
            const int off = h * hd;
            Matrix& p = lc.att[h];
#pragma omp parallel for schedule(static)
            for (int i = 0; i < n; ++i) {
                double* pi = p.row(i);
                double mx = -HUGE_VAL;
                const double* qi = lc.q.row(i) + off;
                for (int j = 0; j <= i; ++j) {
                    const double s = kernels::dot(qi, lc.k.row(j) + off, hd) * att_scale;
                    pi[j] = s;
                    if (s > mx) mx = s;
                }
                double z = 0.0;
                for (int j = 0; j <= i; ++j) {
                    pi[j] = std::exp(pi[j] - mx);
                    z += pi[j];
                }
                double* ci = lc.ctx.row(i) + off;
                for (int c = 0; c < hd; ++c) ci[c] = 0.0;
                for (int j = 0; j <= i; ++j) {
                    pi[j] /= z;
                    const double* vj = lc.v.row(j) + off;
                    for (int c = 0; c < hd; ++c) ci[c] += pi[j] * vj[c];
                }
            }
        }

        Matrix attn_out;
        kernels::matmul(lc.ctx, lp.wo, attn_out);
        lc.x_mid = Matrix(n, d);
        for (size_t idx = 0; idx < lc.x_mid.data.size(); ++idx)
            lc.x_mid.data[idx] = x_in.data[idx] + attn_out.data[idx];

        kernels::rmsnorm_rows(lc.x_mid, lp.norm2_gain, lc.n2, lc.rms2);
        kernels::matmul(lc.n2, lp.w1, lc.h1);
        lc.a1 = Matrix(n, cfg.d_ff);
        for (size_t idx = 0; idx < lc.a1.data.size(); ++idx) lc.a1.data[idx] = silu(lc.h1.data[idx]);
        Matrix mlp_out;
        kernels::matmul(lc.a1, lp.w2, mlp_out);

        Matrix& x_out = fc.states[l + 1];
        for (size_t idx = 0; idx < x_out.data.size(); ++idx)
            x_out.data[idx] = lc.x_mid.data[idx] + mlp_out.data[idx];
    }

    kernels::rmsnorm_rows(fc.states[cfg.num_layers], m.final_norm_gain, fc.nf, fc.rms_f);
    kernels::matmul(fc.nf, m.unembedding, fc.logits);
}

double row_logsumexp(const double* row, int n) {
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    return mx + std::log(z);
}

template <typename ViewT, typename ModelT>
std::vector<ViewT> views_impl(ModelT& m) {
    std::vector<ViewT> out;
    auto add_mat = [&](const std::string& name, auto& mat) {
        out.push_back(ViewT{name, mat.data.data(), mat.rows, mat.cols});
    };
    auto add_vec = [&](const std::string& name, auto& vec) {
        out.push_back(ViewT{name, vec.data(), 1, static_cast<int>(vec.size())});
    };
    add_mat("token_embedding", m.token_embedding);
    add_mat("pos_embedding", m.pos_embedding);
    for (size_t l = 0; l < m.layers.size(); ++l) {
        const std::string base = "layers." + std::to_string(l) + ".";
        auto& lp = m.layers[l];
        add_vec(base + "norm1_gain", lp.norm1_gain);
        add_mat(base + "wq", lp.wq);
        add_mat(base + "wk", lp.wk);
        add_mat(base + "wv", lp.wv);
        add_mat(base + "wo", lp.wo);
        add_vec(base + "norm2_gain", lp.norm2_gain);
        add_mat(base + "w1", lp.w1);
        add_mat(base + "w2", lp.w2);
    }
    add_vec("final_norm_gain", m.final_norm_gain);
    add_mat("unembedding", m.unembedding);
    return out;
}

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
    return {{"num_layers", c.num_layers},   {"num_heads", c.num_heads},
            {"d_model", c.d_model},         {"d_ff", c.d_ff},
            {"vocab_size", c.vocab_size},   {"max_seq_len", c.max_seq_len},
            {"init_seed", c.init_seed}};
}

ModelConfig config_from_json(const nlohmann::ordered_json& j) {
    ModelConfig c;
    c.num_layers = j.at("num_layers").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.init_seed = j.at("init_seed").get<uint64_t>();
    return c;
}

} // namespace

void ModelConfig::validate() const {
    if (num_layers < 1 || num_heads < 1 || d_model < 1 || d_ff < 1 || vocab_size < 1)
        throw std::invalid_argument("ModelConfig: all counts must be >= 1");
    if (d_model % num_heads != 0)
        throw std::invalid_argument("ModelConfig: d_model must be divisible by num_heads");
    if (max_seq_len < 16) throw std::invalid_argument("ModelConfig: max_seq_len must be >= 16");
}

int64_t ModelConfig::param_count() const {
    const int64_t d = d_model, ff = d_ff, v = vocab_size, s = max_seq_len;
    const int64_t per_layer = 4 * d * d + 2 * d * ff + 2 * d;
    return v * d + s * d + num_layers * per_layer + d + d * v;
}

std::vector<TensorView> tensor_views(TransformerModel& m) {
    return views_impl<TensorView>(m);
}

std::vector<ConstTensorView> tensor_views(const TransformerModel& m) {
    return views_impl<ConstTensorView>(m);
}

TransformerModel zeros_like_model(const ModelConfig& config) {
    config.validate();
    TransformerModel m;
    m.config = config;
    m.token_embedding = Matrix(config.vocab_size, config.d_model);
    m.pos_embedding = Matrix(config.max_seq_len, config.d_model);
    m.layers.resize(config.num_layers);
    for (auto& lp : m.layers) {
        lp.norm1_gain.assign(config.d_model, 0.0);
        lp.wq = Matrix(config.d_model, config.d_model);
        lp.wk = Matrix(config.d_model, config.d_model);
        lp.wv = Matrix(config.d_model, config.d_model);
        lp.wo = Matrix(config.d_model, config.d_model);
        lp.norm2_gain.assign(config.d_model, 0.0);
        lp.w1 = Matrix(config.d_model, config.d_ff);
        lp.w2 = Matrix(config.d_ff, config.d_model);
    }
    m.final_norm_gain.assign(config.d_model, 0.0);
    m.unembedding = Matrix(config.d_model, config.vocab_size);
    return m;
}

TransformerModel init_model(const ModelConfig& config) {
    TransformerModel m = zeros_like_model(config);
    SeededRng rng(config.init_seed);
    // Residual-branch outputs are damped with depth so the stream stays
    // well-scaled at init.
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(config.d_model));
    const double ff_std = 1.0 / std::sqrt(static_cast<double>(config.d_ff));
    const double resid = 1.0 / std::sqrt(2.0 * config.num_layers);
    fill_normal(m.token_embedding, rng, kEmbedInitStd);
    fill_normal(m.pos_embedding, rng, kEmbedInitStd);
    for (auto& lp : m.layers) {
        std::fill(lp.norm1_gain.begin(), lp.norm1_gain.end(), 1.0);
        fill_normal(lp.wq, rng, proj_std);
        fill_normal(lp.wk, rng, proj_std);
        fill_normal(lp.wv, rng, proj_std);
        fill_normal(lp.wo, rng, proj_std * resid);
        std::fill(lp.norm2_gain.begin(), lp.norm2_gain.end(), 1.0);
        fill_normal(lp.w1, rng, proj_std);
        fill_normal(lp.w2, rng, ff_std * resid);
    }
    std::fill(m.final_norm_gain.begin(), m.final_norm_gain.end(), 1.0);
    fill_normal(m.unembedding, rng, kEmbedInitStd);
    return m;
}

HiddenStates forward(const TransformerModel& m, const TokenSequence& seq) {
    ForwardCache fc;
    forward_cached(m, seq, fc);
    HiddenStates hs;
    hs.states = std::move(fc.states);
    hs.logits = std::move(fc.logits);
    return hs;
}

double lm_cross_entropy(const TransformerModel& m, const std::vector<TokenSequence>& seqs) {
    double total = 0.0;
    int64_t count = 0;
    ForwardCache fc;
    for (const auto& seq : seqs) {
        const int n = static_cast<int>(seq.ids.size());
        if (n < 2) continue;
        forward_cached(m, seq, fc);
        for (int i = 0; i + 1 < n; ++i) {
            const double* row = fc.logits.row(i);
            total += row_logsumexp(row, fc.logits.cols) - row[seq.ids[i + 1]];
        }
        count += n - 1;
    }
    if (count == 0) throw std::invalid_argument("lm_cross_entropy: no predictable positions");
    return total / static_cast<double>(count);
}

double lm_loss_and_grads(const TransformerModel& m, const TokenSequence& seq,
                         TransformerModel& grads, double scale) {
    const ModelConfig& cfg = m.config;
    const int n = static_cast<int>(seq.ids.size());
    if (n < 2) return 0.0;

    ForwardCache fc;
    forward_cached(m, seq, fc);
    const int d = cfg.d_model, heads = cfg.num_heads, hd = d / heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    const double w = scale / (n - 1);

    // Loss is summed sequentially so the value is thread-count independent.
    std::vector<double> lse(n - 1);
    Matrix dlogits(n, cfg.vocab_size);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n - 1; ++i) {
        const double* row = fc.logits.row(i);
        double* drow = dlogits.row(i);
        lse[i] = row_logsumexp(row, cfg.vocab_size);
        for (int j = 0; j < cfg.vocab_size; ++j) drow[j] = std::exp(row[j] - lse[i]) * w;
        drow[seq.ids[i + 1]] -= w;
    }
    double loss = 0.0;
    for (int i = 0; i < n - 1; ++i) loss += (lse[i] - fc.logits(i, seq.ids[i + 1])) / (n - 1);

    // logits = nf * U
    Matrix dnf;
    kernels::matmul_nt(dlogits, m.unembedding, dnf);
    kernels::matmul_tn_acc(fc.nf, dlogits, grads.unembedding);

    Matrix dx(n, d);
    kernels::rmsnorm_backward_rows(fc.states[cfg.num_layers], fc.rms_f, m.final_norm_gain, dnf, dx,
                          grads.final_norm_gain.data());

    Matrix da1, dh1, dn2, dctx, dn1;
    for (int l = cfg.num_layers - 1; l >= 0; --l) {
        const LayerParams& lp = m.layers[l];
        LayerParams& gp = grads.layers[l];
        const LayerCache& lc = fc.layers[l];

        // MLP branch: x_out = x_mid + silu(norm2(x_mid) W1) W2
        kernels::matmul_nt(dx, lp.w2, da1);
        kernels::matmul_tn_acc(lc.a1, dx, gp.w2);
        if (dh1.rows != n || dh1.cols != cfg.d_ff) dh1 = Matrix(n, cfg.d_ff);
        for (size_t idx = 0; idx < dh1.data.size(); ++idx)
            dh1.data[idx] = da1.data[idx] * silu_grad(lc.h1.data[idx]);
        kernels::matmul_nt(dh1, lp.w1, dn2);
        kernels::matmul_tn_acc(lc.n2, dh1, gp.w1);

        Matrix dx_mid = dx;  // residual path
        kernels::rmsnorm_backward_rows(lc.x_mid, lc.rms2, lp.norm2_gain, dn2, dx_mid,
                              gp.norm2_gain.data());

        // Attention branch: x_mid = x_in + attn(norm1(x_in))
        kernels::matmul_nt(dx_mid, lp.wo, dctx);
        kernels::matmul_tn_acc(lc.ctx, dx_mid, gp.wo);

        Matrix dq(n, d), dk(n, d), dv(n, d);
        for (int h = 0; h < heads; ++h) {
            const int off = h * hd;
            const Matrix& p = lc.att[h];
            Matrix ds(n, n);
#pragma omp parallel for schedule(static)
            for (int i = 0; i < n; ++i) {
                double* dsi = ds.row(i);
                const double* pi = p.row(i);
                const double* dci = dctx.row(i) + off;
                double rowdot = 0.0;
                for (int j = 0; j <= i; ++j) {
                    const double dp = kernels::dot(dci, lc.v.row(j) + off, hd);
                    dsi[j] = dp;
                    rowdot += pi[j] * dp;
                }
                for (int j = 0; j <= i; ++j) dsi[j] = pi[j] * (dsi[j] - rowdot);
            }
#pragma omp parallel for schedule(static)
            for (int i = 0; i < n; ++i) {
                double* dqi = dq.row(i) + off;
                const double* dsi = ds.row(i);
                for (int j = 0; j <= i; ++j) {
                    const double* kj = lc.k.row(j) + off;
                    const double dsv = dsi[j] * att_scale;
                    for (int c = 0; c < hd; ++c) dqi[c] += dsv * kj[c];
                }
            }
#pragma omp parallel for schedule(static)
            for (int j = 0; j < n; ++j) {
                double* dkj = dk.row(j) + off;
                double* dvj = dv.row(j) + off;
                for (int i = j; i < n; ++i) {
                    const double dsv = ds(i, j) * att_scale;
                    const double* qi = lc.q.row(i) + off;
                    const double* dci = dctx.row(i) + off;
                    const double pij = p(i, j);
                    for (int c = 0; c < hd; ++c) {
                        dkj[c] += dsv * qi[c];
                        dvj[c] += pij * dci[c];
                    }
                }
            }
        }

        kernels::matmul_nt(dq, lp.wq, dn1);
        kernels::matmul_nt_acc(dk, lp.wk, dn1);
        kernels::matmul_nt_acc(dv, lp.wv, dn1);
        kernels::matmul_tn_acc(lc.n1, dq, gp.wq);
        kernels::matmul_tn_acc(lc.n1, dk, gp.wk);
        kernels::matmul_tn_acc(lc.n1, dv, gp.wv);

        dx = dx_mid;
        kernels::rmsnorm_backward_rows(fc.states[l], lc.rms1, lp.norm1_gain, dn1, dx,
                              gp.norm1_gain.data());
    }

    // Embedding rows can repeat, so accumulate serially.
    for (int i = 0; i < n; ++i) {
        const double* dxi = dx.row(i);
        double* gt = grads.token_embedding.row(seq.ids[i]);
        double* gpos = grads.pos_embedding.row(i);
        for (int j = 0; j < d; ++j) {
            gt[j] += dxi[j];
            gpos[j] += dxi[j];
        }
    }
    return loss;
}

TrainResult train_lm(TransformerModel& m, const std::vector<TokenSequence>& corpus,
                     const TrainConfig& tc) {
    if (tc.steps < 0 || tc.batch_size < 1 || tc.learning_rate <= 0.0 || tc.grad_clip <= 0.0 ||
        tc.warmup_steps < 0 || tc.holdout_fraction < 0.0 || tc.holdout_fraction >= 1.0 ||
        tc.final_lr_fraction < 0.0 || tc.final_lr_fraction > 1.0)
        throw std::invalid_argument("train_lm: bad training config");
    if (corpus.empty()) throw std::invalid_argument("train_lm: empty corpus");
    for (size_t i = 0; i < corpus.size(); ++i) {
        const size_t len = corpus[i].ids.size();
        if (len < 2 || len > static_cast<size_t>(m.config.max_seq_len))
            throw std::invalid_argument("train_lm: sequence " + std::to_string(i) +
                                        " has unusable length " + std::to_string(len));
    }

    const size_t total = corpus.size();
    size_t n_hold = static_cast<size_t>(std::ceil(tc.holdout_fraction * total));
    if (n_hold >= total) n_hold = total - 1;
    std::vector<TokenSequence> train(corpus.begin(), corpus.end() - n_hold);
    std::vector<TokenSequence> hold(corpus.end() - n_hold, corpus.end());
    const std::vector<TokenSequence>& eval_set = hold.empty() ? train : hold;

    TrainResult res;
    res.train_sequences = static_cast<int>(train.size());
    res.holdout_sequences = static_cast<int>(hold.size());
    res.holdout_ce_before = lm_cross_entropy(m, eval_set);

    TransformerModel grads = zeros_like_model(m.config);
    TransformerModel mom1 = zeros_like_model(m.config);
    TransformerModel mom2 = zeros_like_model(m.config);
    auto pv = tensor_views(m);
    auto gv = tensor_views(grads);
    auto m1v = tensor_views(mom1);
    auto m2v = tensor_views(mom2);

    SeededRng rng(tc.seed);
    res.loss_trace.reserve(tc.steps);
    for (int step = 0; step < tc.steps; ++step) {
        for (auto& g : gv) std::fill(g.data, g.data + static_cast<size_t>(g.rows) * g.cols, 0.0);

        double batch_loss = 0.0;
        for (int b = 0; b < tc.batch_size; ++b) {
            const size_t idx = rng.uniform_int(train.size());
            batch_loss +=
                lm_loss_and_grads(m, train[idx], grads, 1.0 / tc.batch_size) / tc.batch_size;
        }
        if (!std::isfinite(batch_loss))
            throw std::runtime_error("train_lm: non-finite loss at step " + std::to_string(step));
        res.loss_trace.push_back(batch_loss);

        double sq = 0.0;
        for (const auto& g : gv) {
            const size_t len = static_cast<size_t>(g.rows) * g.cols;
            for (size_t i = 0; i < len; ++i) sq += g.data[i] * g.data[i];
        }
        const double gnorm = std::sqrt(sq);
        const double gscale = gnorm > tc.grad_clip ? tc.grad_clip / gnorm : 1.0;

        const int t = step + 1;
        double lr_scale;
        if (tc.warmup_steps > 0 && t <= tc.warmup_steps) {
            lr_scale = static_cast<double>(t) / tc.warmup_steps;
        } else if (tc.steps > tc.warmup_steps) {
            // Cosine decay from 1 down to final_lr_fraction over the
            // post-warmup steps.
            const double progress = static_cast<double>(t - tc.warmup_steps) /
                                    (tc.steps - tc.warmup_steps);
            const double cosine = 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, progress)));
            lr_scale = tc.final_lr_fraction + (1.0 - tc.final_lr_fraction) * cosine;
        } else {
            lr_scale = 1.0;
        }
        const double lr = tc.learning_rate * lr_scale;
        const double bc1 = 1.0 - std::pow(tc.adam_beta1, t);
        const double bc2 = 1.0 - std::pow(tc.adam_beta2, t);
        for (size_t vi = 0; vi < pv.size(); ++vi) {
            double* p = pv[vi].data;
            double* g = gv[vi].data;
            double* m1 = m1v[vi].data;
            double* m2 = m2v[vi].data;
            const size_t len = static_cast<size_t>(pv[vi].rows) * pv[vi].cols;
#pragma omp parallel for schedule(static)
            for (long long i = 0; i < static_cast<long long>(len); ++i) {
                const double gi = g[i] * gscale;
                m1[i] = tc.adam_beta1 * m1[i] + (1.0 - tc.adam_beta1) * gi;
                m2[i] = tc.adam_beta2 * m2[i] + (1.0 - tc.adam_beta2) * gi * gi;
                p[i] -= lr * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + tc.adam_eps);
            }
        }
    }

    for (const auto& v : pv) {
        const size_t len = static_cast<size_t>(v.rows) * v.cols;
        for (size_t i = 0; i < len; ++i)
            if (!std::isfinite(v.data[i]))
                throw std::runtime_error("train_lm: non-finite parameter in " + v.name +
                                         " after training");
    }

    res.holdout_ce_after = lm_cross_entropy(m, eval_set);
    return res;
}

TokenSequence generate(const TransformerModel& m, const TokenSequence& prefix,
                       int max_new_tokens, SampleStrategy strategy, SeededRng& rng) {
    if (prefix.ids.empty()) throw std::invalid_argument("generate: empty prefix");
    if (max_new_tokens < 0) throw std::invalid_argument("generate: negative max_new_tokens");
    validate_sequence(m.config, prefix);

    TokenSequence out = prefix;
    ForwardCache fc;
    for (int t = 0; t < max_new_tokens; ++t) {
        if (static_cast<int>(out.ids.size()) >= m.config.max_seq_len) break;
        forward_cached(m, out, fc);
        const double* row = fc.logits.row(fc.logits.rows - 1);
        std::vector<double> logits(row, row + fc.logits.cols);
        const ProbVector p = softmax(logits);
        const int tok = static_cast<int>(sample_token(p, strategy, rng));
        out.ids.push_back(tok);
        if (tok == kEosId) break;
    }
    return out;
}

uint64_t model_fingerprint(const TransformerModel& m) {
    uint64_t h = kFnvBasis;
    auto mix_i64 = [&h](int64_t v) { h = fnv1a64(&v, sizeof(v), h); };
    mix_i64(m.config.num_layers);
    mix_i64(m.config.num_heads);
    mix_i64(m.config.d_model);
    mix_i64(m.config.d_ff);
    mix_i64(m.config.vocab_size);
    mix_i64(m.config.max_seq_len);
    mix_i64(static_cast<int64_t>(m.config.init_seed));
    for (const auto& v : tensor_views(m)) {
        h = fnv1a64(v.name, h);
        h = fnv1a64(v.data, static_cast<size_t>(v.rows) * v.cols * sizeof(double), h);
    }
    return h;
}

void save_model(const TransformerModel& m, const std::string& path) {
    ckpt::Container c;
    c.kind = "model";
    c.meta["config"] = config_to_json(m.config);
    c.meta["fingerprint"] = fingerprint_hex(model_fingerprint(m));
    for (const auto& v : tensor_views(m)) {
        ckpt::TensorRecord t;
        t.name = v.name;
        t.rows = v.rows;
        t.cols = v.cols;
        t.data.assign(v.data, v.data + static_cast<size_t>(v.rows) * v.cols);
        c.tensors.push_back(std::move(t));
    }
    ckpt::save(path, c);
}

TransformerModel load_model(const std::string& path) {
    const ckpt::Container c = ckpt::load(path, "model");
    ModelConfig cfg;
    try {
        cfg = config_from_json(c.meta.at("config"));
    } catch (const std::exception& e) {
        throw std::runtime_error("checkpoint: bad model config in " + path + ": " + e.what());
    }
    cfg.validate();

    TransformerModel m = zeros_like_model(cfg);
    for (auto& v : tensor_views(m)) {
        const ckpt::TensorRecord& t = c.tensor(v.name);
        if (t.rows != v.rows || t.cols != v.cols)
            throw std::runtime_error("checkpoint: tensor '" + v.name + "' in " + path + " is " +
                                     std::to_string(t.rows) + "x" + std::to_string(t.cols) +
                                     ", expected " + std::to_string(v.rows) + "x" +
                                     std::to_string(v.cols));
        std::copy(t.data.begin(), t.data.end(), v.data);
    }

    const std::string stored = c.meta.value("fingerprint", std::string{});
    const std::string actual = fingerprint_hex(model_fingerprint(m));
    if (stored != actual)
        throw std::runtime_error("checkpoint: fingerprint mismatch in " + path + ": header says " +
                                 stored + ", parameters hash to " + actual);
    return m;
}

} // namespace lenslab
