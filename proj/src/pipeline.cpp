#include "lenslab/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "lenslab/rng.hpp"

namespace lenslab {

namespace {

// Stage tags for seed derivation. Values are arbitrary but frozen: changing
// one silently changes every artifact built from a given run seed.
enum : uint64_t {
    kCorpusStage = 1,
    kModelInitStage = 2,
    kLmTrainStage = 3,
    kLensTrainStage = 4,
    kEvalSetStage = 5,
    kSweepStage = 6,
    kSingleAttackStage = 7,
};

std::vector<TokenSequence> encode_corpus(const Vocab& vocab,
                                         const std::vector<std::string>& corpus) {
    std::vector<TokenSequence> seqs;
    seqs.reserve(corpus.size());
    for (const std::string& line : corpus) seqs.push_back(encode(vocab, line));
    return seqs;
}

} // namespace

uint64_t corpus_seed(uint64_t run_seed) { return SeededRng::derive(run_seed, kCorpusStage); }
uint64_t model_init_seed(uint64_t run_seed) {
    return SeededRng::derive(run_seed, kModelInitStage);
}
uint64_t lm_train_seed(uint64_t run_seed) { return SeededRng::derive(run_seed, kLmTrainStage); }
uint64_t lens_train_seed(uint64_t run_seed) {
    return SeededRng::derive(run_seed, kLensTrainStage);
}
uint64_t eval_set_seed(uint64_t run_seed) { return SeededRng::derive(run_seed, kEvalSetStage); }
uint64_t sweep_master_seed(uint64_t run_seed) { return SeededRng::derive(run_seed, kSweepStage); }
uint64_t single_attack_seed(uint64_t run_seed) {
    return SeededRng::derive(run_seed, kSingleAttackStage);
}

std::vector<std::string> make_corpus(uint64_t run_seed, const CorpusParams& params) {
    SeededRng rng(corpus_seed(run_seed));
    return generate_training_corpus(rng, params);
}

std::vector<EvalInstance> make_eval_set(uint64_t run_seed, int count) {
    SeededRng rng(eval_set_seed(run_seed));
    return generate_synthetic_eval_set(rng, count);
}

TrainModelOutcome run_train_model(const RunConfig& cfg) {
    const std::vector<std::string> corpus = make_corpus(cfg.seed);
    const Vocab vocab = build_vocab(corpus, 512);

    ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.init_seed = model_init_seed(cfg.seed);
    TransformerModel model = init_model(mc);

    TrainConfig tc;
    tc.seed = lm_train_seed(cfg.seed);
    const TrainResult tr = train_lm(model, encode_corpus(vocab, corpus), tc);

    save_model(model, cfg.model_path);
    save_vocab(cfg.vocab_path, vocab);

    TrainModelOutcome out;
    out.config = mc;
    out.vocab_size = vocab.size();
    out.train_sequences = tr.train_sequences;
    out.holdout_sequences = tr.holdout_sequences;
    out.holdout_ce_before = tr.holdout_ce_before;
    out.holdout_ce_after = tr.holdout_ce_after;
    out.model_fp = model_fingerprint(model);
    return out;
}

TrainLensOutcome run_train_lens(const RunConfig& cfg) {
    const TransformerModel model = load_model(cfg.model_path);
    const Vocab vocab = load_vocab(cfg.vocab_path);
    if (vocab.size() != model.config.vocab_size)
        throw std::runtime_error("vocabulary file " + cfg.vocab_path + " has " +
                                 std::to_string(vocab.size()) + " tokens but the model expects " +
                                 std::to_string(model.config.vocab_size));

    TranslatorStack stack = init_translators(model);
    LensTrainConfig lc;
    lc.seed = lens_train_seed(cfg.seed);
    const LensTrainResult r =
        train_tuned_lens(model, stack, encode_corpus(vocab, make_corpus(cfg.seed)), lc);

    save_translators(cfg.translators_path, stack);

    TrainLensOutcome out;
    out.holdout_kl_before = r.holdout_kl_before;
    out.holdout_kl_after = r.holdout_kl_after;
    out.translator_fp = translator_fingerprint(stack);
    return out;
}

SweepTable run_sweep_cmd(const RunConfig& cfg) {
    const TransformerModel model = load_model(cfg.model_path);
    const Vocab vocab = load_vocab(cfg.vocab_path);
    const TranslatorStack stack = load_translators(cfg.translators_path, model);
    const std::vector<EvalInstance> instances = load_eval_dataset(cfg.dataset_path);
    const JudgePrompt prompt = default_judge_prompt(cfg.judge_exemplars);

    SweepOptions opts;
    opts.layers = cfg.sweep_layers;
    opts.positions = cfg.sweep_positions;
    opts.mode = cfg.attack.mode;
    opts.token_choice = cfg.attack.token_choice;
    opts.max_new_tokens = cfg.attack.max_new_tokens;
    opts.attack_chosen_only = cfg.attack_chosen_only;
    opts.seed = sweep_master_seed(cfg.seed);

    const SweepTable table = run_sweep(model, stack, vocab, prompt, instances, opts);
    write_report(table, ReportFormat::Csv, cfg.output_path);
    write_report(table, ReportFormat::TextHeatmap, cfg.output_path + ".heatmap.txt");
    return table;
}

EvaluateOutcome run_evaluate(const RunConfig& cfg) {
    const TransformerModel model = load_model(cfg.model_path);
    const Vocab vocab = load_vocab(cfg.vocab_path);
    const std::vector<EvalInstance> instances = load_eval_dataset(cfg.dataset_path);
    const JudgePrompt prompt = default_judge_prompt(cfg.judge_exemplars);

    const PreferenceResult r = preference_accuracy(model, vocab, prompt, instances);
    EvaluateOutcome out;
    out.accuracy = r.accuracy;
    out.correct = r.correct;
    out.instances = static_cast<int>(instances.size());
    return out;
}

std::optional<AdversarialExample> run_single_attack(const RunConfig& cfg, const std::string& text,
                                                    std::string* json_line) {
    const TransformerModel model = load_model(cfg.model_path);
    const Vocab vocab = load_vocab(cfg.vocab_path);
    const TranslatorStack stack = load_translators(cfg.translators_path, model);

    const TokenSequence seq = encode(vocab, text);
    const std::optional<AdversarialExample> ex =
        generate_adversarial(model, stack, seq, cfg.attack, single_attack_seed(cfg.seed));
    if (ex.has_value() && json_line != nullptr) *json_line = adversarial_to_json_line(*ex, vocab);
    return ex;
}

std::string probe_csv(const TransformerModel& m, const TranslatorStack& stack, const Vocab& vocab,
                      const TokenSequence& seq, int top_k) {
    const LensGrid grid = compute_lens_grid(m, stack, seq);
    const int vocab_size = vocab.size();
    const int keep = top_k <= 0 ? vocab_size : std::min(top_k, vocab_size);

    std::string out = "layer,position,rank,token_id,token,prob\n";
    std::vector<int> order(static_cast<size_t>(vocab_size));
    char buf[64];
    for (int l = 1; l <= grid.num_layers; ++l) {
        for (int x = 1; x <= grid.num_positions; ++x) {
            const auto cell = grid.cell(l, x);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return cell[static_cast<size_t>(a)] >
                                                        cell[static_cast<size_t>(b)]; });
            for (int r = 0; r < keep; ++r) {
                const int id = order[static_cast<size_t>(r)];
                std::snprintf(buf, sizeof buf, "%.17g", cell[static_cast<size_t>(id)]);
                out += std::to_string(l) + ',' + std::to_string(x) + ',' +
                       std::to_string(r + 1) + ',' + std::to_string(id) + ',' + vocab.token(id) +
                       ',' + buf + '\n';
            }
        }
    }
    return out;
}

GenDataOutcome run_gen_data(const RunConfig& cfg, const std::string& dir, int count) {
    if (count < 1) throw std::invalid_argument("instance count must be at least 1");
    std::filesystem::create_directories(dir);

    GenDataOutcome out;
    out.corpus_path = dir + "/corpus.txt";
    out.dataset_path = dir + "/eval_" + std::to_string(count) + ".jsonl";

    const std::vector<std::string> corpus = make_corpus(cfg.seed);
    std::ofstream cf(out.corpus_path, std::ios::binary);
    if (!cf) throw std::runtime_error("cannot open " + out.corpus_path + " for writing");
    for (const std::string& line : corpus) cf << line << '\n';
    cf.close();
    if (!cf) throw std::runtime_error("failed writing " + out.corpus_path);

    const std::vector<EvalInstance> instances = make_eval_set(cfg.seed, count);
    save_eval_dataset(out.dataset_path, instances);

    out.corpus_lines = static_cast<int>(corpus.size());
    out.instances = static_cast<int>(instances.size());
    return out;
}

} // namespace lenslab
