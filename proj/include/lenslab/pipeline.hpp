#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lenslab/attack.hpp"
#include "lenslab/harness.hpp"
#include "lenslab/lens.hpp"
#include "lenslab/model.hpp"
#include "lenslab/text.hpp"

namespace lenslab {

// Stage seeds, each an independent stream derived from the single run seed.
// One number therefore pins the corpus, the initialization, both training
// runs, the evaluation set, and every attack in the sweep.
uint64_t corpus_seed(uint64_t run_seed);
uint64_t model_init_seed(uint64_t run_seed);
uint64_t lm_train_seed(uint64_t run_seed);
uint64_t lens_train_seed(uint64_t run_seed);
uint64_t eval_set_seed(uint64_t run_seed);
uint64_t sweep_master_seed(uint64_t run_seed);
uint64_t single_attack_seed(uint64_t run_seed);

// Training text and evaluation pairs regenerate bit-identically from the run
// seed; the files on disk are inspectable artifacts, not training inputs.
std::vector<std::string> make_corpus(uint64_t run_seed, const CorpusParams& params = {});
std::vector<EvalInstance> make_eval_set(uint64_t run_seed, int count = 75);

struct TrainModelOutcome {
    ModelConfig config;
    int vocab_size = 0;
    int train_sequences = 0;
    int holdout_sequences = 0;
    double holdout_ce_before = 0.0;
    double holdout_ce_after = 0.0;
    uint64_t model_fp = 0;
};

// Regenerates the corpus, builds the vocabulary, trains the language model,
// and writes cfg.model_path and cfg.vocab_path.
TrainModelOutcome run_train_model(const RunConfig& cfg);

struct TrainLensOutcome {
    std::vector<double> holdout_kl_before;  // per layer, index l-1
    std::vector<double> holdout_kl_after;
    uint64_t translator_fp = 0;
};

// Loads the model and vocabulary, regenerates the same corpus, trains the
// per-layer translators against the frozen model, and writes
// cfg.translators_path.
TrainLensOutcome run_train_lens(const RunConfig& cfg);

// Loads model, vocabulary, translators, and dataset; runs the configured
// (layer x position) sweep; writes the CSV report to cfg.output_path and a
// text heatmap beside it at cfg.output_path + ".heatmap.txt".
SweepTable run_sweep_cmd(const RunConfig& cfg);

struct EvaluateOutcome {
    double accuracy = 0.0;
    int correct = 0;
    int instances = 0;
};

// Clean preference accuracy of the judge over the configured dataset.
EvaluateOutcome run_evaluate(const RunConfig& cfg);

// Single adversarial example for one argument text under cfg.attack.
// std::nullopt is the skip signal: the encoded sequence is too short for the
// configured position. When json_line is non-null and an example is produced,
// it receives the serialized record.
std::optional<AdversarialExample> run_single_attack(const RunConfig& cfg, const std::string& text,
                                                    std::string* json_line);

// Lens grid for one sequence as CSV rows
// "layer,position,rank,token_id,token,prob", ranked per cell by descending
// probability with ties toward the lower id. top_k <= 0 dumps every token.
// Probabilities print with 17 significant digits so parsing them back is
// exact.
std::string probe_csv(const TransformerModel& m, const TranslatorStack& stack, const Vocab& vocab,
                      const TokenSequence& seq, int top_k);

struct GenDataOutcome {
    std::string corpus_path;
    std::string dataset_path;
    int corpus_lines = 0;
    int instances = 0;
};

// Writes the regenerable text artifacts under dir: corpus.txt and
// eval_<count>.jsonl. Creates the directory if needed.
GenDataOutcome run_gen_data(const RunConfig& cfg, const std::string& dir, int count = 75);

} // namespace lenslab
