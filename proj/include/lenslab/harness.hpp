#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lenslab/attack.hpp"
#include "lenslab/lens.hpp"
#include "lenslab/model.hpp"
#include "lenslab/text.hpp"

namespace lenslab {

// One few-shot example inside the judge prompt: a rating block plus its
// correct label.
struct JudgeExemplar {
    std::string topic;
    std::string stance;
    std::string argument;
    ArgumentQuality label = ArgumentQuality::Low;
};

// Instruction line followed by a fixed exemplar block; the instance under
// evaluation is rendered last, ending with the unanswered "Rating:" cue.
struct JudgePrompt {
    std::string instruction;
    std::vector<JudgeExemplar> exemplars;
};

// Pinned deterministic prompt with num_exemplars (0..3) few-shot examples,
// one per quality level, drawn from the same banks as the training text.
// Requesting fewer keeps a prefix of the same three, so prompts nest.
JudgePrompt default_judge_prompt(int num_exemplars = 3);

// Byte-deterministic rendering: instruction, the exemplar blocks each
// followed by their label word, then the final block for (topic, stance,
// argument), which ends with "Rating:". Throws std::invalid_argument when
// any field (including exemplar fields) is empty or contains a line break.
std::string build_prompt(const JudgePrompt& prompt, const std::string& topic,
                         const std::string& stance, const std::string& argument);

struct JudgeVerdict {
    ArgumentQuality rating = ArgumentQuality::Low;
    // Log-likelihood of each label word continuing the prompt, in ordinal
    // order low, average, high.
    std::array<double, 3> scores{};
    // Exemplars removed head-first so the prompt fits the context window.
    int dropped_exemplars = 0;
};

// Scores every quality level by the log-likelihood of its label token after
// the rendered prompt and returns the best one; ties break toward the lower
// ordinal. Throws std::runtime_error when a label word is missing from the
// vocabulary or the prompt overflows the context window even with every
// exemplar dropped.
JudgeVerdict judge_rating(const TransformerModel& m, const Vocab& vocab,
                          const JudgePrompt& prompt, const std::string& topic,
                          const std::string& stance, const std::string& argument);

// Judge abstraction so evaluation logic can be exercised with hand-built
// oracles in tests; model_judge wraps judge_rating over a fixed prompt. The
// returned callable references the model and vocabulary, which must stay
// alive while it is used.
using JudgeFn = std::function<JudgeVerdict(
    const std::string& topic, const std::string& stance, const std::string& argument)>;
JudgeFn model_judge(const TransformerModel& m, const Vocab& vocab, const JudgePrompt& prompt);

struct PreferenceRecord {
    size_t index = 0;
    ArgumentQuality chosen_rating = ArgumentQuality::Low;
    ArgumentQuality rejected_rating = ArgumentQuality::Low;
    bool correct = false;
    int dropped_exemplars_chosen = 0;
    int dropped_exemplars_rejected = 0;
};

struct PreferenceResult {
    double accuracy = 0.0;
    int correct = 0;
    std::vector<PreferenceRecord> records;
};

// Replacement (chosen, rejected) argument texts keyed by instance index;
// instances without an entry are judged on their original arguments.
using ArgumentOverrides = std::unordered_map<size_t, std::pair<std::string, std::string>>;

// Fraction of instances whose chosen argument is rated strictly above the
// rejected one; ties and inversions both count as incorrect. Throws
// std::invalid_argument on an empty instance list.
PreferenceResult preference_accuracy(const JudgeFn& judge,
                                     const std::vector<EvalInstance>& instances,
                                     const ArgumentOverrides* overrides = nullptr);
PreferenceResult preference_accuracy(const TransformerModel& m, const Vocab& vocab,
                                     const JudgePrompt& prompt,
                                     const std::vector<EvalInstance>& instances,
                                     const ArgumentOverrides* overrides = nullptr);

struct SweepOptions {
    std::vector<int> layers = {2, 3, 4, 5, 6, 8};
    std::vector<int> positions = {2, 4, 6, 8, 10, 12};
    AttackMode mode = AttackMode::Substitution;
    TokenChoice token_choice = TokenChoice::ArgmaxDistinct;
    int max_new_tokens = -1;  // conditioned mode; -1 keeps argument length
    // false: both arguments are attacked, matching the evaluation protocol;
    // true: only the chosen argument, kept for ablations.
    bool attack_chosen_only = false;
    uint64_t seed = 0;
};

struct SweepCell {
    int layer = 0;
    int position = 0;
    int correct = 0;
    int evaluated = 0;
    // Instances not judged at this cell, either because an attacked argument
    // does not extend past the position or because the attack failed;
    // evaluated + skipped always equals the dataset size.
    int skipped = 0;
    // Attack errors folded into skipped, counted separately here.
    int failures = 0;
    double accuracy = 0.0;  // correct / evaluated, 0 when nothing evaluated

    bool operator==(const SweepCell&) const = default;
};

struct SweepTable {
    std::vector<int> layers;
    std::vector<int> positions;
    std::vector<SweepCell> cells;  // row-major, layers x positions
    double clean_accuracy = 0.0;
    int clean_correct = 0;
    int instance_count = 0;
    AttackMode mode = AttackMode::Substitution;
    TokenChoice token_choice = TokenChoice::ArgmaxDistinct;
    int max_new_tokens = -1;
    bool attack_chosen_only = false;
    uint64_t master_seed = 0;
    uint64_t model_fp = 0;
    uint64_t translator_fp = 0;

    const SweepCell& at(size_t layer_index, size_t position_index) const;
    bool operator==(const SweepTable&) const = default;
};

// Evaluates preference accuracy at every (layer, position) cell after
// attacking each instance's chosen and rejected arguments (or only the
// chosen one, per options). The clean baseline is judged once over the
// untouched dataset. Each cell's randomness derives from (seed, layer,
// position), so cells are order-independent; per-instance attack errors are
// counted, never propagated. Throws std::invalid_argument on empty axes,
// a layer outside the translator stack, positions < 1, or no instances.
SweepTable run_sweep(const TransformerModel& m, const TranslatorStack& st, const Vocab& vocab,
                     const JudgePrompt& prompt, const std::vector<EvalInstance>& instances,
                     const SweepOptions& opts);

enum class ReportFormat { Csv, TextHeatmap };

// CSV: header row of positions, one row per layer with accuracies to three
// decimals, then a metadata block carrying run provenance and exact per-cell
// counts so parsing recovers the table bit for bit. TextHeatmap: the same
// grid with a shading mark per cell scaled by the drop from the clean
// baseline. Both renderings are byte-deterministic.
std::string render_report(const SweepTable& table, ReportFormat format);
// Throws std::runtime_error when the path cannot be opened or written.
void write_report(const SweepTable& table, ReportFormat format, const std::string& path);
// Parses render_report's CSV form back; throws std::runtime_error naming the
// offending line on any structural mismatch, including an accuracy cell that
// disagrees with the metadata counts.
SweepTable read_report_csv(const std::string& path);

inline AttackSpec default_single_attack() {
    AttackSpec spec;
    spec.layer = 6;
    spec.position = 10;
    return spec;
}

// Everything a pipeline run needs: artifact paths, the single-attack spec,
// sweep axes, judge options, and the master seed.
struct RunConfig {
    std::string model_path = "model.ckpt";
    std::string vocab_path = "vocab.txt";
    std::string translators_path = "translators.ckpt";
    std::string dataset_path = "data/eval_75.jsonl";
    std::string output_path = "report.csv";
    AttackSpec attack = default_single_attack();
    std::vector<int> sweep_layers = {2, 3, 4, 5, 6, 8};
    std::vector<int> sweep_positions = {2, 4, 6, 8, 10, 12};
    bool attack_chosen_only = false;
    // One in-context exemplar keeps the few-shot prompt structure while
    // leaving most of the context window for the judged argument.
    int judge_exemplars = 1;
    uint64_t seed = 7;

    bool operator==(const RunConfig&) const = default;
};

// JSON document mirroring RunConfig; missing keys keep their defaults.
// load_run_config throws std::runtime_error naming the file and offending
// key on malformed content or out-of-range values.
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

} // namespace lenslab
