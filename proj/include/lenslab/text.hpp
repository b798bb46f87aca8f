#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lenslab/rng.hpp"

namespace lenslab {

inline constexpr int kBosId = 0;
inline constexpr int kEosId = 1;
inline constexpr int kUnkId = 2;
inline constexpr int kPadId = 3;
inline constexpr int kNumReservedIds = 4;

// Word-level vocabulary. Ids 0-3 are reserved for <bos>, <eos>, <unk>,
// <pad>; content words start at id 4.
struct Vocab {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> ids;

    int size() const { return static_cast<int>(tokens.size()); }
    const std::string& token(int id) const { return tokens.at(static_cast<size_t>(id)); }
    // -1 when the word is not in the vocabulary.
    int id_of(const std::string& word) const {
        auto it = ids.find(word);
        return it == ids.end() ? -1 : it->second;
    }
    static bool is_reserved(int id) { return id >= 0 && id < kNumReservedIds; }
};

struct TokenSequence {
    std::vector<int> ids;

    int size() const { return static_cast<int>(ids.size()); }
    bool operator==(const TokenSequence& other) const { return ids == other.ids; }
};

// Lowercased whitespace tokenization; the shared normalization for
// build_vocab and encode.
std::vector<std::string> split_words_lower(const std::string& text);

// Keeps the max_size - 4 most frequent words (ties broken lexicographically)
// plus the reserved ids. Throws std::invalid_argument on an empty corpus.
Vocab build_vocab(const std::vector<std::string>& corpus, size_t max_size);

// encode prepends <bos> and maps out-of-vocabulary words to <unk>; it never
// emits <pad>. decode drops <bos>/<eos>/<pad> and joins words with single
// spaces, so decode(encode(t)) == t up to whitespace normalization and <unk>
// substitution.
TokenSequence encode(const Vocab& vocab, const std::string& text);
std::string decode(const Vocab& vocab, const TokenSequence& seq);

// One pairwise evaluation record.
struct EvalInstance {
    std::string topic;
    std::string stance;
    std::string chosen;
    std::string rejected;
    std::string id;
};

// Newline-delimited records, one JSON object per line with string fields
// "topic", "stance", "chosen", "rejected" and optional "id". Malformed lines
// raise std::runtime_error naming the 1-based line and offending field.
std::vector<EvalInstance> load_eval_dataset(const std::string& path);
void save_eval_dataset(const std::string& path, const std::vector<EvalInstance>& instances);
std::string eval_instance_to_json(const EvalInstance& inst);

// Vocabulary artifact: one token per line, ids implied by line order, the
// four reserved tokens first. load_vocab raises std::runtime_error on a
// missing file, a wrong reserved prefix, an empty or whitespace-bearing
// line, or a duplicate token.
void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

// Parameters of the synthetic argument generator.
struct ThemeParams {
    int markers_per_argument = 2;
    int min_argument_words = 13;
    int max_argument_words = 17;
    // Markers are planted within word indices [0, max_marker_word_index] so
    // substitution positions early in the sequence can reach them.
    int max_marker_word_index = 10;
};

enum class ArgumentQuality { Low = 0, Average = 1, High = 2 };

// Word banks behind the generator. Marker and label words appear in no other
// bank, so planted quality signals stay unambiguous; every bank word is
// punctuation-free and lowercase.
const std::vector<std::string>& high_quality_markers();
const std::vector<std::string>& low_quality_markers();
const std::vector<std::string>& filler_words();
const std::vector<std::string>& topic_bank();
const std::vector<std::string>& stance_bank();

// Label words, index-aligned with ArgumentQuality.
const std::vector<std::string>& rating_labels();

// Instruction line and the per-instance rating block used both in judge
// prompts and in generated training text. The block ends with "Rating:".
std::string rating_instruction();
std::string render_rating_block(const std::string& topic, const std::string& stance,
                                const std::string& argument);

// Random argument text of the requested quality: High plants
// markers_per_argument high-quality markers, Low plants low-quality markers,
// Average plants exactly one marker from each bank in random order. Every
// class is then separable by marker presence alone: a low-quality marker
// appears iff the argument is not High, a high-quality marker iff it is not
// Low.
std::string make_argument(SeededRng& rng, ArgumentQuality quality, const ThemeParams& theme);
std::string make_argument(SeededRng& rng, ArgumentQuality quality, const ThemeParams& theme,
                          int min_words, int max_words);

// Deterministic synthetic evaluation set: chosen arguments are High quality,
// rejected ones Average, so the pair sits one rating level apart and a single
// corrupted marker can flip the preference.
std::vector<EvalInstance> generate_synthetic_eval_set(SeededRng& rng, int count,
                                                      const ThemeParams& theme = {});

struct CorpusParams {
    // Enough distinct lines that the default training schedule sees each one
    // only a few times; the judge must learn the marker banks rather than
    // memorize individual arguments.
    int judge_lines = 2400;
    int plain_lines = 600;
    // Exemplar arguments inside judge lines are kept short so a few-shot
    // prompt still fits the model context.
    int exemplar_min_words = 9;
    int exemplar_max_words = 10;
    ThemeParams theme;
};

// Training text: rating blocks with correct labels (0-3 few-shot exemplars
// followed by a labelled block) mixed with plain argument lines. One
// sequence per returned string.
std::vector<std::string> generate_training_corpus(SeededRng& rng, const CorpusParams& params = {});

} // namespace lenslab
