#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "lenslab/lens.hpp"
#include "lenslab/model.hpp"
#include "lenslab/rng.hpp"
#include "lenslab/text.hpp"

namespace lenslab {

// How the perturbed sequence is produced: a single-token substitution, or a
// substitution followed by autoregressive regeneration of the suffix.
enum class AttackMode { Substitution = 0, Conditioned = 1 };

// How the attacked grid cell is chosen. FixedCell uses the (layer, position)
// in the spec. GridSweep marks specs issued by the sweep driver, which fixes
// the cell itself, so inside a single attack it behaves exactly like
// FixedCell. TopProbExcludingOriginal scans the whole grid for the cell whose
// best admissible token has the highest lens probability (ties broken toward
// the lowest layer, then position, then token id).
enum class CellSelection { FixedCell = 0, GridSweep = 1, TopProbExcludingOriginal = 2 };

// How the injected token is drawn from the chosen cell: the admissible token
// with the highest lens probability (ties toward the lowest id), or a
// categorical draw over the admissible tokens after renormalization.
enum class TokenChoice { ArgmaxDistinct = 0, SampleDistinct = 1 };

std::string to_string(AttackMode mode);
std::string to_string(CellSelection selection);
std::string to_string(TokenChoice choice);
// Inverse of to_string; throws std::invalid_argument naming an unknown value.
AttackMode attack_mode_from_string(const std::string& s);
CellSelection cell_selection_from_string(const std::string& s);
TokenChoice token_choice_from_string(const std::string& s);

struct AttackSpec {
    AttackMode mode = AttackMode::Substitution;
    int layer = 1;     // 1-based block index into the lens grid
    int position = 1;  // 1-based token position in the attacked sequence
    CellSelection selection = CellSelection::FixedCell;
    TokenChoice token_choice = TokenChoice::ArgmaxDistinct;
    // Conditioned mode: number of tokens regenerated after the injection
    // point; -1 keeps the original sequence length (n - position new tokens).
    int max_new_tokens = -1;

    bool operator==(const AttackSpec&) const = default;
};

struct SelectedCell {
    int layer = 0;
    int position = 0;
    int token = -1;  // injected token id
};

struct AdversarialExample {
    TokenSequence original;
    TokenSequence perturbed;
    int layer = 0;
    int position = 0;
    int original_token = -1;
    int injected_token = -1;
    AttackMode mode = AttackMode::Substitution;
    // Lens probability of the injected token at the attacked cell, copied
    // from the grid without rounding.
    double lens_prob_of_injected = 0.0;
    uint64_t seed = 0;
};

// Picks the grid cell per spec.selection and draws the injected token from it
// per spec.token_choice. Admissible tokens exclude the reserved ids and the
// token currently at the attacked position; the position itself must hold a
// regular word (<unk> counts as one), since replacing <bos>/<eos>/<pad> would
// change the decoded word count. The rng is consumed only by SampleDistinct.
//
// Throws std::invalid_argument when the grid was built for a different
// sequence, the cell is out of bounds, the sequence does not extend past the
// attacked position, or the position holds a structural token; throws
// std::runtime_error when no admissible token carries positive probability.
SelectedCell select_injected_token(const LensGrid& grid, const TokenSequence& tokens,
                                   const AttackSpec& spec, SeededRng& rng);

// Copy of tokens with position (1-based) set to token. Total in the token
// value: distinctness is select_injected_token's contract, not this one's.
// Throws std::invalid_argument when position is out of [1, n].
TokenSequence substitute_token(const TokenSequence& tokens, int position, int token);

// Keeps tokens[1..position-1], forces `token` at `position`, then extends the
// prefix with generate(): greedy for ArgmaxDistinct, categorical sampling for
// SampleDistinct. max_new_tokens = -1 preserves the original length
// (n - position new tokens); generation stops early at an emitted
// end-of-sequence token (kept) or a full context window.
// Throws std::invalid_argument on a bad position, max_new_tokens < -1, or a
// prefix that exceeds the context window.
TokenSequence conditioned_generate(const TransformerModel& m, const TokenSequence& tokens,
                                   int position, int token, int max_new_tokens,
                                   TokenChoice choice, SeededRng& rng);

// Full attack: computes the lens grid for `tokens`, selects the cell and
// injected token, and builds the perturbed sequence per spec.mode. All
// randomness comes from a SeededRng(seed) local to the call, so equal inputs
// give identical results. Returns std::nullopt (a skip, not an error) when
// the sequence does not extend past spec.position under fixed-cell or
// sweep-driven selection; errors from components propagate.
std::optional<AdversarialExample> generate_adversarial(const TransformerModel& m,
                                                       const TranslatorStack& st,
                                                       const TokenSequence& tokens,
                                                       const AttackSpec& spec, uint64_t seed);

// One-line JSON record: original/perturbed text, attacked cell, original and
// injected token strings, mode, lens probability, seed.
std::string adversarial_to_json_line(const AdversarialExample& ex, const Vocab& vocab);

} // namespace lenslab
