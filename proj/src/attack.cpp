#include "lenslab/attack.hpp"

#include <span>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace lenslab {

namespace {

// True for ids whose decoded form is not a word: substituting one of these
// (or injecting one) would change the decoded word count. <unk> decodes to a
// word and is deliberately not listed.
bool is_structural(int id) { return id == kBosId || id == kEosId || id == kPadId; }

void check_grid_matches(const LensGrid& grid, const TokenSequence& tokens) {
    if (tokens.size() != grid.num_positions ||
        grid.sequence_hash != sequence_hash(tokens))
        throw std::invalid_argument(
            "select_injected_token: grid was computed for a different sequence");
}

// Highest-probability admissible token in the cell, or -1 when every
// admissible token has zero probability. Strict > keeps the lowest id on
// ties.
int best_admissible(std::span<const double> cell, int original) {
    int best = -1;
    double best_p = 0.0;
    for (int t = kNumReservedIds; t < static_cast<int>(cell.size()); ++t) {
        if (t == original) continue;
        if (cell[static_cast<size_t>(t)] > best_p) {
            best_p = cell[static_cast<size_t>(t)];
            best = t;
        }
    }
    return best;
}

int draw_admissible(std::span<const double> cell, int original, TokenChoice choice,
                    SeededRng& rng) {
    if (choice == TokenChoice::ArgmaxDistinct) {
        const int best = best_admissible(cell, original);
        if (best < 0)
            throw std::runtime_error(
                "select_injected_token: no admissible token has positive probability");
        return best;
    }
    double total = 0.0;
    for (int t = kNumReservedIds; t < static_cast<int>(cell.size()); ++t)
        if (t != original) total += cell[static_cast<size_t>(t)];
    if (!(total > 0.0))
        throw std::runtime_error(
            "select_injected_token: no admissible token has positive probability");
    const double u = rng.uniform() * total;
    double acc = 0.0;
    int last = -1;
    for (int t = kNumReservedIds; t < static_cast<int>(cell.size()); ++t) {
        if (t == original) continue;
        const double p = cell[static_cast<size_t>(t)];
        if (p <= 0.0) continue;
        acc += p;
        last = t;
        if (u < acc) return t;
    }
    return last;  // floating-point tail: u landed at or past the final cumsum
}

} // namespace

std::string to_string(AttackMode mode) {
    switch (mode) {
        case AttackMode::Substitution: return "substitution";
        case AttackMode::Conditioned: return "conditioned";
    }
    throw std::invalid_argument("to_string: bad AttackMode");
}

std::string to_string(CellSelection selection) {
    switch (selection) {
        case CellSelection::FixedCell: return "fixed_cell";
        case CellSelection::GridSweep: return "grid_sweep";
        case CellSelection::TopProbExcludingOriginal: return "top_prob_excluding_original";
    }
    throw std::invalid_argument("to_string: bad CellSelection");
}

std::string to_string(TokenChoice choice) {
    switch (choice) {
        case TokenChoice::ArgmaxDistinct: return "argmax_distinct";
        case TokenChoice::SampleDistinct: return "sample_distinct";
    }
    throw std::invalid_argument("to_string: bad TokenChoice");
}

AttackMode attack_mode_from_string(const std::string& s) {
    if (s == "substitution") return AttackMode::Substitution;
    if (s == "conditioned") return AttackMode::Conditioned;
    throw std::invalid_argument("unknown attack mode: '" + s + "'");
}

CellSelection cell_selection_from_string(const std::string& s) {
    if (s == "fixed_cell") return CellSelection::FixedCell;
    if (s == "grid_sweep") return CellSelection::GridSweep;
    if (s == "top_prob_excluding_original") return CellSelection::TopProbExcludingOriginal;
    throw std::invalid_argument("unknown cell selection: '" + s + "'");
}

TokenChoice token_choice_from_string(const std::string& s) {
    if (s == "argmax_distinct") return TokenChoice::ArgmaxDistinct;
    if (s == "sample_distinct") return TokenChoice::SampleDistinct;
    throw std::invalid_argument("unknown token choice: '" + s + "'");
}

SelectedCell select_injected_token(const LensGrid& grid, const TokenSequence& tokens,
                                   const AttackSpec& spec, SeededRng& rng) {
    check_grid_matches(grid, tokens);
    const int n = tokens.size();

    int layer = spec.layer;
    int position = spec.position;
    if (spec.selection == CellSelection::TopProbExcludingOriginal) {
        // Best admissible probability over all cells at substitutable
        // positions; the last position is excluded like everywhere else so
        // every selected cell can also drive a conditioned attack.
        layer = position = -1;
        double best_p = 0.0;
        for (int l = 1; l <= grid.num_layers; ++l) {
            for (int x = 1; x < n; ++x) {
                if (is_structural(tokens.ids[static_cast<size_t>(x - 1)])) continue;
                const int t = best_admissible(grid.cell(l, x),
                                              tokens.ids[static_cast<size_t>(x - 1)]);
                if (t >= 0 && grid.cell(l, x)[static_cast<size_t>(t)] > best_p) {
                    best_p = grid.cell(l, x)[static_cast<size_t>(t)];
                    layer = l;
                    position = x;
                }
            }
        }
        if (layer < 0)
            throw std::runtime_error(
                "select_injected_token: no admissible cell in the grid");
    } else {
        if (layer < 1 || layer > grid.num_layers || position < 1 ||
            position > grid.num_positions)
            throw std::invalid_argument("select_injected_token: cell (" +
                                        std::to_string(layer) + ", " +
                                        std::to_string(position) + ") is out of bounds");
        if (position >= n)
            throw std::invalid_argument(
                "select_injected_token: sequence length must exceed the attacked position");
        if (is_structural(tokens.ids[static_cast<size_t>(position - 1)]))
            throw std::invalid_argument("select_injected_token: position " +
                                        std::to_string(position) +
                                        " holds a structural token");
    }

    SelectedCell out;
    out.layer = layer;
    out.position = position;
    out.token = draw_admissible(grid.cell(layer, position),
                                tokens.ids[static_cast<size_t>(position - 1)],
                                spec.token_choice, rng);
    return out;
}

TokenSequence substitute_token(const TokenSequence& tokens, int position, int token) {
    if (position < 1 || position > tokens.size())
        throw std::invalid_argument("substitute_token: position out of range");
    TokenSequence out = tokens;
    out.ids[static_cast<size_t>(position - 1)] = token;
    return out;
}

TokenSequence conditioned_generate(const TransformerModel& m, const TokenSequence& tokens,
                                   int position, int token, int max_new_tokens,
                                   TokenChoice choice, SeededRng& rng) {
    const int n = tokens.size();
    if (position < 1 || position > n)
        throw std::invalid_argument("conditioned_generate: position out of range");
    if (max_new_tokens < -1)
        throw std::invalid_argument(
            "conditioned_generate: max_new_tokens must be >= 0, or -1 for length-preserving");
    if (position > m.config.max_seq_len)
        throw std::invalid_argument(
            "conditioned_generate: prefix exceeds the model context window");

    TokenSequence prefix;
    prefix.ids.assign(tokens.ids.begin(), tokens.ids.begin() + (position - 1));
    prefix.ids.push_back(token);

    const int budget = max_new_tokens < 0 ? n - position : max_new_tokens;
    const SampleStrategy strategy = choice == TokenChoice::ArgmaxDistinct
                                        ? SampleStrategy::Argmax
                                        : SampleStrategy::Categorical;
    return generate(m, prefix, budget, strategy, rng);
}

std::optional<AdversarialExample> generate_adversarial(const TransformerModel& m,
                                                       const TranslatorStack& st,
                                                       const TokenSequence& tokens,
                                                       const AttackSpec& spec, uint64_t seed) {
    if (spec.selection != CellSelection::TopProbExcludingOriginal &&
        tokens.size() <= spec.position)
        return std::nullopt;

    const LensGrid grid = compute_lens_grid(m, st, tokens);
    SeededRng rng(seed);
    const SelectedCell cell = select_injected_token(grid, tokens, spec, rng);

    AdversarialExample ex;
    ex.original = tokens;
    ex.layer = cell.layer;
    ex.position = cell.position;
    ex.original_token = tokens.ids[static_cast<size_t>(cell.position - 1)];
    ex.injected_token = cell.token;
    ex.mode = spec.mode;
    ex.lens_prob_of_injected =
        grid.cell(cell.layer, cell.position)[static_cast<size_t>(cell.token)];
    ex.seed = seed;
    ex.perturbed = spec.mode == AttackMode::Substitution
                       ? substitute_token(tokens, cell.position, cell.token)
                       : conditioned_generate(m, tokens, cell.position, cell.token,
                                              spec.max_new_tokens, spec.token_choice, rng);
    return ex;
}

std::string adversarial_to_json_line(const AdversarialExample& ex, const Vocab& vocab) {
    nlohmann::ordered_json j;
    j["original_text"] = decode(vocab, ex.original);
    j["perturbed_text"] = decode(vocab, ex.perturbed);
    j["layer"] = ex.layer;
    j["position"] = ex.position;
    j["original_token"] = vocab.token(ex.original_token);
    j["injected_token"] = vocab.token(ex.injected_token);
    j["mode"] = to_string(ex.mode);
    j["lens_prob_of_injected"] = ex.lens_prob_of_injected;
    j["seed"] = ex.seed;
    return j.dump();
}

} // namespace lenslab
