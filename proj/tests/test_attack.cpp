#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lenslab/attack.hpp"
#include "lenslab/lens.hpp"
#include "lenslab/model.hpp"
#include "lenslab/rng.hpp"
#include "lenslab/text.hpp"

using namespace lenslab;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 12;
    cfg.vocab_size = 17;
    cfg.max_seq_len = 16;
    cfg.init_seed = 5;
    return cfg;
}

TokenSequence make_seq(std::initializer_list<int> ids) {
    TokenSequence s;
    s.ids.assign(ids);
    return s;
}

// All-zero grid with matching provenance hash, for hand-planted cells.
LensGrid hand_grid(const TokenSequence& tokens, int layers, int vocab) {
    LensGrid g;
    g.num_layers = layers;
    g.num_positions = tokens.size();
    g.probs.assign(static_cast<size_t>(layers), Matrix(tokens.size(), vocab));
    g.sequence_hash = sequence_hash(tokens);
    return g;
}

AttackSpec cell_spec(int layer, int position,
                     TokenChoice choice = TokenChoice::ArgmaxDistinct) {
    AttackSpec spec;
    spec.layer = layer;
    spec.position = position;
    spec.token_choice = choice;
    return spec;
}

} // namespace

TEST_CASE("attack enum names round-trip and reject unknowns") {
    for (AttackMode m : {AttackMode::Substitution, AttackMode::Conditioned})
        CHECK(attack_mode_from_string(to_string(m)) == m);
    for (CellSelection s : {CellSelection::FixedCell, CellSelection::GridSweep,
                            CellSelection::TopProbExcludingOriginal})
        CHECK(cell_selection_from_string(to_string(s)) == s);
    for (TokenChoice c : {TokenChoice::ArgmaxDistinct, TokenChoice::SampleDistinct})
        CHECK(token_choice_from_string(to_string(c)) == c);
    CHECK_THROWS_AS(attack_mode_from_string("both"), std::invalid_argument);
    CHECK_THROWS_AS(cell_selection_from_string(""), std::invalid_argument);
    CHECK_THROWS_AS(token_choice_from_string("argmax"), std::invalid_argument);
}

TEST_CASE("argmax selection takes the highest admissible token") {
    const TokenSequence tokens = make_seq({0, 5, 7});
    LensGrid g = hand_grid(tokens, 1, 16);
    SeededRng rng(1);

    // One-hot mass away from the original.
    g.probs[0](1, 9) = 1.0;
    SelectedCell sel = select_injected_token(g, tokens, cell_spec(1, 2), rng);
    CHECK(sel.layer == 1);
    CHECK(sel.position == 2);
    CHECK(sel.token == 9);

    // Mass peaked on the original token 5: the runner-up must be returned.
    g.probs[0].fill(0.0);
    g.probs[0](1, 5) = 0.7;
    g.probs[0](1, 11) = 0.2;
    g.probs[0](1, 6) = 0.1;
    sel = select_injected_token(g, tokens, cell_spec(1, 2), rng);
    CHECK(sel.token == 11);

    // Reserved ids are not admissible even when they dominate the cell.
    g.probs[0].fill(0.0);
    g.probs[0](1, kUnkId) = 0.9;
    g.probs[0](1, 7) = 0.1;
    sel = select_injected_token(g, tokens, cell_spec(1, 2), rng);
    CHECK(sel.token == 7);

    // Probability ties break toward the lowest admissible id.
    g.probs[0].fill(0.0);
    g.probs[0](1, 12) = 0.5;
    g.probs[0](1, 8) = 0.5;
    sel = select_injected_token(g, tokens, cell_spec(1, 2), rng);
    CHECK(sel.token == 8);
}

TEST_CASE("argmax selection matches a brute-force scan on random grids") {
    SeededRng rng(99);
    for (int iter = 0; iter < 1000; ++iter) {
        const int vocab = 8 + static_cast<int>(rng.uniform_int(17));
        const int n = 3 + static_cast<int>(rng.uniform_int(8));
        const int layers = 1 + static_cast<int>(rng.uniform_int(3));

        TokenSequence tokens;
        tokens.ids.push_back(kBosId);
        for (int i = 1; i < n; ++i)
            tokens.ids.push_back(kNumReservedIds +
                                 static_cast<int>(rng.uniform_int(
                                     static_cast<uint64_t>(vocab - kNumReservedIds))));

        LensGrid g = hand_grid(tokens, layers, vocab);
        for (Matrix& mat : g.probs)
            for (double& v : mat.data) v = rng.uniform();

        const int layer = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(layers)));
        const int position = 2 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - 2)));
        const int original = tokens.ids[static_cast<size_t>(position - 1)];

        const SelectedCell sel =
            select_injected_token(g, tokens, cell_spec(layer, position), rng);

        int best = -1;
        double best_p = 0.0;
        const auto cell = g.cell(layer, position);
        for (int t = kNumReservedIds; t < vocab; ++t) {
            if (t == original) continue;
            if (cell[static_cast<size_t>(t)] > best_p) {
                best_p = cell[static_cast<size_t>(t)];
                best = t;
            }
        }
        REQUIRE(sel.token == best);
        REQUIRE(sel.token != original);
        REQUIRE(!Vocab::is_reserved(sel.token));
    }
}

TEST_CASE("sampled selection follows the admissible cell mass") {
    const TokenSequence tokens = make_seq({0, 5, 7});
    LensGrid g = hand_grid(tokens, 1, 16);
    g.probs[0](1, 5) = 0.5;  // original: excluded from the draw
    g.probs[0](1, 7) = 0.375;
    g.probs[0](1, 9) = 0.125;

    SeededRng rng(7);
    int took_7 = 0;
    const int draws = 4000;
    for (int i = 0; i < draws; ++i) {
        const SelectedCell sel = select_injected_token(
            g, tokens, cell_spec(1, 2, TokenChoice::SampleDistinct), rng);
        REQUIRE((sel.token == 7 || sel.token == 9));
        if (sel.token == 7) ++took_7;
    }
    // Renormalized admissible mass is 0.75 / 0.25.
    CHECK(std::abs(static_cast<double>(took_7) / draws - 0.75) < 0.03);

    SeededRng a(123), b(123);
    CHECK(select_injected_token(g, tokens, cell_spec(1, 2, TokenChoice::SampleDistinct), a).token ==
          select_injected_token(g, tokens, cell_spec(1, 2, TokenChoice::SampleDistinct), b).token);
}

TEST_CASE("selection rejects bad cells, foreign grids, and degenerate mass") {
    const TokenSequence tokens = make_seq({0, 5, 7, 9});
    LensGrid g = hand_grid(tokens, 2, 16);
    for (Matrix& mat : g.probs)
        for (double& v : mat.data) v = 1.0 / 16.0;
    SeededRng rng(3);

    CHECK_THROWS_AS(select_injected_token(g, make_seq({0, 5, 7}), cell_spec(1, 2), rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(select_injected_token(g, tokens, cell_spec(0, 2), rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(select_injected_token(g, tokens, cell_spec(3, 2), rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(select_injected_token(g, tokens, cell_spec(1, 0), rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(select_injected_token(g, tokens, cell_spec(1, 5), rng),
                    std::invalid_argument);
    // The sequence must extend past the attacked position.
    CHECK_THROWS_AS(select_injected_token(g, tokens, cell_spec(1, 4), rng),
                    std::invalid_argument);
    // Position 1 holds <bos>.
    CHECK_THROWS_AS(select_injected_token(g, tokens, cell_spec(1, 1), rng),
                    std::invalid_argument);

    // Sweep-issued specs resolve exactly like fixed cells.
    AttackSpec sweep = cell_spec(2, 3);
    sweep.selection = CellSelection::GridSweep;
    CHECK(select_injected_token(g, tokens, sweep, rng).token ==
          select_injected_token(g, tokens, cell_spec(2, 3), rng).token);

    // Entire mass on the original token: every admissible token has zero
    // probability, in both choice modes.
    LensGrid degen = hand_grid(tokens, 1, 16);
    degen.probs[0](1, 5) = 1.0;
    CHECK_THROWS_AS(select_injected_token(degen, tokens, cell_spec(1, 2), rng),
                    std::runtime_error);
    CHECK_THROWS_AS(
        select_injected_token(degen, tokens, cell_spec(1, 2, TokenChoice::SampleDistinct), rng),
        std::runtime_error);
}

TEST_CASE("top-prob selection scans admissible cells only") {
    const TokenSequence tokens = make_seq({0, 6, 7, 8});
    SeededRng rng(11);
    AttackSpec spec;
    spec.selection = CellSelection::TopProbExcludingOriginal;

    LensGrid g = hand_grid(tokens, 2, 16);
    g.probs[0](0, 10) = 0.95;  // position 1 holds <bos>: never attacked
    g.probs[1](3, 11) = 0.99;  // last position: excluded so suffixes exist
    g.probs[0](1, 12) = 0.9;
    g.probs[1](2, 11) = 0.9;

    // Tie at 0.9 breaks toward the lowest layer.
    SelectedCell sel = select_injected_token(g, tokens, spec, rng);
    CHECK(sel.layer == 1);
    CHECK(sel.position == 2);
    CHECK(sel.token == 12);

    // Mass on a cell's own original token does not count for the scan.
    g.probs[0](1, 12) = 0.0;
    g.probs[0](1, 6) = 0.97;  // original token at position 2
    sel = select_injected_token(g, tokens, spec, rng);
    CHECK(sel.layer == 2);
    CHECK(sel.position == 3);
    CHECK(sel.token == 11);

    // No admissible cell at all: only <bos> precedes the final position.
    const TokenSequence two = make_seq({0, 9});
    LensGrid g2 = hand_grid(two, 1, 16);
    g2.probs[0].fill(0.1);
    CHECK_THROWS_AS(select_injected_token(g2, two, spec, rng), std::runtime_error);
}

TEST_CASE("substitution is total and always a single-token edit") {
    const TokenSequence tokens = make_seq({0, 5, 7, 9});

    // Identity case: the distinctness rule lives in selection, not here.
    CHECK(substitute_token(tokens, 2, 5) == tokens);

    TokenSequence one = make_seq({8});
    const TokenSequence swapped = substitute_token(one, 1, 4);
    CHECK(swapped.size() == 1);
    CHECK(swapped.ids[0] == 4);

    CHECK_THROWS_AS(substitute_token(tokens, 0, 4), std::invalid_argument);
    CHECK_THROWS_AS(substitute_token(tokens, 5, 4), std::invalid_argument);

    SeededRng rng(21);
    for (int iter = 0; iter < 200; ++iter) {
        const int n = 1 + static_cast<int>(rng.uniform_int(12));
        TokenSequence t;
        for (int i = 0; i < n; ++i) t.ids.push_back(static_cast<int>(rng.uniform_int(40)));
        const int x = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
        int injected = static_cast<int>(rng.uniform_int(40));
        if (injected == t.ids[static_cast<size_t>(x - 1)]) injected = (injected + 1) % 40;

        const TokenSequence out = substitute_token(t, x, injected);
        REQUIRE(out.size() == n);
        int diffs = 0;
        for (int i = 0; i < n; ++i)
            if (out.ids[static_cast<size_t>(i)] != t.ids[static_cast<size_t>(i)]) {
                ++diffs;
                REQUIRE(i == x - 1);
            }
        REQUIRE(diffs == 1);
        REQUIRE(out.ids[static_cast<size_t>(x - 1)] == injected);
    }
}

TEST_CASE("conditioned generation preserves the prefix and the budget") {
    const TransformerModel m = init_model(tiny_config());
    const TokenSequence tokens = make_seq({0, 5, 7, 9, 11, 13, 4, 6, 8, 10});
    SeededRng rng(2);

    // Zero budget: the output is exactly the forced prefix.
    TokenSequence out = conditioned_generate(m, tokens, 4, 12, 0,
                                             TokenChoice::ArgmaxDistinct, rng);
    REQUIRE(out.size() == 4);
    CHECK(out.ids == std::vector<int>({0, 5, 7, 12}));

    // Length-preserving default: at most the original length, and the first
    // position - 1 tokens plus the injection are untouched.
    out = conditioned_generate(m, tokens, 4, 12, -1, TokenChoice::ArgmaxDistinct, rng);
    REQUIRE(out.size() >= 4);
    REQUIRE(out.size() <= tokens.size());
    for (int i = 0; i < 3; ++i) CHECK(out.ids[static_cast<size_t>(i)] == tokens.ids[static_cast<size_t>(i)]);
    CHECK(out.ids[3] == 12);

    // Explicit budget.
    out = conditioned_generate(m, tokens, 4, 12, 3, TokenChoice::ArgmaxDistinct, rng);
    CHECK(out.size() <= 7);

    // Sampled continuation is deterministic under equal seeds.
    SeededRng a(5), b(5);
    CHECK(conditioned_generate(m, tokens, 4, 12, -1, TokenChoice::SampleDistinct, a) ==
          conditioned_generate(m, tokens, 4, 12, -1, TokenChoice::SampleDistinct, b));

    CHECK_THROWS_AS(conditioned_generate(m, tokens, 0, 12, -1, TokenChoice::ArgmaxDistinct, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(conditioned_generate(m, tokens, 11, 12, -1, TokenChoice::ArgmaxDistinct, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(conditioned_generate(m, tokens, 4, 12, -2, TokenChoice::ArgmaxDistinct, rng),
                    std::invalid_argument);

    TokenSequence long_seq;
    for (int i = 0; i < 20; ++i) long_seq.ids.push_back(4 + (i % 10));
    CHECK_THROWS_AS(
        conditioned_generate(m, long_seq, 18, 12, -1, TokenChoice::ArgmaxDistinct, rng),
        std::invalid_argument);
}

TEST_CASE("greedy conditioned generation equals a step-wise forward replay") {
    const TransformerModel m = init_model(tiny_config());
    const TokenSequence tokens = make_seq({0, 5, 7, 9, 11, 13, 4, 6, 8, 10});
    const int position = 5;
    const int injected = 14;
    SeededRng rng(3);

    const TokenSequence out =
        conditioned_generate(m, tokens, position, injected, -1, TokenChoice::ArgmaxDistinct, rng);

    TokenSequence replay;
    replay.ids.assign(tokens.ids.begin(), tokens.ids.begin() + (position - 1));
    replay.ids.push_back(injected);
    const int budget = tokens.size() - position;
    for (int step = 0; step < budget; ++step) {
        if (replay.size() >= m.config.max_seq_len) break;
        const HiddenStates hs = forward(m, replay);
        const double* row = hs.logits.row(hs.logits.rows - 1);
        int best = 0;
        for (int t = 1; t < hs.logits.cols; ++t)
            if (row[t] > row[best]) best = t;
        replay.ids.push_back(best);
        if (best == kEosId) break;
    }
    CHECK(out == replay);
}

TEST_CASE("adversarial substitution satisfies the full contract") {
    const TransformerModel m = init_model(tiny_config());
    const TranslatorStack st = init_translators(m);
    const TokenSequence tokens = make_seq({0, 5, 7, 9, 11, 13, 4, 6, 8, 10, 12, 14});

    AttackSpec spec = cell_spec(2, 3);
    const auto ex = generate_adversarial(m, st, tokens, spec, 77);
    REQUIRE(ex.has_value());

    CHECK(ex->original == tokens);
    CHECK(ex->layer == 2);
    CHECK(ex->position == 3);
    CHECK(ex->mode == AttackMode::Substitution);
    CHECK(ex->seed == 77);
    CHECK(ex->original_token == 7);
    CHECK(ex->injected_token != ex->original_token);
    CHECK(!Vocab::is_reserved(ex->injected_token));

    REQUIRE(ex->perturbed.size() == tokens.size());
    for (int i = 0; i < tokens.size(); ++i) {
        if (i == 2)
            CHECK(ex->perturbed.ids[static_cast<size_t>(i)] == ex->injected_token);
        else
            CHECK(ex->perturbed.ids[static_cast<size_t>(i)] == tokens.ids[static_cast<size_t>(i)]);
    }

    // The recorded lens probability is the grid cell's value, bit for bit,
    // and the injected token is that cell's admissible argmax.
    const LensGrid grid = compute_lens_grid(m, st, tokens);
    const auto cell = grid.cell(2, 3);
    CHECK(ex->lens_prob_of_injected == cell[static_cast<size_t>(ex->injected_token)]);
    int best = -1;
    double best_p = 0.0;
    for (int t = kNumReservedIds; t < static_cast<int>(cell.size()); ++t) {
        if (t == 7) continue;
        if (cell[static_cast<size_t>(t)] > best_p) {
            best_p = cell[static_cast<size_t>(t)];
            best = t;
        }
    }
    CHECK(ex->injected_token == best);

    // Determinism: equal calls give equal examples, and the argmax choice
    // does not depend on the seed.
    const auto again = generate_adversarial(m, st, tokens, spec, 77);
    REQUIRE(again.has_value());
    CHECK(again->perturbed == ex->perturbed);
    CHECK(again->injected_token == ex->injected_token);
    CHECK(again->lens_prob_of_injected == ex->lens_prob_of_injected);
    const auto other_seed = generate_adversarial(m, st, tokens, spec, 78);
    REQUIRE(other_seed.has_value());
    CHECK(other_seed->injected_token == ex->injected_token);
}

TEST_CASE("conditioned adversarial examples keep the prefix and the injection") {
    const TransformerModel m = init_model(tiny_config());
    const TranslatorStack st = init_translators(m);
    const TokenSequence tokens = make_seq({0, 5, 7, 9, 11, 13, 4, 6, 8, 10});

    AttackSpec spec = cell_spec(1, 4);
    spec.mode = AttackMode::Conditioned;
    const auto ex = generate_adversarial(m, st, tokens, spec, 5);
    REQUIRE(ex.has_value());
    CHECK(ex->mode == AttackMode::Conditioned);
    REQUIRE(ex->perturbed.size() >= 4);
    CHECK(ex->perturbed.size() <= tokens.size());
    for (int i = 0; i < 3; ++i)
        CHECK(ex->perturbed.ids[static_cast<size_t>(i)] == tokens.ids[static_cast<size_t>(i)]);
    CHECK(ex->perturbed.ids[3] == ex->injected_token);
    CHECK(ex->injected_token != ex->original_token);

    spec.max_new_tokens = 0;
    const auto stub = generate_adversarial(m, st, tokens, spec, 5);
    REQUIRE(stub.has_value());
    CHECK(stub->perturbed.size() == 4);
}

TEST_CASE("sequences not extending past the position are skipped") {
    const TransformerModel m = init_model(tiny_config());
    const TranslatorStack st = init_translators(m);
    const TokenSequence tokens = make_seq({0, 5, 7, 9, 11});

    CHECK(!generate_adversarial(m, st, tokens, cell_spec(1, 5), 1).has_value());
    CHECK(!generate_adversarial(m, st, tokens, cell_spec(1, 6), 1).has_value());
    CHECK(!generate_adversarial(m, st, tokens, cell_spec(1, 99), 1).has_value());
    CHECK(generate_adversarial(m, st, tokens, cell_spec(1, 4), 1).has_value());
}

TEST_CASE("adversarial json lines carry text, cell, and provenance") {
    const std::vector<std::string> corpus = {
        "alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo lima mike"};
    const Vocab vocab = build_vocab(corpus, 17);
    REQUIRE(vocab.size() == 17);

    AdversarialExample ex;
    ex.original = encode(vocab, "alpha bravo charlie delta");
    ex.perturbed = substitute_token(ex.original, 3, vocab.id_of("mike"));
    ex.layer = 2;
    ex.position = 3;
    ex.original_token = vocab.id_of("bravo");
    ex.injected_token = vocab.id_of("mike");
    ex.mode = AttackMode::Substitution;
    ex.lens_prob_of_injected = 0.34375;
    ex.seed = 123456789;

    const std::string line = adversarial_to_json_line(ex, vocab);
    CHECK(line.find('\n') == std::string::npos);

    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("original_text").get<std::string>() == "alpha bravo charlie delta");
    CHECK(j.at("perturbed_text").get<std::string>() == "alpha mike charlie delta");
    CHECK(j.at("layer").get<int>() == 2);
    CHECK(j.at("position").get<int>() == 3);
    CHECK(j.at("original_token").get<std::string>() == "bravo");
    CHECK(j.at("injected_token").get<std::string>() == "mike");
    CHECK(j.at("mode").get<std::string>() == "substitution");
    CHECK(j.at("lens_prob_of_injected").get<double>() == 0.34375);
    CHECK(j.at("seed").get<uint64_t>() == 123456789);
}
