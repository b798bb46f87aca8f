#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lenslab/lens.hpp"
#include "lenslab/model.hpp"
#include "lenslab/pipeline.hpp"
#include "lenslab/text.hpp"

using namespace lenslab;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    std::string path;
    explicit TempDir(const std::string& name) : path("/tmp/lenslab_pipeline_" + name) {
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("committed data fixtures regenerate byte-identically") {
    TempDir dir("fixtures");
    const RunConfig cfg;  // default seed
    const GenDataOutcome out = run_gen_data(cfg, dir.path, 75);
    CHECK(out.corpus_lines == 3000);
    CHECK(out.instances == 75);

    const std::string data_dir = LENSLAB_DATA_DIR;
    CHECK(slurp(out.corpus_path) == slurp(data_dir + "/corpus.txt"));
    CHECK(slurp(out.dataset_path) == slurp(data_dir + "/eval_75.jsonl"));

    // A second generation into the same directory overwrites with the same
    // bytes.
    const GenDataOutcome again = run_gen_data(cfg, dir.path, 75);
    CHECK(slurp(again.corpus_path) == slurp(out.corpus_path));
}

TEST_CASE("stage seeds are distinct per role and stable across calls") {
    const uint64_t run = 7;
    const std::vector<uint64_t> roles = {
        corpus_seed(run),     model_init_seed(run),   lm_train_seed(run),
        lens_train_seed(run), eval_set_seed(run),     sweep_master_seed(run),
        single_attack_seed(run),
    };
    std::set<uint64_t> distinct(roles.begin(), roles.end());
    distinct.insert(run);
    CHECK(distinct.size() == roles.size() + 1);  // all roles differ, none equals the run seed

    CHECK(corpus_seed(run) == roles[0]);
    CHECK(sweep_master_seed(run) == roles[5]);
    CHECK(corpus_seed(run) != corpus_seed(run + 1));
}

TEST_CASE("corpus and eval set regenerate identically from the run seed") {
    const auto c1 = make_corpus(11);
    const auto c2 = make_corpus(11);
    CHECK(c1 == c2);
    CHECK(c1.size() == 3000);

    const auto e1 = make_eval_set(11, 10);
    const auto e2 = make_eval_set(11, 10);
    REQUIRE(e1.size() == 10);
    for (size_t i = 0; i < e1.size(); ++i) {
        CHECK(e1[i].chosen == e2[i].chosen);
        CHECK(e1[i].rejected == e2[i].rejected);
    }
}

TEST_CASE("probe csv is ranked, parseable, and exact") {
    const std::vector<std::string> corpus = {
        "evidence research data studies say so",
        "whatever dunno stuff vibes say so",
        "experts survey verified documented say so",
    };
    const Vocab vocab = build_vocab(corpus, 64);
    ModelConfig mc;
    mc.num_layers = 2;
    mc.num_heads = 2;
    mc.d_model = 16;
    mc.d_ff = 24;
    mc.vocab_size = vocab.size();
    mc.init_seed = 5;
    const TransformerModel m = init_model(mc);
    const TranslatorStack stack = init_translators(m);
    const TokenSequence seq = encode(vocab, "evidence say so");
    const int n = static_cast<int>(seq.ids.size());

    const std::string csv = probe_csv(m, stack, vocab, seq, 3);
    const auto lines = split_lines(csv);
    REQUIRE(lines.size() == 1 + static_cast<size_t>(mc.num_layers * n * 3));
    CHECK(lines[0] == "layer,position,rank,token_id,token,prob");

    // Ranked per cell: rank column cycles 1,2,3 with descending probabilities.
    double prev_prob = 2.0;
    for (size_t i = 1; i < lines.size(); ++i) {
        int layer = 0, position = 0, rank = 0, token_id = 0;
        char token[64] = {0};
        double prob = -1.0;
        REQUIRE(std::sscanf(lines[i].c_str(), "%d,%d,%d,%d,%63[^,],%lf", &layer, &position,
                            &rank, &token_id, token, &prob) == 6);
        CHECK(layer >= 1);
        CHECK(layer <= mc.num_layers);
        CHECK(position >= 1);
        CHECK(position <= n);
        CHECK(rank == static_cast<int>((i - 1) % 3) + 1);
        CHECK(token_id >= 0);
        CHECK(token_id < vocab.size());
        CHECK(prob > 0.0);
        CHECK(prob <= 1.0);
        if (rank > 1) CHECK(prob <= prev_prob);
        prev_prob = prob;

        // Printed probabilities parse back to the exact lens value.
        const ProbVector dist = lens_distribution(m, stack, seq, layer, position);
        CHECK(prob == dist.p[static_cast<size_t>(token_id)]);
    }

    // top_k <= 0 dumps the whole vocabulary per cell.
    const std::string full = probe_csv(m, stack, vocab, seq, 0);
    CHECK(split_lines(full).size() ==
          1 + static_cast<size_t>(mc.num_layers * n * vocab.size()));

    CHECK(probe_csv(m, stack, vocab, seq, 3) == csv);
}

TEST_CASE("single attack produces an example or a skip signal") {
    TempDir dir("attack");
    std::filesystem::create_directories(dir.path);

    const std::vector<std::string> corpus = {
        "evidence research data studies say so and more words here",
        "whatever dunno stuff vibes say so and fewer words here",
    };
    const Vocab vocab = build_vocab(corpus, 64);
    ModelConfig mc;
    mc.num_layers = 2;
    mc.num_heads = 2;
    mc.d_model = 16;
    mc.d_ff = 24;
    mc.vocab_size = vocab.size();
    mc.init_seed = 9;
    const TransformerModel m = init_model(mc);
    const TranslatorStack stack = init_translators(m);

    RunConfig cfg;
    cfg.model_path = dir.path + "/model.ckpt";
    cfg.vocab_path = dir.path + "/vocab.txt";
    cfg.translators_path = dir.path + "/translators.ckpt";
    save_model(m, cfg.model_path);
    save_vocab(cfg.vocab_path, vocab);
    save_translators(cfg.translators_path, stack);
    cfg.attack.layer = 2;
    cfg.attack.position = 4;

    std::string json_line;
    const auto ex = run_single_attack(cfg, "evidence research data studies say so", &json_line);
    REQUIRE(ex.has_value());
    CHECK(ex->layer == 2);
    CHECK(ex->position == 4);
    CHECK(!json_line.empty());
    CHECK(json_line.find("\"layer\"") != std::string::npos);

    // Deterministic: the same call yields the same serialized record.
    std::string json_again;
    const auto ex2 = run_single_attack(cfg, "evidence research data studies say so", &json_again);
    REQUIRE(ex2.has_value());
    CHECK(json_again == json_line);

    // Too few tokens for the configured position: the skip signal.
    cfg.attack.position = 12;
    std::string untouched = "sentinel";
    const auto skipped = run_single_attack(cfg, "say so", &untouched);
    CHECK(!skipped.has_value());
    CHECK(untouched == "sentinel");
}

} // TEST_SUITE("pipeline")
