// Command-line front end: every subcommand is a thin wrapper over the
// pipeline functions so scripted runs and in-process tests execute the same
// code paths.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

#include "lenslab/hash.hpp"
#include "lenslab/pipeline.hpp"

namespace {

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << content;
    os.close();
    if (!os) throw std::runtime_error("failed writing " + path);
}

} // namespace

int main(int argc, char** argv) {
    using namespace lenslab;

    CLI::App app{"lenslab: tuned-lens probes, lens-guided token attacks, and judge-accuracy "
                 "sweeps over a toy decoder-only language model"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string text;
    uint64_t seed = 0;
    int top = 8;
    int count = 75;
    bool full = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration file");
        sub->add_option("--seed", seed, "Run seed overriding the configuration");
        sub->add_option("--out", out_path, "Output path override");
    };

    CLI::App* train_model =
        app.add_subcommand("train-model", "Regenerate the corpus and train the language model");
    add_common(train_model);

    CLI::App* train_lens = app.add_subcommand(
        "train-lens", "Train the per-layer lens translators against the frozen model");
    add_common(train_lens);

    CLI::App* probe = app.add_subcommand("probe", "Dump the lens grid for a text as CSV");
    add_common(probe);
    probe->add_option("--text", text, "Text to probe")->required();
    probe->add_option("--top", top, "Ranked tokens per (layer, position) cell");
    probe->add_flag("--full", full, "Dump every token per cell");

    CLI::App* attack =
        app.add_subcommand("attack", "Generate one adversarial example for an argument text");
    add_common(attack);
    attack->add_option("--text", text, "Argument text to perturb")->required();

    CLI::App* sweep = app.add_subcommand(
        "sweep", "Attack every dataset instance over the (layer x position) grid and report");
    add_common(sweep);

    CLI::App* evaluate =
        app.add_subcommand("evaluate", "Judge clean preference accuracy on the dataset");
    add_common(evaluate);

    CLI::App* gen_data = app.add_subcommand(
        "gen-data", "Write the regenerable training corpus and evaluation set");
    add_common(gen_data);
    gen_data->add_option("--count", count, "Evaluation instances to generate");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        CLI::App* sub = app.get_subcommands().front();
        if (sub->count("--seed") > 0) cfg.seed = seed;
        const bool has_out = sub->count("--out") > 0;

        if (sub == train_model) {
            const TrainModelOutcome r = run_train_model(cfg);
            std::printf("corpus: %d sequences (%d train / %d holdout); vocabulary: %d tokens\n",
                        r.train_sequences + r.holdout_sequences, r.train_sequences,
                        r.holdout_sequences, r.vocab_size);
            std::printf("model: %d layers, %d heads, d_model %d, %lld parameters\n",
                        r.config.num_layers, r.config.num_heads, r.config.d_model,
                        static_cast<long long>(r.config.param_count()));
            std::printf("holdout cross-entropy: %.6f -> %.6f\n", r.holdout_ce_before,
                        r.holdout_ce_after);
            std::printf("wrote %s (fingerprint %s) and %s\n", cfg.model_path.c_str(),
                        fingerprint_hex(r.model_fp).c_str(), cfg.vocab_path.c_str());
        } else if (sub == train_lens) {
            const TrainLensOutcome r = run_train_lens(cfg);
            for (size_t l = 0; l < r.holdout_kl_after.size(); ++l)
                std::printf("layer %zu: holdout kl %.6f -> %.6f\n", l + 1,
                            r.holdout_kl_before[l], r.holdout_kl_after[l]);
            std::printf("wrote %s (fingerprint %s)\n", cfg.translators_path.c_str(),
                        fingerprint_hex(r.translator_fp).c_str());
        } else if (sub == probe) {
            const TransformerModel model = load_model(cfg.model_path);
            const Vocab vocab = load_vocab(cfg.vocab_path);
            const TranslatorStack stack = load_translators(cfg.translators_path, model);
            const std::string csv =
                probe_csv(model, stack, vocab, encode(vocab, text), full ? 0 : top);
            if (has_out) {
                write_text_file(out_path, csv);
                std::printf("wrote %s\n", out_path.c_str());
            } else {
                std::fputs(csv.c_str(), stdout);
            }
        } else if (sub == attack) {
            std::string json_line;
            const auto ex = run_single_attack(cfg, text, &json_line);
            if (!ex.has_value()) {
                std::fprintf(stderr,
                             "attack skipped: the text encodes to too few tokens to attack "
                             "position %d\n",
                             cfg.attack.position);
                return 2;
            }
            std::printf("%s\n", json_line.c_str());
            if (has_out) write_text_file(out_path, json_line + "\n");
        } else if (sub == sweep) {
            if (has_out) cfg.output_path = out_path;
            const SweepTable table = run_sweep_cmd(cfg);
            std::fputs(render_report(table, ReportFormat::TextHeatmap).c_str(), stdout);
            std::printf("wrote %s and %s\n", cfg.output_path.c_str(),
                        (cfg.output_path + ".heatmap.txt").c_str());
        } else if (sub == evaluate) {
            const EvaluateOutcome r = run_evaluate(cfg);
            nlohmann::ordered_json j;
            j["clean_accuracy"] = r.accuracy;
            j["correct"] = r.correct;
            j["instances"] = r.instances;
            const std::string line = j.dump();
            std::printf("%s\n", line.c_str());
            if (has_out) write_text_file(out_path, line + "\n");
        } else if (sub == gen_data) {
            const GenDataOutcome r =
                run_gen_data(cfg, has_out ? out_path : std::string("data"), count);
            std::printf("wrote %s (%d lines) and %s (%d instances)\n", r.corpus_path.c_str(),
                        r.corpus_lines, r.dataset_path.c_str(), r.instances);
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
