#include "lenslab/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "lenslab/hash.hpp"

namespace lenslab {

namespace {

using nlohmann::ordered_json;

void check_prompt_field(const char* name, const std::string& value) {
    if (value.empty())
        throw std::invalid_argument(std::string("build_prompt: empty ") + name);
    if (value.find('\n') != std::string::npos || value.find('\r') != std::string::npos)
        throw std::invalid_argument(std::string("build_prompt: ") + name +
                                    " contains a line break");
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

} // namespace

JudgePrompt default_judge_prompt(int num_exemplars) {
    if (num_exemplars < 0 || num_exemplars > 3)
        throw std::invalid_argument("default_judge_prompt: exemplar count must be in [0, 3]");

    // Pinned stream: the exemplar block is part of the judged artifact, so it
    // never varies with run seeds.
    SeededRng rng(0x6a756467ULL);
    const ThemeParams theme;
    const ArgumentQuality labels[3] = {ArgumentQuality::High, ArgumentQuality::Low,
                                       ArgumentQuality::Average};

    JudgePrompt prompt;
    prompt.instruction = rating_instruction();
    for (int i = 0; i < 3; ++i) {
        JudgeExemplar e;
        e.topic = topic_bank()[rng.uniform_int(topic_bank().size())];
        e.stance = stance_bank()[rng.uniform_int(stance_bank().size())];
        // Short arguments keep a full three-exemplar prompt inside the
        // context window; 9-10 words matches the training text's exemplars.
        e.argument = make_argument(rng, labels[i], theme, 9, 10);
        e.label = labels[i];
        prompt.exemplars.push_back(std::move(e));
    }
    prompt.exemplars.resize(static_cast<size_t>(num_exemplars));
    return prompt;
}

std::string build_prompt(const JudgePrompt& prompt, const std::string& topic,
                         const std::string& stance, const std::string& argument) {
    check_prompt_field("instruction", prompt.instruction);
    for (const JudgeExemplar& e : prompt.exemplars) {
        check_prompt_field("exemplar topic", e.topic);
        check_prompt_field("exemplar stance", e.stance);
        check_prompt_field("exemplar argument", e.argument);
    }
    check_prompt_field("topic", topic);
    check_prompt_field("stance", stance);
    check_prompt_field("argument", argument);

    std::string out = prompt.instruction;
    for (const JudgeExemplar& e : prompt.exemplars) {
        out += '\n';
        out += render_rating_block(e.topic, e.stance, e.argument);
        out += ' ';
        out += rating_labels()[static_cast<size_t>(e.label)];
    }
    out += '\n';
    out += render_rating_block(topic, stance, argument);
    return out;
}

JudgeVerdict judge_rating(const TransformerModel& m, const Vocab& vocab,
                          const JudgePrompt& prompt, const std::string& topic,
                          const std::string& stance, const std::string& argument) {
    std::array<int, 3> label_ids{};
    for (size_t k = 0; k < 3; ++k) {
        label_ids[k] = vocab.id_of(rating_labels()[k]);
        if (label_ids[k] < 0)
            throw std::runtime_error("judge_rating: label word '" + rating_labels()[k] +
                                     "' is not in the vocabulary");
    }

    // Drop exemplars head-first until the prompt fits the context window.
    TokenSequence seq;
    int dropped = -1;
    for (int drop = 0; drop <= static_cast<int>(prompt.exemplars.size()); ++drop) {
        JudgePrompt trimmed;
        trimmed.instruction = prompt.instruction;
        trimmed.exemplars.assign(prompt.exemplars.begin() + drop, prompt.exemplars.end());
        TokenSequence candidate = encode(vocab, build_prompt(trimmed, topic, stance, argument));
        if (candidate.size() <= m.config.max_seq_len) {
            seq = std::move(candidate);
            dropped = drop;
            break;
        }
    }
    if (dropped < 0)
        throw std::runtime_error(
            "judge_rating: prompt exceeds the context window even without exemplars");

    const HiddenStates hs = forward(m, seq);
    const double* row = hs.logits.row(hs.logits.rows - 1);
    const int vocab_size = hs.logits.cols;
    double mx = row[0];
    for (int j = 1; j < vocab_size; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < vocab_size; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);

    JudgeVerdict v;
    v.dropped_exemplars = dropped;
    for (size_t k = 0; k < 3; ++k) v.scores[k] = row[label_ids[k]] - lse;
    size_t best = 0;
    for (size_t k = 1; k < 3; ++k)
        if (v.scores[k] > v.scores[best]) best = k;  // ties keep the lower ordinal
    v.rating = static_cast<ArgumentQuality>(best);
    return v;
}

JudgeFn model_judge(const TransformerModel& m, const Vocab& vocab, const JudgePrompt& prompt) {
    // The callable references the model and vocabulary; they must outlive it.
    return [&m, &vocab, prompt](const std::string& topic, const std::string& stance,
                                const std::string& argument) {
        return judge_rating(m, vocab, prompt, topic, stance, argument);
    };
}

PreferenceResult preference_accuracy(const JudgeFn& judge,
                                     const std::vector<EvalInstance>& instances,
                                     const ArgumentOverrides* overrides) {
    if (instances.empty())
        throw std::invalid_argument("preference_accuracy: no instances");

    PreferenceResult out;
    out.records.reserve(instances.size());
    for (size_t i = 0; i < instances.size(); ++i) {
        const EvalInstance& inst = instances[i];
        const std::string* chosen = &inst.chosen;
        const std::string* rejected = &inst.rejected;
        if (overrides != nullptr) {
            const auto it = overrides->find(i);
            if (it != overrides->end()) {
                chosen = &it->second.first;
                rejected = &it->second.second;
            }
        }
        const JudgeVerdict vc = judge(inst.topic, inst.stance, *chosen);
        const JudgeVerdict vr = judge(inst.topic, inst.stance, *rejected);

        PreferenceRecord rec;
        rec.index = i;
        rec.chosen_rating = vc.rating;
        rec.rejected_rating = vr.rating;
        rec.correct = static_cast<int>(vc.rating) > static_cast<int>(vr.rating);
        rec.dropped_exemplars_chosen = vc.dropped_exemplars;
        rec.dropped_exemplars_rejected = vr.dropped_exemplars;
        out.correct += rec.correct ? 1 : 0;
        out.records.push_back(rec);
    }
    out.accuracy = static_cast<double>(out.correct) / static_cast<double>(instances.size());
    return out;
}

PreferenceResult preference_accuracy(const TransformerModel& m, const Vocab& vocab,
                                     const JudgePrompt& prompt,
                                     const std::vector<EvalInstance>& instances,
                                     const ArgumentOverrides* overrides) {
    return preference_accuracy(model_judge(m, vocab, prompt), instances, overrides);
}

const SweepCell& SweepTable::at(size_t layer_index, size_t position_index) const {
    if (layer_index >= layers.size() || position_index >= positions.size())
        throw std::out_of_range("SweepTable::at: index out of range");
    return cells.at(layer_index * positions.size() + position_index);
}

SweepTable run_sweep(const TransformerModel& m, const TranslatorStack& st, const Vocab& vocab,
                     const JudgePrompt& prompt, const std::vector<EvalInstance>& instances,
                     const SweepOptions& opts) {
    if (opts.layers.empty() || opts.positions.empty())
        throw std::invalid_argument("run_sweep: empty sweep axes");
    for (int l : opts.layers)
        if (l < 1 || l > st.num_layers)
            throw std::invalid_argument("run_sweep: layer " + std::to_string(l) +
                                        " outside the translator stack");
    for (int x : opts.positions)
        if (x < 1)
            throw std::invalid_argument("run_sweep: positions must be >= 1");
    if (instances.empty()) throw std::invalid_argument("run_sweep: no instances");
    if (st.num_layers != m.config.num_layers || st.d_model != m.config.d_model)
        throw std::invalid_argument("run_sweep: translator stack does not match the model");

    SweepTable table;
    table.layers = opts.layers;
    table.positions = opts.positions;
    table.mode = opts.mode;
    table.token_choice = opts.token_choice;
    table.max_new_tokens = opts.max_new_tokens;
    table.attack_chosen_only = opts.attack_chosen_only;
    table.master_seed = opts.seed;
    table.model_fp = model_fingerprint(m);
    table.translator_fp = translator_fingerprint(st);
    table.instance_count = static_cast<int>(instances.size());

    const JudgeFn judge = model_judge(m, vocab, prompt);
    const PreferenceResult clean = preference_accuracy(judge, instances);
    table.clean_accuracy = clean.accuracy;
    table.clean_correct = clean.correct;

    table.cells.reserve(opts.layers.size() * opts.positions.size());
    for (int l : opts.layers) {
        for (int x : opts.positions) {
            SweepCell cell;
            cell.layer = l;
            cell.position = x;

            const uint64_t cell_seed =
                SeededRng::derive(opts.seed, static_cast<uint64_t>(l), static_cast<uint64_t>(x));
            AttackSpec spec;
            spec.mode = opts.mode;
            spec.layer = l;
            spec.position = x;
            spec.selection = CellSelection::GridSweep;
            spec.token_choice = opts.token_choice;
            spec.max_new_tokens = opts.max_new_tokens;

            std::vector<EvalInstance> attacked_instances;
            for (size_t i = 0; i < instances.size(); ++i) {
                const EvalInstance& inst = instances[i];
                try {
                    const auto chosen_ex = generate_adversarial(
                        m, st, encode(vocab, inst.chosen), spec,
                        SeededRng::derive(cell_seed, 2 * static_cast<uint64_t>(i)));
                    std::optional<AdversarialExample> rejected_ex;
                    if (!opts.attack_chosen_only)
                        rejected_ex = generate_adversarial(
                            m, st, encode(vocab, inst.rejected), spec,
                            SeededRng::derive(cell_seed, 2 * static_cast<uint64_t>(i) + 1));
                    // An instance is judged only when every attacked side has
                    // an example; a too-short argument skips the whole pair.
                    if (!chosen_ex || (!opts.attack_chosen_only && !rejected_ex)) {
                        ++cell.skipped;
                        continue;
                    }
                    EvalInstance attacked = inst;
                    attacked.chosen = decode(vocab, chosen_ex->perturbed);
                    if (rejected_ex) attacked.rejected = decode(vocab, rejected_ex->perturbed);
                    attacked_instances.push_back(std::move(attacked));
                } catch (const std::exception&) {
                    ++cell.failures;
                    ++cell.skipped;
                }
            }

            if (!attacked_instances.empty()) {
                const PreferenceResult r = preference_accuracy(judge, attacked_instances);
                cell.correct = r.correct;
                cell.evaluated = static_cast<int>(attacked_instances.size());
                cell.accuracy =
                    static_cast<double>(cell.correct) / static_cast<double>(cell.evaluated);
            }
            table.cells.push_back(cell);
        }
    }
    return table;
}

namespace {

std::string render_csv(const SweepTable& t) {
    std::string out;
    for (int x : t.positions) {
        out += ',';
        out += std::to_string(x);
    }
    out += '\n';
    for (size_t li = 0; li < t.layers.size(); ++li) {
        out += std::to_string(t.layers[li]);
        for (size_t pi = 0; pi < t.positions.size(); ++pi) {
            out += ',';
            out += fmt3(t.at(li, pi).accuracy);
        }
        out += '\n';
    }
    out += "\n# metadata\n";
    out += "clean_accuracy," + fmt3(t.clean_accuracy) + '\n';
    out += "clean_correct," + std::to_string(t.clean_correct) + '\n';
    out += "instances," + std::to_string(t.instance_count) + '\n';
    out += "mode," + to_string(t.mode) + '\n';
    out += "token_choice," + to_string(t.token_choice) + '\n';
    out += "max_new_tokens," + std::to_string(t.max_new_tokens) + '\n';
    out += "attack_chosen_only," + std::string(t.attack_chosen_only ? "1" : "0") + '\n';
    out += "master_seed," + std::to_string(t.master_seed) + '\n';
    out += "model_fingerprint," + fingerprint_hex(t.model_fp) + '\n';
    out += "translator_fingerprint," + fingerprint_hex(t.translator_fp) + '\n';
    out += "# cells layer,position,correct,evaluated,skipped,failures\n";
    for (const SweepCell& c : t.cells) {
        out += "cell," + std::to_string(c.layer) + ',' + std::to_string(c.position) + ',' +
               std::to_string(c.correct) + ',' + std::to_string(c.evaluated) + ',' +
               std::to_string(c.skipped) + ',' + std::to_string(c.failures) + '\n';
    }
    return out;
}

// Denser mark = larger accuracy drop against the clean baseline.
char shade_mark(double clean, double accuracy) {
    const double drop = clean - accuracy;
    if (drop < 0.01) return ' ';
    if (drop < 0.03) return '.';
    if (drop < 0.05) return ':';
    if (drop < 0.10) return '+';
    if (drop < 0.20) return '#';
    return '@';
}

std::string render_heatmap(const SweepTable& t) {
    std::string out = "preference accuracy by (layer, position); clean baseline " +
                      fmt3(t.clean_accuracy) + "; mode " + to_string(t.mode) + "\n\n";
    char buf[32];
    out += "         ";
    for (int x : t.positions) {
        std::snprintf(buf, sizeof buf, " pos%-4d", x);
        out += buf;
    }
    out += '\n';
    for (size_t li = 0; li < t.layers.size(); ++li) {
        std::snprintf(buf, sizeof buf, "layer %-3d", t.layers[li]);
        out += buf;
        for (size_t pi = 0; pi < t.positions.size(); ++pi) {
            const SweepCell& c = t.at(li, pi);
            if (c.evaluated == 0) {
                out += "    -   ";
            } else {
                std::snprintf(buf, sizeof buf, " %s%c ", fmt3(c.accuracy).c_str(),
                              shade_mark(t.clean_accuracy, c.accuracy));
                out += buf;
            }
        }
        out += '\n';
    }
    out += "\nmarks by drop vs clean: ' '<0.01  '.'<0.03  ':'<0.05  '+'<0.10  '#'<0.20  "
           "'@'>=0.20; '-' = nothing evaluated\n";
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

[[noreturn]] void report_error(const std::string& path, size_t line_no, const std::string& what) {
    throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": " + what);
}

int parse_int(const std::string& path, size_t line_no, const std::string& s) {
    try {
        size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        report_error(path, line_no, "expected an integer, got '" + s + "'");
    }
}

uint64_t parse_u64(const std::string& path, size_t line_no, const std::string& s, int base) {
    try {
        size_t pos = 0;
        const uint64_t v = std::stoull(s, &pos, base);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        report_error(path, line_no, "expected a number, got '" + s + "'");
    }
}

} // namespace

std::string render_report(const SweepTable& table, ReportFormat format) {
    if (table.cells.size() != table.layers.size() * table.positions.size())
        throw std::invalid_argument("render_report: cell count does not match the axes");
    return format == ReportFormat::Csv ? render_csv(table) : render_heatmap(table);
}

void write_report(const SweepTable& table, ReportFormat format, const std::string& path) {
    const std::string body = render_report(table, format);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open report file for writing: " + path);
    out << body;
    out.flush();
    if (!out) throw std::runtime_error("failed writing report file: " + path);
}

SweepTable read_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    if (lines.empty()) throw std::runtime_error(path + ": empty report");

    SweepTable t;
    size_t ln = 0;

    // Grid header: empty corner cell, then the position axis.
    {
        const auto fields = split_csv_line(lines[0]);
        if (fields.size() < 2 || !fields[0].empty())
            report_error(path, 1, "expected a position header starting with an empty cell");
        for (size_t i = 1; i < fields.size(); ++i)
            t.positions.push_back(parse_int(path, 1, fields[i]));
        ln = 1;
    }

    // Grid rows up to the blank separator; accuracy texts are kept for the
    // cross-check against the metadata counts.
    std::vector<std::vector<std::string>> accuracy_text;
    while (ln < lines.size() && !lines[ln].empty()) {
        const auto fields = split_csv_line(lines[ln]);
        if (fields.size() != t.positions.size() + 1)
            report_error(path, ln + 1, "wrong field count in a grid row");
        t.layers.push_back(parse_int(path, ln + 1, fields[0]));
        accuracy_text.emplace_back(fields.begin() + 1, fields.end());
        ++ln;
    }
    if (t.layers.empty()) report_error(path, ln + 1, "no grid rows");
    if (ln >= lines.size() || !lines[ln].empty())
        report_error(path, ln + 1, "expected a blank line after the grid");
    ++ln;
    if (ln >= lines.size() || lines[ln] != "# metadata")
        report_error(path, ln + 1, "expected '# metadata'");
    ++ln;

    // Scalar metadata until the cells sentinel.
    bool saw[10] = {};
    std::string clean_accuracy_text;
    while (ln < lines.size() && lines[ln].rfind("# cells", 0) != 0) {
        const auto fields = split_csv_line(lines[ln]);
        if (fields.size() != 2) report_error(path, ln + 1, "expected key,value");
        const std::string& k = fields[0];
        const std::string& v = fields[1];
        if (k == "clean_accuracy") {
            clean_accuracy_text = v;
            saw[0] = true;
        } else if (k == "clean_correct") {
            t.clean_correct = parse_int(path, ln + 1, v);
            saw[1] = true;
        } else if (k == "instances") {
            t.instance_count = parse_int(path, ln + 1, v);
            saw[2] = true;
        } else if (k == "mode") {
            t.mode = attack_mode_from_string(v);
            saw[3] = true;
        } else if (k == "token_choice") {
            t.token_choice = token_choice_from_string(v);
            saw[4] = true;
        } else if (k == "max_new_tokens") {
            t.max_new_tokens = parse_int(path, ln + 1, v);
            saw[5] = true;
        } else if (k == "attack_chosen_only") {
            t.attack_chosen_only = v == "1";
            saw[6] = true;
        } else if (k == "master_seed") {
            t.master_seed = parse_u64(path, ln + 1, v, 10);
            saw[7] = true;
        } else if (k == "model_fingerprint") {
            t.model_fp = parse_u64(path, ln + 1, v, 16);
            saw[8] = true;
        } else if (k == "translator_fingerprint") {
            t.translator_fp = parse_u64(path, ln + 1, v, 16);
            saw[9] = true;
        } else {
            report_error(path, ln + 1, "unknown metadata key '" + k + "'");
        }
        ++ln;
    }
    for (bool s : saw)
        if (!s) report_error(path, ln + 1, "missing metadata key before '# cells'");
    if (ln >= lines.size()) report_error(path, ln + 1, "missing '# cells' block");
    ++ln;

    // Per-cell counts, in grid order; accuracies are reconstructed from the
    // counts and verified against the printed grid.
    for (size_t li = 0; li < t.layers.size(); ++li) {
        for (size_t pi = 0; pi < t.positions.size(); ++pi) {
            if (ln >= lines.size()) report_error(path, ln + 1, "missing cell rows");
            const auto fields = split_csv_line(lines[ln]);
            if (fields.size() != 7 || fields[0] != "cell")
                report_error(path, ln + 1, "expected a 'cell' row");
            SweepCell c;
            c.layer = parse_int(path, ln + 1, fields[1]);
            c.position = parse_int(path, ln + 1, fields[2]);
            c.correct = parse_int(path, ln + 1, fields[3]);
            c.evaluated = parse_int(path, ln + 1, fields[4]);
            c.skipped = parse_int(path, ln + 1, fields[5]);
            c.failures = parse_int(path, ln + 1, fields[6]);
            if (c.layer != t.layers[li] || c.position != t.positions[pi])
                report_error(path, ln + 1, "cell row out of grid order");
            c.accuracy = c.evaluated > 0 ? static_cast<double>(c.correct) /
                                               static_cast<double>(c.evaluated)
                                         : 0.0;
            if (fmt3(c.accuracy) != accuracy_text[li][pi])
                report_error(path, ln + 1, "accuracy cell does not match the counts");
            t.cells.push_back(c);
            ++ln;
        }
    }
    while (ln < lines.size()) {
        if (!lines[ln].empty()) report_error(path, ln + 1, "unexpected trailing content");
        ++ln;
    }

    t.clean_accuracy = t.instance_count > 0 ? static_cast<double>(t.clean_correct) /
                                                  static_cast<double>(t.instance_count)
                                            : 0.0;
    if (fmt3(t.clean_accuracy) != clean_accuracy_text)
        report_error(path, 0, "clean_accuracy does not match clean_correct/instances");
    return t;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    ordered_json j;
    j["paths"]["model"] = cfg.model_path;
    j["paths"]["vocab"] = cfg.vocab_path;
    j["paths"]["translators"] = cfg.translators_path;
    j["paths"]["dataset"] = cfg.dataset_path;
    j["paths"]["output"] = cfg.output_path;
    j["attack"]["mode"] = to_string(cfg.attack.mode);
    j["attack"]["layer"] = cfg.attack.layer;
    j["attack"]["position"] = cfg.attack.position;
    j["attack"]["selection"] = to_string(cfg.attack.selection);
    j["attack"]["token_choice"] = to_string(cfg.attack.token_choice);
    j["attack"]["max_new_tokens"] = cfg.attack.max_new_tokens;
    j["sweep"]["layers"] = cfg.sweep_layers;
    j["sweep"]["positions"] = cfg.sweep_positions;
    j["sweep"]["attack_chosen_only"] = cfg.attack_chosen_only;
    j["judge"]["exemplars"] = cfg.judge_exemplars;
    j["seed"] = cfg.seed;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open config file for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing config file: " + path);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }

    RunConfig cfg;
    try {
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            if (p.contains("model")) cfg.model_path = p.at("model").get<std::string>();
            if (p.contains("vocab")) cfg.vocab_path = p.at("vocab").get<std::string>();
            if (p.contains("translators"))
                cfg.translators_path = p.at("translators").get<std::string>();
            if (p.contains("dataset")) cfg.dataset_path = p.at("dataset").get<std::string>();
            if (p.contains("output")) cfg.output_path = p.at("output").get<std::string>();
        }
        if (j.contains("attack")) {
            const auto& a = j.at("attack");
            if (a.contains("mode"))
                cfg.attack.mode = attack_mode_from_string(a.at("mode").get<std::string>());
            if (a.contains("layer")) cfg.attack.layer = a.at("layer").get<int>();
            if (a.contains("position")) cfg.attack.position = a.at("position").get<int>();
            if (a.contains("selection"))
                cfg.attack.selection =
                    cell_selection_from_string(a.at("selection").get<std::string>());
            if (a.contains("token_choice"))
                cfg.attack.token_choice =
                    token_choice_from_string(a.at("token_choice").get<std::string>());
            if (a.contains("max_new_tokens"))
                cfg.attack.max_new_tokens = a.at("max_new_tokens").get<int>();
        }
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            if (s.contains("layers")) cfg.sweep_layers = s.at("layers").get<std::vector<int>>();
            if (s.contains("positions"))
                cfg.sweep_positions = s.at("positions").get<std::vector<int>>();
            if (s.contains("attack_chosen_only"))
                cfg.attack_chosen_only = s.at("attack_chosen_only").get<bool>();
        }
        if (j.contains("judge")) {
            const auto& jj = j.at("judge");
            if (jj.contains("exemplars")) cfg.judge_exemplars = jj.at("exemplars").get<int>();
        }
        if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }

    if (cfg.judge_exemplars < 0 || cfg.judge_exemplars > 3)
        throw std::runtime_error("config " + path + ": judge exemplars must be in [0, 3]");
    if (cfg.sweep_layers.empty() || cfg.sweep_positions.empty())
        throw std::runtime_error("config " + path + ": sweep axes must be non-empty");
    return cfg;
}

} // namespace lenslab
