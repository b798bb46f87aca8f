#include "lenslab/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace lenslab {

namespace {

std::string lower_ascii(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

const char* kReservedTokens[kNumReservedIds] = {"<bos>", "<eos>", "<unk>", "<pad>"};

std::string flatten_whitespace(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\t' || c == '\r') c = ' ';
    return s;
}

} // namespace

std::vector<std::string> split_words_lower(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                words.push_back(lower_ascii(cur));
                cur.clear();
            }
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) words.push_back(lower_ascii(cur));
    return words;
}

Vocab build_vocab(const std::vector<std::string>& corpus, size_t max_size) {
    if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
    if (max_size < kNumReservedIds)
        throw std::invalid_argument("build_vocab: max_size must be at least 4");

    std::map<std::string, long long> counts;
    for (const auto& line : corpus)
        for (const auto& w : split_words_lower(line)) ++counts[w];

    std::vector<std::pair<std::string, long long>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocab vocab;
    for (int i = 0; i < kNumReservedIds; ++i) vocab.tokens.emplace_back(kReservedTokens[i]);
    const size_t keep = std::min(ranked.size(), max_size - kNumReservedIds);
    for (size_t i = 0; i < keep; ++i) vocab.tokens.push_back(ranked[i].first);
    for (int i = 0; i < vocab.size(); ++i) vocab.ids[vocab.tokens[i]] = i;
    return vocab;
}

TokenSequence encode(const Vocab& vocab, const std::string& text) {
    TokenSequence seq;
    seq.ids.push_back(kBosId);
    for (const auto& w : split_words_lower(text)) {
        const int id = vocab.id_of(w);
        seq.ids.push_back(id >= 0 ? id : kUnkId);
    }
    return seq;
}

std::string decode(const Vocab& vocab, const TokenSequence& seq) {
    std::string out;
    for (int id : seq.ids) {
        if (id == kBosId || id == kEosId || id == kPadId) continue;
        if (id < 0 || id >= vocab.size())
            throw std::invalid_argument("decode: token id out of range");
        if (!out.empty()) out.push_back(' ');
        out += vocab.token(id);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation dataset IO
// ---------------------------------------------------------------------------

namespace {

using nlohmann::ordered_json;

std::string require_string_field(const ordered_json& j, const char* field, size_t line_no) {
    if (!j.contains(field))
        throw std::runtime_error("line " + std::to_string(line_no) + ": missing field '" +
                                 field + "'");
    const auto& v = j.at(field);
    if (!v.is_string())
        throw std::runtime_error("line " + std::to_string(line_no) + ": field '" + field +
                                 "' must be a string");
    std::string s = v.get<std::string>();
    if (s.empty())
        throw std::runtime_error("line " + std::to_string(line_no) + ": field '" + field +
                                 "' is empty");
    return s;
}

} // namespace

std::vector<EvalInstance> load_eval_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    std::vector<EvalInstance> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": malformed record: " + e.what());
        }
        if (!j.is_object())
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": record is not an object");

        EvalInstance inst;
        inst.topic = require_string_field(j, "topic", line_no);
        inst.stance = require_string_field(j, "stance", line_no);
        inst.chosen = require_string_field(j, "chosen", line_no);
        inst.rejected = require_string_field(j, "rejected", line_no);
        if (inst.chosen == inst.rejected)
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": chosen and rejected are identical");
        if (j.contains("id")) {
            if (!j.at("id").is_string())
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": field 'id' must be a string");
            inst.id = j.at("id").get<std::string>();
        } else {
            inst.id = "line-" + std::to_string(line_no);
        }
        out.push_back(std::move(inst));
    }
    return out;
}

std::string eval_instance_to_json(const EvalInstance& inst) {
    ordered_json j;
    j["id"] = inst.id;
    j["topic"] = inst.topic;
    j["stance"] = inst.stance;
    j["chosen"] = inst.chosen;
    j["rejected"] = inst.rejected;
    return j.dump();
}

void save_eval_dataset(const std::string& path, const std::vector<EvalInstance>& instances) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    for (const auto& inst : instances) out << eval_instance_to_json(inst) << '\n';
    if (!out) throw std::runtime_error("failed writing dataset file: " + path);
}

void save_vocab(const std::string& path, const Vocab& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    for (const auto& tok : vocab.tokens) out << tok << '\n';
    if (!out) throw std::runtime_error("failed writing vocabulary file: " + path);
}

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);

    Vocab vocab;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty())
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": empty token");
        for (char c : line)
            if (std::isspace(static_cast<unsigned char>(c)))
                throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                         ": token contains whitespace");
        if (vocab.ids.count(line))
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": duplicate token '" + line + "'");
        vocab.ids[line] = vocab.size();
        vocab.tokens.push_back(line);
    }
    if (vocab.size() < kNumReservedIds)
        throw std::runtime_error(path + ": fewer than " +
                                 std::to_string(kNumReservedIds) + " tokens");
    for (int i = 0; i < kNumReservedIds; ++i)
        if (vocab.tokens[static_cast<size_t>(i)] != kReservedTokens[i])
            throw std::runtime_error(path + ": line " + std::to_string(i + 1) +
                                     ": expected reserved token '" +
                                     kReservedTokens[i] + "'");
    return vocab;
}

// ---------------------------------------------------------------------------
// Synthetic data generator
// ---------------------------------------------------------------------------

namespace {

// Marker and label words appear nowhere outside their own bank; fillers may
// reuse ordinary template words ("the", "is", ...).
const std::vector<std::string> kHighMarkers = {
    "evidence", "research",   "data",   "studies",  "statistics", "experts",
    "survey",   "verified", "documented", "proven", "measured",   "sources",
};

const std::vector<std::string> kLowMarkers = {
    "whatever", "dunno",  "stuff",    "vibes", "gossip",  "rumor",
    "nonsense", "random", "guessing", "silly", "blah",    "unsure",
};

const std::vector<std::string> kTopics = {
    "plastic bottles", "school uniforms", "junk food",      "video games",
    "social media",    "space tourism",   "public transport", "zoo animals",
    "homework limits", "city parks",      "electric cars",  "solar power",
    "library funding", "bike lanes",      "online voting",  "youth sports",
    "fast fashion",    "loud concerts",   "street murals",  "night markets",
    "paper maps",      "exam season",     "remote offices", "curfew rules",
};

const std::vector<std::string> kStances = {
    "firmly supportive",     "firmly opposed",     "strongly supportive",
    "strongly opposed",      "broadly supportive", "broadly opposed",
    "cautiously supportive", "cautiously opposed",
};

const std::vector<std::string> kLabels = {"low", "average", "high"};

const std::vector<std::string> kFillers = {
    "the",        "a",          "an",        "and",        "of",         "to",
    "in",         "for",        "with",      "because",    "that",       "this",
    "those",      "these",      "it",        "its",        "they",       "them",
    "their",      "there",      "then",      "than",       "as",         "at",
    "by",         "from",       "on",        "or",         "but",        "not",
    "also",       "just",       "even",      "still",      "yet",        "so",
    "if",         "about",      "over",      "under",      "more",       "less",
    "very",       "quite",      "rather",    "too",        "both",       "either",
    "each",       "every",      "all",       "some",       "many",       "few",
    "most",       "any",        "such",      "own",        "same",       "other",
    "another",    "between",    "among",     "within",     "across",     "during",
    "before",     "after",      "since",     "until",      "while",      "when",
    "where",      "how",        "why",       "what",       "who",        "which",
    "is",         "are",        "was",       "were",       "be",         "been",
    "have",       "has",        "had",       "do",         "does",       "did",
    "can",        "could",      "will",      "would",      "may",        "might",
    "must",       "should",     "make",      "makes",      "made",       "take",
    "takes",      "took",       "give",      "gives",      "gave",       "get",
    "gets",       "got",        "keep",      "keeps",      "kept",       "find",
    "finds",      "found",      "think",     "thinks",     "thought",    "know",
    "knows",      "knew",       "feel",      "feels",      "felt",       "say",
    "says",       "said",       "tell",      "tells",      "told",       "show",
    "shows",      "showed",     "help",      "helps",      "helped",     "need",
    "needs",      "needed",     "want",      "wants",      "wanted",     "try",
    "tries",      "tried",      "use",       "uses",       "used",       "work",
    "works",      "worked",     "pay",       "pays",       "paid",       "save",
    "saves",      "saved",      "spend",     "spends",     "spent",      "reduce",
    "reduces",    "reduced",    "improve",   "improves",   "improved",   "increase",
    "increases",  "increased",  "decrease",  "decreases",  "decreased",  "grow",
    "grows",      "grew",       "start",     "starts",     "started",    "stop",
    "stops",      "stopped",    "people",    "person",     "family",     "families",
    "child",      "children",   "adult",     "adults",     "worker",     "workers",
    "student",    "students",   "teacher",   "teachers",   "voter",      "voters",
    "citizen",    "citizens",   "neighbor",  "neighbors",  "community",  "communities",
    "group",      "groups",     "team",      "teams",      "leader",     "leaders",
    "member",     "members",    "reason",    "reasons",    "point",      "points",
    "idea",       "ideas",      "issue",     "issues",     "problem",    "problems",
    "answer",     "answers",    "question",  "questions",  "choice",     "choices",
    "option",     "options",    "plan",      "plans",      "result",     "results",
    "effect",     "effects",    "cause",     "causes",     "benefit",    "benefits",
    "cost",       "costs",      "risk",      "risks",      "harm",       "harms",
    "value",      "values",     "money",     "time",       "times",      "year",
    "years",      "day",        "days",      "week",       "weeks",      "place",
    "places",     "area",       "areas",     "town",       "towns",      "region",
    "regions",    "nation",     "nations",   "matter",     "matters",    "change",
    "changes",    "good",       "better",    "best",       "bad",        "worse",
    "worst",      "big",        "small",     "large",      "little",     "long",
    "short",      "new",        "old",       "young",      "early",      "late",
    "safe",       "unsafe",     "healthy",   "unhealthy",  "clean",      "cheap",
    "costly",     "simple",     "complex",   "easy",       "hard",       "strong",
    "weak",       "fair",       "unfair",    "useful",     "useless",    "likely",
    "unlikely",   "local",      "global",    "common",     "rare",       "real",
    "true",       "false",      "clear",     "vague",      "open",       "closed",
    "free",       "busy",       "quiet",     "important",  "serious",    "minor",
    "major",      "honest",     "careful",   "careless",   "often",      "sometimes",
    "rarely",     "never",      "always",    "usually",    "certainly",  "possibly",
    "probably",   "overall",    "instead",   "together",   "against",    "toward",
    "without",    "enough",     "almost",    "already",    "again",      "perhaps",
};

int pick(SeededRng& rng, size_t n) { return static_cast<int>(rng.uniform_int(n)); }

const std::string& pick_word(SeededRng& rng, const std::vector<std::string>& bank) {
    return bank[static_cast<size_t>(pick(rng, bank.size()))];
}

} // namespace

const std::vector<std::string>& high_quality_markers() { return kHighMarkers; }
const std::vector<std::string>& low_quality_markers() { return kLowMarkers; }
const std::vector<std::string>& filler_words() { return kFillers; }
const std::vector<std::string>& topic_bank() { return kTopics; }
const std::vector<std::string>& stance_bank() { return kStances; }
const std::vector<std::string>& rating_labels() { return kLabels; }

std::string rating_instruction() {
    return "Rate the quality of the given argument among low average and high";
}

std::string render_rating_block(const std::string& topic, const std::string& stance,
                                const std::string& argument) {
    std::string out;
    out += "The topic is " + topic + "\n";
    out += "The stance is " + stance + "\n";
    out += "Here is the argument: " + argument + "\n";
    out += "Rating:";
    return out;
}

std::string make_argument(SeededRng& rng, ArgumentQuality quality, const ThemeParams& theme) {
    return make_argument(rng, quality, theme, theme.min_argument_words, theme.max_argument_words);
}

std::string make_argument(SeededRng& rng, ArgumentQuality quality, const ThemeParams& theme,
                          int min_words, int max_words) {
    if (min_words < 2 || max_words < min_words)
        throw std::invalid_argument("make_argument: bad word count range");

    const int len = min_words + pick(rng, static_cast<size_t>(max_words - min_words + 1));
    std::vector<std::string> words(static_cast<size_t>(len));
    for (auto& w : words) w = pick_word(rng, kFillers);

    int marker_count = theme.markers_per_argument;
    bool mixed = false;
    if (quality == ArgumentQuality::Average) {
        marker_count = 2;  // exactly one marker from each bank
        mixed = true;
    }

    if (marker_count > 0) {
        const int span = std::min(theme.max_marker_word_index, len - 1) + 1;
        std::vector<int> slots;
        while (static_cast<int>(slots.size()) < marker_count) {
            const int s = pick(rng, static_cast<size_t>(span));
            if (std::find(slots.begin(), slots.end(), s) == slots.end()) slots.push_back(s);
        }
        std::sort(slots.begin(), slots.end());
        const bool high_first = mixed && pick(rng, 2) == 0;
        for (size_t i = 0; i < slots.size(); ++i) {
            const std::vector<std::string>* bank = nullptr;
            if (mixed) {
                bank = (i == 0) == high_first ? &kHighMarkers : &kLowMarkers;
            } else {
                bank = quality == ArgumentQuality::High ? &kHighMarkers : &kLowMarkers;
            }
            words[static_cast<size_t>(slots[i])] = pick_word(rng, *bank);
        }
    }

    std::string out;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

std::vector<EvalInstance> generate_synthetic_eval_set(SeededRng& rng, int count,
                                                      const ThemeParams& theme) {
    if (count < 1) throw std::invalid_argument("generate_synthetic_eval_set: count must be >= 1");
    std::vector<EvalInstance> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        EvalInstance inst;
        inst.topic = pick_word(rng, kTopics);
        inst.stance = pick_word(rng, kStances);
        inst.chosen = make_argument(rng, ArgumentQuality::High, theme);
        inst.rejected = make_argument(rng, ArgumentQuality::Average, theme);
        while (inst.rejected == inst.chosen)
            inst.rejected = make_argument(rng, ArgumentQuality::Average, theme);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "synth-%04d", i);
        inst.id = buf;
        out.push_back(std::move(inst));
    }
    return out;
}

namespace {

ArgumentQuality random_quality(SeededRng& rng) {
    return static_cast<ArgumentQuality>(pick(rng, 3));
}

std::string labelled_block(SeededRng& rng, const CorpusParams& p, int min_words, int max_words) {
    const ArgumentQuality q = random_quality(rng);
    const std::string arg = make_argument(rng, q, p.theme, min_words, max_words);
    const std::string block = render_rating_block(pick_word(rng, kTopics),
                                                  pick_word(rng, kStances), arg);
    return flatten_whitespace(block) + " " + kLabels[static_cast<size_t>(q)];
}

} // namespace

std::vector<std::string> generate_training_corpus(SeededRng& rng, const CorpusParams& params) {
    std::vector<std::string> lines;
    lines.reserve(static_cast<size_t>(params.judge_lines + params.plain_lines));

    for (int i = 0; i < params.judge_lines; ++i) {
        // Half the judge lines carry a full three-exemplar context so label
        // prediction is trained at the positions the evaluation prompt uses.
        const int r = pick(rng, 6);
        const int exemplars = r < 3 ? r : 3;
        std::string line = rating_instruction();
        for (int e = 0; e < exemplars; ++e) {
            line += " " + labelled_block(rng, params, params.exemplar_min_words,
                                         params.exemplar_max_words);
        }
        line += " " + labelled_block(rng, params, params.theme.min_argument_words,
                                     params.theme.max_argument_words);
        lines.push_back(std::move(line));
    }
    for (int i = 0; i < params.plain_lines; ++i) {
        lines.push_back(make_argument(rng, random_quality(rng), params.theme));
    }

    // Fisher-Yates so the tail holdout split sees every line kind.
    for (size_t i = lines.size(); i > 1; --i) {
        const size_t j = rng.uniform_int(i);
        std::swap(lines[i - 1], lines[j]);
    }
    return lines;
}

} // namespace lenslab
