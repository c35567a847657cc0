#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncce/tensor.hpp"

namespace ncce {

// Half-open token interval [start, end) over a document's flat token sequence.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t width() const { return end - start; }

    friend bool operator==(const Span&, const Span&) = default;
    friend auto operator<=>(const Span& a, const Span& b) {
        if (auto c = a.start <=> b.start; c != 0) return c;
        return a.end <=> b.end;
    }
};

inline std::string to_string(const Span& s) {
    return "[" + std::to_string(s.start) + "," + std::to_string(s.end) + ")";
}

// Tokenized document: sentences of tokens plus the derived flat sequence.
// Flat index <-> (sentence, offset) is a bijection.
class Document {
public:
    std::string id;

    static Document make(std::string id, std::vector<std::vector<std::string>> sentences) {
        if (sentences.empty())
            throw validation_error("document '" + id + "' has no sentences");
        Document d;
        d.id = std::move(id);
        d.sentences_ = std::move(sentences);
        d.sentence_begin_.push_back(0);
        for (const auto& s : d.sentences_) {
            if (s.empty())
                throw validation_error("document '" + d.id + "' contains an empty sentence");
            for (const auto& tok : s) d.tokens_.push_back(tok);
            d.sentence_begin_.push_back(d.tokens_.size());
        }
        return d;
    }

    const std::vector<std::vector<std::string>>& sentences() const { return sentences_; }
    const std::vector<std::string>& tokens() const { return tokens_; }
    std::size_t size() const { return tokens_.size(); }

    // First flat index of sentence s; sentence_begin(n_sents) == size().
    std::size_t sentence_begin(std::size_t s) const { return sentence_begin_[s]; }

    std::pair<std::size_t, std::size_t> locate(std::size_t flat) const {
        if (flat >= tokens_.size()) throw validation_error("token index out of range");
        auto it = std::upper_bound(sentence_begin_.begin(), sentence_begin_.end(), flat);
        std::size_t s = static_cast<std::size_t>(it - sentence_begin_.begin()) - 1;
        return {s, flat - sentence_begin_[s]};
    }

    std::size_t flatten(std::size_t sentence, std::size_t offset) const {
        return sentence_begin_[sentence] + offset;
    }

    friend bool operator==(const Document& a, const Document& b) {
        return a.id == b.id && a.sentences_ == b.sentences_;
    }

private:
    std::vector<std::vector<std::string>> sentences_;
    std::vector<std::string> tokens_;
    std::vector<std::size_t> sentence_begin_;
};

// Compounds (sorted, pairwise disjoint spans) partitioned into chains. Stored
// in canonical form: chain members ascending, chains ordered by first member.
struct ChainPartition {
    std::vector<Span> compounds;
    std::vector<std::vector<std::size_t>> chains;

    static ChainPartition make(std::vector<Span> compounds,
                               std::vector<std::vector<std::size_t>> chains,
                               std::size_t n_tokens) {
        validate(compounds, chains, n_tokens);
        for (auto& c : chains) std::sort(c.begin(), c.end());
        std::sort(chains.begin(), chains.end(),
                  [](const auto& a, const auto& b) { return a.front() < b.front(); });
        return ChainPartition{std::move(compounds), std::move(chains)};
    }

    static void validate(const std::vector<Span>& compounds,
                         const std::vector<std::vector<std::size_t>>& chains,
                         std::size_t n_tokens) {
        for (std::size_t i = 0; i < compounds.size(); ++i) {
            const Span& s = compounds[i];
            if (s.start >= s.end || s.end > n_tokens)
                throw validation_error("invalid span " + to_string(s) + " over " +
                                       std::to_string(n_tokens) + " tokens");
            if (i > 0) {
                const Span& p = compounds[i - 1];
                if (!(p < s))
                    throw validation_error("compounds not in ascending order: " + to_string(p) +
                                           " before " + to_string(s));
                if (p.end > s.start)
                    throw validation_error("overlapping compounds " + to_string(p) + " and " +
                                           to_string(s));
            }
        }
        std::vector<int> owner(compounds.size(), -1);
        for (std::size_t c = 0; c < chains.size(); ++c) {
            if (chains[c].empty())
                throw validation_error("chain " + std::to_string(c) + " is empty");
            for (std::size_t m : chains[c]) {
                if (m >= compounds.size())
                    throw validation_error("chain " + std::to_string(c) +
                                           " references unknown compound " + std::to_string(m));
                if (owner[m] >= 0)
                    throw validation_error("compound " + std::to_string(m) +
                                           " appears in chains " + std::to_string(owner[m]) +
                                           " and " + std::to_string(c));
                owner[m] = static_cast<int>(c);
            }
        }
        for (std::size_t m = 0; m < compounds.size(); ++m)
            if (owner[m] < 0)
                throw validation_error("compound " + std::to_string(m) +
                                       " belongs to no chain");
    }

    // Chain index per compound.
    std::vector<std::size_t> chain_of() const {
        std::vector<std::size_t> owner(compounds.size(), 0);
        for (std::size_t c = 0; c < chains.size(); ++c)
            for (std::size_t m : chains[c]) owner[m] = c;
        return owner;
    }

    friend bool operator==(const ChainPartition&, const ChainPartition&) = default;
};

struct AnnotatedDocument {
    Document doc;
    ChainPartition gold;

    friend bool operator==(const AnnotatedDocument&, const AnnotatedDocument&) = default;
};

using Corpus = std::vector<AnnotatedDocument>;

// ---- BIO codec ----

enum class Tag : std::uint8_t { B = 0, I = 1, O = 2 };

constexpr std::size_t kTagCount = 3;

inline char tag_char(Tag t) { return t == Tag::B ? 'B' : t == Tag::I ? 'I' : 'O'; }

struct TagSequence {
    std::vector<Tag> tags;

    friend bool operator==(const TagSequence&, const TagSequence&) = default;
};

// Spans must be sorted and pairwise disjoint; overlap is reported naming both spans.
inline TagSequence bio_encode(std::size_t n_tokens, const std::vector<Span>& compounds) {
    TagSequence seq;
    seq.tags.assign(n_tokens, Tag::O);
    const Span* prev = nullptr;
    for (const Span& s : compounds) {
        if (s.start >= s.end || s.end > n_tokens)
            throw validation_error("bio_encode: invalid span " + to_string(s));
        if (prev && prev->end > s.start)
            throw validation_error("bio_encode: overlapping spans " + to_string(*prev) +
                                   " and " + to_string(s));
        if (prev && !(*prev < s))
            throw validation_error("bio_encode: spans out of order at " + to_string(s));
        seq.tags[s.start] = Tag::B;
        for (std::size_t t = s.start + 1; t < s.end; ++t) seq.tags[t] = Tag::I;
        prev = &s;
    }
    return seq;
}

inline TagSequence bio_encode(const Document& doc, const std::vector<Span>& compounds) {
    return bio_encode(doc.size(), compounds);
}

// Total on any tag sequence, including malformed model output: a leading I
// (after O or at position 0) is repaired as B, so no B/I token is dropped.
inline std::vector<Span> bio_decode(const TagSequence& seq) {
    std::vector<Span> spans;
    bool open = false;
    std::size_t start = 0;
    for (std::size_t t = 0; t < seq.tags.size(); ++t) {
        Tag tag = seq.tags[t];
        if (tag == Tag::B || (tag == Tag::I && !open)) {
            if (open) spans.push_back({start, t});
            start = t;
            open = true;
        } else if (tag == Tag::O && open) {
            spans.push_back({start, t});
            open = false;
        }
    }
    if (open) spans.push_back({start, seq.tags.size()});
    return spans;
}

// ---- corpus records ----
//
// One record per line, UTF-8 JSON:
//   {"id": ..., "sentences": [[tok, ...], ...],
//    "compounds": [[start, end], ...], "chains": [[i, ...], ...]}
// Spans are half-open [start, end) over the flat token sequence.

inline nlohmann::ordered_json record_to_json(const AnnotatedDocument& d) {
    nlohmann::ordered_json j;
    j["id"] = d.doc.id;
    j["sentences"] = d.doc.sentences();
    auto spans = nlohmann::ordered_json::array();
    for (const Span& s : d.gold.compounds) spans.push_back({s.start, s.end});
    j["compounds"] = std::move(spans);
    j["chains"] = d.gold.chains;
    return j;
}

inline AnnotatedDocument record_from_json(const nlohmann::json& j) {
    Document doc = Document::make(j.at("id").get<std::string>(),
                                  j.at("sentences").get<std::vector<std::vector<std::string>>>());
    std::vector<Span> compounds;
    for (const auto& p : j.at("compounds")) {
        if (!p.is_array() || p.size() != 2)
            throw validation_error("compound span must be a [start, end) pair");
        compounds.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>()});
    }
    auto chains = j.at("chains").get<std::vector<std::vector<std::size_t>>>();
    ChainPartition gold = ChainPartition::make(std::move(compounds), std::move(chains), doc.size());
    return AnnotatedDocument{std::move(doc), std::move(gold)};
}

inline Corpus load_corpus(std::istream& in, const std::string& name = "<stream>") {
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            corpus.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw io_error(name + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return corpus;
}

inline Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open corpus file: " + path);
    return load_corpus(in, path);
}

inline void store_corpus(const Corpus& corpus, std::ostream& out) {
    for (const AnnotatedDocument& d : corpus) out << record_to_json(d).dump() << "\n";
}

inline void store_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write corpus file: " + path);
    store_corpus(corpus, out);
}

// ---- statistics ----

struct StatsReport {
    std::size_t documents = 0;
    std::size_t compounds = 0;
    std::size_t chains = 0;
    std::size_t max_chain_size = 0;
    double avg_compound_length = 0.0;
    double median_compound_length = 0.0;
    std::size_t max_compound_length = 0;
};

inline StatsReport corpus_stats(const Corpus& corpus) {
    StatsReport r;
    std::vector<std::size_t> widths;
    for (const AnnotatedDocument& d : corpus) {
        ++r.documents;
        r.compounds += d.gold.compounds.size();
        r.chains += d.gold.chains.size();
        for (const auto& c : d.gold.chains) r.max_chain_size = std::max(r.max_chain_size, c.size());
        for (const Span& s : d.gold.compounds) widths.push_back(s.width());
    }
    if (!widths.empty()) {
        std::sort(widths.begin(), widths.end());
        r.max_compound_length = widths.back();
        r.avg_compound_length =
            std::accumulate(widths.begin(), widths.end(), 0.0) / static_cast<double>(widths.size());
        std::size_t mid = widths.size() / 2;
        r.median_compound_length =
            widths.size() % 2 == 1
                ? static_cast<double>(widths[mid])
                : 0.5 * (static_cast<double>(widths[mid - 1]) + static_cast<double>(widths[mid]));
    }
    return r;
}

inline nlohmann::ordered_json stats_to_json(const StatsReport& r) {
    nlohmann::ordered_json j;
    j["documents"] = r.documents;
    j["compounds"] = r.compounds;
    j["chains"] = r.chains;
    j["max_chain_size"] = r.max_chain_size;
    j["avg_compound_length"] = r.avg_compound_length;
    j["median_compound_length"] = r.median_compound_length;
    j["max_compound_length"] = r.max_compound_length;
    return j;
}

inline std::string stats_to_text(const StatsReport& r) {
    std::ostringstream os;
    os << "Documents            " << r.documents << "\n"
       << "Compounds            " << r.compounds << "\n"
       << "Chains               " << r.chains << "\n"
       << "Max. chain size      " << r.max_chain_size << "\n"
       << "Avg. compound length " << r.avg_compound_length << "\n"
       << "Median compound len  " << r.median_compound_length << "\n"
       << "Max. compound length " << r.max_compound_length << "\n";
    return os.str();
}

}  // namespace ncce
