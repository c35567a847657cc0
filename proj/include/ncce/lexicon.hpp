#pragma once

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ncce/corpus.hpp"
#include "ncce/tensor.hpp"

namespace ncce {

// Word -> sense -> sememe hierarchy. Senses and sememes are interned into one
// concept table (stable string table, index = concept id); its size is the
// embedding-table row count of the semantics module.
class Lexicon {
public:
    struct Sense {
        int concept_id = -1;                 // concept id of the sense node
        std::vector<int> sememes;         // concept ids of its sememe nodes
    };

    // Returns nullptr for unknown words/phrases. Multi-token phrases are keyed
    // by their tokens joined with single spaces.
    const std::vector<Sense>* lookup(const std::string& word) const {
        auto it = entries_.find(word);
        return it == entries_.end() ? nullptr : &it->second;
    }

    const std::vector<std::string>& concept_names() const { return concept_names_; }
    std::size_t concept_count() const { return concept_names_.size(); }
    std::size_t entry_count() const { return entries_.size(); }
    std::size_t max_phrase_tokens() const { return max_phrase_tokens_; }

    // Words in insertion order, for deterministic serialization.
    const std::vector<std::string>& words() const { return words_; }

    // sense_id is the file-level identifier; the sense concept is named
    // "<word>#<sense_id>" so senses of different words never collide.
    void add_sense(const std::string& word, const std::string& sense_id,
                   const std::vector<std::string>& sememes, bool* merged = nullptr) {
        if (sememes.empty())
            throw validation_error("sense '" + sense_id + "' of '" + word + "' has no sememes");
        auto [it, fresh] = entries_.try_emplace(word);
        if (fresh) {
            words_.push_back(word);
            std::size_t toks = 1 + static_cast<std::size_t>(
                                       std::count(word.begin(), word.end(), ' '));
            max_phrase_tokens_ = std::max(max_phrase_tokens_, toks);
        }
        int sense_concept = intern(word + "#" + sense_id);
        Sense* slot = nullptr;
        for (Sense& s : it->second)
            if (s.concept_id == sense_concept) slot = &s;
        if (slot) {
            if (merged) *merged = true;
        } else {
            it->second.push_back(Sense{sense_concept, {}});
            slot = &it->second.back();
            sense_ids_[word].push_back(sense_id);
        }
        for (const std::string& sm : sememes) {
            int id = intern(sm);
            if (std::find(slot->sememes.begin(), slot->sememes.end(), id) == slot->sememes.end())
                slot->sememes.push_back(id);
        }
    }

    const std::vector<std::string>& sense_ids(const std::string& word) const {
        static const std::vector<std::string> none;
        auto it = sense_ids_.find(word);
        return it == sense_ids_.end() ? none : it->second;
    }

private:
    int intern(const std::string& name) {
        auto it = concept_index_.find(name);
        if (it != concept_index_.end()) return it->second;
        int id = static_cast<int>(concept_names_.size());
        concept_names_.push_back(name);
        concept_index_.emplace(name, id);
        return id;
    }

    std::unordered_map<std::string, std::vector<Sense>> entries_;
    std::unordered_map<std::string, std::vector<std::string>> sense_ids_;
    std::vector<std::string> words_;
    std::vector<std::string> concept_names_;
    std::unordered_map<std::string, int> concept_index_;
    std::size_t max_phrase_tokens_ = 0;
};

// File format: one sense per line, `word <TAB> sense_id <TAB> sememe,sememe,...`.
// Duplicate (word, sense_id) lines merge their sememe sets with a warning.
inline Lexicon load_lexicon(std::istream& in, const std::string& name = "<stream>",
                            std::ostream* warnings = nullptr) {
    Lexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw io_error(name + ":" + std::to_string(lineno) +
                           ": expected word<TAB>sense<TAB>sememes");
        std::string word = line.substr(0, t1);
        std::string sense = line.substr(t1 + 1, t2 - t1 - 1);
        std::string rest = line.substr(t2 + 1);
        if (word.empty() || sense.empty())
            throw io_error(name + ":" + std::to_string(lineno) + ": empty word or sense id");
        std::vector<std::string> sememes;
        std::stringstream ss(rest);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) sememes.push_back(item);
        if (sememes.empty())
            throw io_error(name + ":" + std::to_string(lineno) + ": no sememes listed");
        bool merged = false;
        lex.add_sense(word, sense, sememes, &merged);
        if (merged && warnings)
            *warnings << name << ":" << lineno << ": duplicate entry for '" << word << "' sense '"
                      << sense << "' merged\n";
    }
    return lex;
}

inline Lexicon load_lexicon(const std::string& path, std::ostream* warnings = nullptr) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open lexicon file: " + path);
    return load_lexicon(in, path, warnings ? warnings : &std::cerr);
}

inline void store_lexicon(const Lexicon& lex, std::ostream& out) {
    for (const std::string& word : lex.words()) {
        const auto* senses = lex.lookup(word);
        const auto& ids = lex.sense_ids(word);
        for (std::size_t k = 0; k < senses->size(); ++k) {
            out << word << '\t' << ids[k] << '\t';
            const auto& sm = (*senses)[k].sememes;
            for (std::size_t i = 0; i < sm.size(); ++i) {
                if (i) out << ',';
                out << lex.concept_names()[sm[i]];
            }
            out << '\n';
        }
    }
}

inline void store_lexicon(const Lexicon& lex, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write lexicon file: " + path);
    store_lexicon(lex, out);
}

// Document-specific semantic graph G = (V1, V2, E): V1 = one node per token,
// V2 = one node per distinct sense/sememe concept occurring in the document
// (shared across the tokens that evoke it). Undirected edges token<->sense and
// sense<->sememe, plus a self-loop on every node.
struct SememeGraph {
    std::size_t n_tokens = 0;
    std::vector<int> concepts;   // lexicon concept id per concept node, in discovery order
    Tensor adjacency;            // (n+m) x (n+m), symmetric, unit diagonal

    std::size_t n_concepts() const { return concepts.size(); }
    std::size_t n_nodes() const { return n_tokens + concepts.size(); }

    double degree(std::size_t node) const {
        double d = 0.0;
        for (std::size_t j = 0; j < adjacency.cols; ++j) d += adjacency.at(node, j);
        return d;
    }
};

// Greedy longest-first matching of lexicon entries against the token sequence;
// a matched phrase's senses attach to every covered token. Out-of-vocabulary
// tokens keep only their self-loop.
inline SememeGraph build_graph(const Document& doc, const Lexicon& lex) {
    SememeGraph g;
    g.n_tokens = doc.size();
    const auto& toks = doc.tokens();

    std::unordered_map<int, std::size_t> node_of_concept;
    // (token, concept-node) and (sense-node, sememe-node) edge lists
    std::vector<std::pair<std::size_t, std::size_t>> edges;

    auto concept_node = [&](int cid) {
        auto it = node_of_concept.find(cid);
        if (it != node_of_concept.end()) return it->second;
        std::size_t node = g.n_tokens + g.concepts.size();
        g.concepts.push_back(cid);
        node_of_concept.emplace(cid, node);
        return node;
    };

    std::size_t max_len = std::max<std::size_t>(lex.max_phrase_tokens(), 1);
    std::size_t pos = 0;
    while (pos < toks.size()) {
        std::size_t matched = 0;
        const std::vector<Lexicon::Sense>* senses = nullptr;
        std::size_t longest = std::min(max_len, toks.size() - pos);
        for (std::size_t len = longest; len >= 1; --len) {
            std::string key = toks[pos];
            for (std::size_t k = 1; k < len; ++k) key += " " + toks[pos + k];
            if (const auto* e = lex.lookup(key)) {
                matched = len;
                senses = e;
                break;
            }
        }
        if (!senses) {
            ++pos;
            continue;
        }
        for (const Lexicon::Sense& s : *senses) {
            std::size_t sense_node = concept_node(s.concept_id);
            for (std::size_t t = pos; t < pos + matched; ++t) edges.emplace_back(t, sense_node);
            for (int sm : s.sememes) edges.emplace_back(sense_node, concept_node(sm));
        }
        pos += matched;
    }

    std::size_t n = g.n_nodes();
    g.adjacency = Tensor(n, n);
    for (std::size_t i = 0; i < n; ++i) g.adjacency.at(i, i) = 1.0;
    for (auto [a, b] : edges) {
        g.adjacency.at(a, b) = 1.0;
        g.adjacency.at(b, a) = 1.0;
    }
    return g;
}

// Symmetric normalization D^{-1/2} A D^{-1/2}. Self-loops guarantee all
// degrees >= 1; the result is symmetric with spectrum in [-1, 1].
inline Tensor normalized_adjacency(const SememeGraph& g) {
    std::size_t n = g.n_nodes();
    std::vector<double> dinv(n);
    for (std::size_t i = 0; i < n; ++i) dinv[i] = 1.0 / std::sqrt(g.degree(i));
    Tensor a_hat(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a_hat.at(i, j) = dinv[i] * g.adjacency.at(i, j) * dinv[j];
    return a_hat;
}

}  // namespace ncce
