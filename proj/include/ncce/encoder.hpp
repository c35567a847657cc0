#pragma once

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ncce/corpus.hpp"
#include "ncce/model.hpp"
#include "ncce/tape.hpp"

namespace ncce {

// Token -> embedding id with reserved <pad>=0 and <unk>=1. Built from a corpus
// by sorting the distinct tokens, so construction order does not matter.
class Vocabulary {
public:
    static constexpr std::size_t pad_id = 0;
    static constexpr std::size_t unk_id = 1;

    static Vocabulary build(const Corpus& corpus) {
        std::set<std::string> seen;
        for (const AnnotatedDocument& d : corpus)
            for (const std::string& tok : d.doc.tokens()) seen.insert(tok);
        Vocabulary v;
        for (const std::string& tok : seen)
            if (tok != "<pad>" && tok != "<unk>") v.push(tok);
        return v;
    }

    std::size_t id(const std::string& tok) const {
        auto it = index_.find(tok);
        return it == index_.end() ? unk_id : it->second;
    }

    const std::string& token(std::size_t id) const { return tokens_[id]; }
    std::size_t size() const { return tokens_.size(); }

    std::vector<std::size_t> ids(const std::vector<std::string>& toks) const {
        std::vector<std::size_t> out;
        out.reserve(toks.size());
        for (const auto& t : toks) out.push_back(id(t));
        return out;
    }

    void save(std::ostream& out) const {
        for (const std::string& t : tokens_) out << t << "\n";
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw io_error("cannot write vocabulary: " + path);
        save(out);
    }

    static Vocabulary load(std::istream& in, const std::string& name = "<stream>") {
        Vocabulary v;
        v.tokens_.clear();
        v.index_.clear();
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            if (lineno == 0 && line != "<pad>")
                throw io_error(name + ":1: vocabulary must start with <pad>");
            if (lineno == 1 && line != "<unk>")
                throw io_error(name + ":2: second vocabulary entry must be <unk>");
            if (v.index_.count(line))
                throw io_error(name + ":" + std::to_string(lineno + 1) +
                               ": duplicate token '" + line + "'");
            v.index_.emplace(line, v.tokens_.size());
            v.tokens_.push_back(line);
            ++lineno;
        }
        if (v.tokens_.size() < 2) throw io_error(name + ": vocabulary missing reserved entries");
        return v;
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open vocabulary: " + path);
        return load(in, path);
    }

    // Reserved entries only; build() or load() add the rest.
    Vocabulary() {
        push_reserved("<pad>");
        push_reserved("<unk>");
    }

private:

    void push_reserved(const std::string& t) {
        index_.emplace(t, tokens_.size());
        tokens_.push_back(t);
    }

    void push(const std::string& t) {
        index_.emplace(t, tokens_.size());
        tokens_.push_back(t);
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Eq. 1 scaled dot-product self-attention: softmax(QK^T/sqrt(d)) V.
struct AttentionResult {
    NodeId out;   // n x d
    NodeId attn;  // n x n, rows sum to 1
};

inline AttentionResult self_attention(Tape& t, NodeId x, NodeId wq, NodeId wk, NodeId wv) {
    std::size_t d = t.val(wq).cols;
    NodeId q = t.matmul(x, wq);
    NodeId k = t.matmul(x, wk);
    NodeId v = t.matmul(x, wv);
    NodeId scores = t.scale(t.matmul(q, t.transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
    NodeId attn = t.softmax_rows(scores);
    return {t.matmul(attn, v), attn};
}

// Fixed sinusoidal position rows for the attention variant.
inline Tensor positional_encoding(std::size_t n, std::size_t d) {
    Tensor pe(n, d);
    for (std::size_t pos = 0; pos < n; ++pos) {
        for (std::size_t i = 0; i < d; i += 2) {
            double rate = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            pe.at(pos, i) = std::sin(static_cast<double>(pos) / rate);
            if (i + 1 < d) pe.at(pos, i + 1) = std::cos(static_cast<double>(pos) / rate);
        }
    }
    return pe;
}

namespace detail {

// One direction of the gated recurrence over embedded rows [begin, end) of x,
// walked in `reverse` order when set. Output rows stay in input order.
inline NodeId gru_direction(Tape& t, const ParamNodes& p, const std::string& dir, NodeId x,
                            bool reverse) {
    const Tensor& X = t.val(x);
    std::size_t len = X.rows;
    std::size_t hd = t.val(p.at("enc." + dir + ".uz")).rows;
    NodeId wz = p.at("enc." + dir + ".wz"), uz = p.at("enc." + dir + ".uz"),
           bz = p.at("enc." + dir + ".bz");
    NodeId wr = p.at("enc." + dir + ".wr"), ur = p.at("enc." + dir + ".ur"),
           br = p.at("enc." + dir + ".br");
    NodeId wn = p.at("enc." + dir + ".wn"), un = p.at("enc." + dir + ".un"),
           bn = p.at("enc." + dir + ".bn");
    NodeId h = t.constant(Tensor(1, hd));
    std::vector<NodeId> states(len);
    for (std::size_t step = 0; step < len; ++step) {
        std::size_t i = reverse ? len - 1 - step : step;
        NodeId xi = t.slice_rows(x, i, i + 1);
        NodeId z = t.sigmoid(t.add(t.add(t.matmul(xi, wz), t.matmul(h, uz)), bz));
        NodeId r = t.sigmoid(t.add(t.add(t.matmul(xi, wr), t.matmul(h, ur)), br));
        NodeId n = t.tanh(t.add(t.add(t.matmul(xi, wn), t.matmul(t.mul(r, h), un)), bn));
        // h' = (1-z) . h + z . n
        NodeId keep = t.mul(t.add_scalar(t.scale(z, -1.0), 1.0), h);
        h = t.add(keep, t.mul(z, n));
        states[i] = h;
    }
    return t.concat_rows(states);
}

inline NodeId encode_block(Tape& t, const ParamNodes& p, const NcceModel& m,
                           const std::vector<std::size_t>& ids) {
    NodeId x = t.embedding_lookup(p.at("embed"), ids);
    if (m.cfg.encoder == EncoderVariant::recurrent) {
        NodeId fwd = gru_direction(t, p, "f", x, false);
        NodeId bwd = gru_direction(t, p, "b", x, true);
        return t.concat_cols({fwd, bwd});
    }
    NodeId xp = t.add(x, t.constant(positional_encoding(ids.size(), m.cfg.d)));
    AttentionResult att = self_attention(t, xp, p.at("enc.att.wq"), p.at("enc.att.wk"),
                                         p.at("enc.att.wv"));
    NodeId mixed = t.add(xp, att.out);
    return t.tanh(t.add(t.matmul(mixed, p.at("enc.att.wo")), p.at("enc.att.bo")));
}

}  // namespace detail

// Contextualized token states R^out (n x d). Sentences are encoded
// independently; sentences above the length cap are split into consecutive
// blocks with a warning.
inline NodeId encode(Tape& t, const ParamNodes& p, const NcceModel& m, const Document& doc,
                     const Vocabulary& vocab, std::ostream* warnings = &std::cerr) {
    if (doc.size() == 0) throw validation_error("cannot encode an empty document");
    std::vector<NodeId> blocks;
    for (const auto& sentence : doc.sentences()) {
        std::vector<std::size_t> ids = vocab.ids(sentence);
        if (ids.size() > m.cfg.max_sentence_len && warnings)
            *warnings << "warning: sentence of length " << ids.size() << " in document '"
                      << doc.id << "' split at " << m.cfg.max_sentence_len << " tokens\n";
        for (std::size_t b = 0; b < ids.size(); b += m.cfg.max_sentence_len) {
            std::size_t e = std::min(ids.size(), b + m.cfg.max_sentence_len);
            blocks.push_back(detail::encode_block(
                t, p, m, std::vector<std::size_t>(ids.begin() + b, ids.begin() + e)));
        }
    }
    return blocks.size() == 1 ? blocks[0] : t.concat_rows(blocks);
}

}  // namespace ncce
