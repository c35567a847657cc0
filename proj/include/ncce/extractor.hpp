#pragma once

#include <vector>

#include "ncce/corpus.hpp"
#include "ncce/encoder.hpp"
#include "ncce/semantics.hpp"

namespace ncce {

// Eq. 6 fusion gate: gate = sigma(h W^f1 + v W^f2 + b^f), u = gate.h + (1-gate).v.
struct FuseResult {
    NodeId u;
    NodeId gate;  // -1 when the configuration has no gate
};

inline FuseResult fuse(Tape& t, const ParamNodes& p, NodeId h, NodeId v) {
    if (!t.val(h).same_shape(t.val(v)))
        throw shape_error("fuse: h " + t.val(h).shape_str() + " vs v " + t.val(v).shape_str());
    NodeId gate = t.sigmoid(
        t.add(t.add(t.matmul(h, p.at("fuse.wf1")), t.matmul(v, p.at("fuse.wf2"))),
              p.at("fuse.bf")));
    NodeId inv = t.add_scalar(t.scale(gate, -1.0), 1.0);
    NodeId u = t.add(t.mul(gate, h), t.mul(inv, v));
    return {u, gate};
}

// "w/o gate" ablation: concatenation + linear projection back to d.
inline FuseResult fuse_concat(Tape& t, const ParamNodes& p, NodeId h, NodeId v) {
    NodeId u = t.add(t.matmul(t.concat_cols({h, v}), p.at("fuse.wcat")), p.at("fuse.bcat"));
    return {u, -1};
}

inline NodeId tag_logits(Tape& t, const ParamNodes& p, NodeId u) {
    return t.add(t.matmul(u, p.at("tag.w")), p.at("tag.b"));
}

// Per-token distribution over {B, I, O}.
inline NodeId tag_distribution(Tape& t, const ParamNodes& p, NodeId u) {
    return t.softmax_rows(tag_logits(t, p, u));
}

// Eq. 10 first term: summed cross-entropy of the tag distributions against gold.
inline NodeId extraction_loss(Tape& t, NodeId tag_probs, const TagSequence& gold) {
    const Tensor& probs = t.val(tag_probs);
    if (gold.tags.size() != probs.rows)
        throw shape_error("extraction_loss: " + std::to_string(gold.tags.size()) +
                          " gold tags for " + probs.shape_str());
    std::vector<std::size_t> targets;
    targets.reserve(gold.tags.size());
    for (Tag g : gold.tags) targets.push_back(static_cast<std::size_t>(g));
    return t.cross_entropy(tag_probs, targets, Reduction::sum);
}

// Everything the two stages consume for one document, assembled per config.
// `graph` is required unless the model is configured no_lexicon.
struct TokenStates {
    NodeId r_out;      // encoder output, n x d
    NodeId h;          // projected token states, n x d
    NodeId v = -1;     // semantically enriched states (absent when no_lexicon)
    NodeId u;          // fused states, n x d
    NodeId gate = -1;  // gate values (absent for no_gate / no_lexicon)
    NodeId tag_probs;  // n x 3
};

inline TokenStates token_states(Tape& t, const ParamNodes& p, const NcceModel& m,
                                const Document& doc, const Vocabulary& vocab,
                                const SememeGraph* graph, Rng& rng, bool training,
                                std::ostream* warnings = &std::cerr) {
    TokenStates s;
    s.r_out = encode(t, p, m, doc, vocab, warnings);
    s.r_out = t.dropout(s.r_out, m.cfg.dropout, rng, training);
    s.h = project_tokens(t, p, s.r_out);
    if (m.cfg.no_lexicon) {
        s.u = s.h;
    } else {
        if (!graph) throw config_error("model expects a sememe graph; none supplied");
        NodeId n0 = init_nodes(t, p, s.h, *graph);
        NodeId nl = gcn_forward(t, p, m, n0, normalized_adjacency(*graph));
        s.v = extract_token_states(t, nl, doc.size());
        FuseResult f = m.cfg.no_gate ? fuse_concat(t, p, s.h, s.v) : fuse(t, p, s.h, s.v);
        s.u = f.u;
        s.gate = f.gate;
    }
    s.u = t.dropout(s.u, m.cfg.dropout, rng, training);
    s.tag_probs = tag_distribution(t, p, s.u);
    return s;
}

// A predicted compound with its confidence: the mean, over covered tokens, of
// the probability assigned to each token's predicted tag.
struct ScoredSpan {
    Span span;
    double confidence = 0.0;
};

inline TagSequence argmax_tags(const Tensor& tag_probs) {
    TagSequence seq;
    seq.tags.reserve(tag_probs.rows);
    for (std::size_t r = 0; r < tag_probs.rows; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < tag_probs.cols; ++c)
            if (tag_probs.at(r, c) > tag_probs.at(r, best)) best = c;
        seq.tags.push_back(static_cast<Tag>(best));
    }
    return seq;
}

inline std::vector<ScoredSpan> extract_spans(const Tensor& tag_probs) {
    TagSequence seq = argmax_tags(tag_probs);
    std::vector<ScoredSpan> out;
    for (const Span& s : bio_decode(seq)) {
        double conf = 0.0;
        for (std::size_t tok = s.start; tok < s.end; ++tok)
            conf += tag_probs.at(tok, static_cast<std::size_t>(seq.tags[tok]));
        out.push_back({s, conf / static_cast<double>(s.width())});
    }
    return out;
}

}  // namespace ncce
