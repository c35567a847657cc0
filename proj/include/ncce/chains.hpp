#pragma once

#include <utility>
#include <vector>

#include "ncce/corpus.hpp"
#include "ncce/model.hpp"
#include "ncce/tape.hpp"

namespace ncce {

// Width buckets {1, 2, 3, 4, 5-7, 8-15, 16-31, 32+} -> row of the d_w table.
inline std::size_t width_bucket(std::size_t width) {
    if (width <= 4) return width - 1;
    if (width <= 7) return 4;
    if (width <= 15) return 5;
    if (width <= 31) return 6;
    return 7;
}

// Eq. 7/8 span representation p = [u_x ; u_y ; c_att ; c_wid] with
// c_att = sum_t alpha_t u_t, alpha = softmax(tanh(u W^att)) over span tokens.
struct SpanRepr {
    NodeId p;      // 1 x (3d + d_w)
    NodeId alpha;  // 1 x width, sums to 1
};

inline SpanRepr span_repr(Tape& t, const ParamNodes& p, NodeId u, const Span& s) {
    const Tensor& U = t.val(u);
    if (s.start >= s.end || s.end > U.rows)
        throw validation_error("span_repr: invalid span " + to_string(s) + " over " +
                               std::to_string(U.rows) + " tokens");
    NodeId us = t.slice_rows(u, s.start, s.end);
    NodeId scores = t.tanh(t.matmul(us, p.at("chain.watt")));          // w x 1
    NodeId alpha = t.softmax_rows(t.transpose(scores));                // 1 x w
    NodeId c_att = t.matmul(alpha, us);                                // 1 x d
    NodeId ux = t.slice_rows(u, s.start, s.start + 1);
    NodeId uy = t.slice_rows(u, s.end - 1, s.end);
    NodeId wid = t.embedding_lookup(p.at("chain.wid"), {width_bucket(s.width())});
    return {t.concat_cols({ux, uy, c_att, wid}), alpha};
}

inline std::vector<SpanRepr> span_reprs(Tape& t, const ParamNodes& p, NodeId u,
                                        const std::vector<Span>& spans) {
    std::vector<SpanRepr> out;
    out.reserve(spans.size());
    for (const Span& s : spans) out.push_back(span_repr(t, p, u, s));
    return out;
}

// All ordered pairs (i, j), j < i, scored with the Eq. 9 two-class softmax over
// r_ij = [p_i ; p_j ; p_i.p_j ; p_i+p_j]. Column 1 is the same-chain class.
struct PairSet {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    NodeId probs = -1;  // |pairs| x 2; -1 when there are no pairs

    bool empty() const { return pairs.empty(); }
};

inline PairSet score_pairs(Tape& t, const ParamNodes& p, const std::vector<SpanRepr>& reprs) {
    PairSet ps;
    std::vector<NodeId> rows;
    for (std::size_t i = 1; i < reprs.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            NodeId pi = reprs[i].p, pj = reprs[j].p;
            rows.push_back(t.concat_cols({pi, pj, t.mul(pi, pj), t.add(pi, pj)}));
            ps.pairs.emplace_back(i, j);
        }
    }
    if (rows.empty()) return ps;
    NodeId r = rows.size() == 1 ? rows[0] : t.concat_rows(rows);
    ps.probs = t.softmax_rows(t.add(t.matmul(r, p.at("chain.wr")), p.at("chain.br")));
    return ps;
}

// Convenience for a single ordered pair: probability the two spans share a chain.
inline double pair_probability(Tape& t, const ParamNodes& p, const SpanRepr& pi,
                               const SpanRepr& pj) {
    PairSet ps = score_pairs(t, p, {pj, pi});
    return t.val(ps.probs).at(0, 1);
}

// Eq. 10 second term: mean two-class cross-entropy over the R pairs, with gold
// label 1 iff the two compounds share a gold chain. Zero when fewer than 2
// compounds exist.
inline NodeId chain_loss(Tape& t, const PairSet& ps, const ChainPartition& gold) {
    if (ps.empty()) return t.constant(Tensor::scalar(0.0));
    std::vector<std::size_t> owner = gold.chain_of();
    std::vector<std::size_t> targets;
    targets.reserve(ps.pairs.size());
    for (auto [i, j] : ps.pairs) targets.push_back(owner[i] == owner[j] ? 1 : 0);
    return t.cross_entropy(ps.probs, targets, Reduction::mean);
}

// Lower-triangular ancestor probabilities: at(i, j) for j < i.
inline Tensor pair_matrix(const Tape& t, const PairSet& ps, std::size_t m) {
    Tensor P(m, m);
    if (!ps.empty()) {
        const Tensor& probs = t.val(ps.probs);
        for (std::size_t r = 0; r < ps.pairs.size(); ++r)
            P.at(ps.pairs[r].first, ps.pairs[r].second) = probs.at(r, 1);
    }
    return P;
}

// Index of the maximal candidate probability; exact ties go to the nearest
// (last) candidate. Candidates are ordered by ancestor position.
inline std::size_t tie_break(const std::vector<double>& candidates) {
    if (candidates.empty()) throw validation_error("tie_break: no candidates");
    std::size_t best = 0;
    for (std::size_t k = 1; k < candidates.size(); ++k)
        if (candidates[k] >= candidates[best]) best = k;
    return best;
}

// §4.4 heuristic search: left-to-right, each compound joins its best-scoring
// earlier compound's chain when that score exceeds lambda, else starts a new
// chain.
inline ChainPartition decode_chains(const std::vector<Span>& compounds, const Tensor& pair_probs,
                                    double lambda, std::size_t n_tokens) {
    std::size_t m = compounds.size();
    if (pair_probs.rows < m || pair_probs.cols < m)
        throw shape_error("decode_chains: probability matrix " + pair_probs.shape_str() +
                          " for " + std::to_string(m) + " compounds");
    std::vector<std::vector<std::size_t>> chains;
    std::vector<std::size_t> owner(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        bool placed = false;
        if (i > 0) {
            std::vector<double> cand(pair_probs.data.begin() + i * pair_probs.cols,
                                     pair_probs.data.begin() + i * pair_probs.cols + i);
            std::size_t k = tie_break(cand);
            if (cand[k] > lambda) {
                owner[i] = owner[k];
                chains[owner[i]].push_back(i);
                placed = true;
            }
        }
        if (!placed) {
            owner[i] = chains.size();
            chains.push_back({i});
        }
    }
    return ChainPartition::make(compounds, std::move(chains), n_tokens);
}

}  // namespace ncce
