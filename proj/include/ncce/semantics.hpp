#pragma once

#include <vector>

#include "ncce/lexicon.hpp"
#include "ncce/model.hpp"
#include "ncce/tape.hpp"

namespace ncce {

// Projected token states h_i = R^out W^t + b^t (rows of the token block of N^0
// and one operand of the fusion gate).
inline NodeId project_tokens(Tape& t, const ParamNodes& p, NodeId r_out) {
    return t.add(t.matmul(r_out, p.at("sem.wt")), p.at("sem.bt"));
}

// N^0: projected token rows stacked over looked-up concept embeddings.
inline NodeId init_nodes(Tape& t, const ParamNodes& p, NodeId h, const SememeGraph& g) {
    if (g.n_concepts() == 0) return h;
    const Tensor& table = t.val(p.at("sem.e"));
    std::vector<std::size_t> ids;
    ids.reserve(g.n_concepts());
    for (int c : g.concepts) {
        if (c < 0 || static_cast<std::size_t>(c) >= table.rows)
            throw validation_error("concept id " + std::to_string(c) +
                                   " outside embedding table of " + std::to_string(table.rows));
        ids.push_back(static_cast<std::size_t>(c));
    }
    return t.concat_rows({h, t.embedding_lookup(p.at("sem.e"), ids)});
}

inline NodeId apply_activation(Tape& t, NodeId x, Activation f) {
    switch (f) {
        case Activation::relu: return t.relu(x);
        case Activation::tanh: return t.tanh(x);
        case Activation::identity: return x;
    }
    throw config_error("unhandled activation");
}

// L rounds of N <- f(A_hat N W^l).
inline NodeId gcn_forward(Tape& t, const ParamNodes& p, const NcceModel& m, NodeId n0,
                          const Tensor& a_hat) {
    if (a_hat.rows != t.val(n0).rows)
        throw shape_error("gcn: adjacency " + a_hat.shape_str() + " vs nodes " +
                          t.val(n0).shape_str());
    NodeId adj = t.constant(a_hat);
    NodeId n = n0;
    for (std::size_t l = 0; l < m.cfg.gcn_layers; ++l) {
        NodeId wl = p.at("sem.gcn.w" + std::to_string(l));
        n = apply_activation(t, t.matmul(t.matmul(adj, n), wl), m.cfg.activation);
    }
    return n;
}

// v_1..v_n = N^L[0:n, :].
inline NodeId extract_token_states(Tape& t, NodeId nl, std::size_t n_tokens) {
    if (n_tokens == t.val(nl).rows) return nl;
    return t.slice_rows(nl, 0, n_tokens);
}

}  // namespace ncce
