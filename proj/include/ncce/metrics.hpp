#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "ncce/corpus.hpp"

namespace ncce {

// Numerator/denominator pairs kept separate so corpus scores micro-average
// (sum counts, then divide).
struct MetricCounts {
    double rec_num = 0.0, rec_den = 0.0;
    double prec_num = 0.0, prec_den = 0.0;

    MetricCounts& operator+=(const MetricCounts& o) {
        rec_num += o.rec_num;
        rec_den += o.rec_den;
        prec_num += o.prec_num;
        prec_den += o.prec_den;
        return *this;
    }
};

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    MetricCounts counts;
};

inline PRF prf_from_counts(const MetricCounts& c) {
    PRF r;
    r.counts = c;
    r.recall = c.rec_den > 0.0 ? c.rec_num / c.rec_den : 0.0;
    r.precision = c.prec_den > 0.0 ? c.prec_num / c.prec_den : 0.0;
    double pr = r.precision + r.recall;
    r.f1 = pr > 0.0 ? 2.0 * r.precision * r.recall / pr : 0.0;
    return r;
}

// ---- compound extraction ----

// Exact-boundary matching; spans within a document are unique, so the match
// count is the size of the set intersection.
inline MetricCounts compound_counts(const std::vector<Span>& predicted,
                                    const std::vector<Span>& gold) {
    std::vector<Span> p = predicted, g = gold;
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    std::vector<Span> matched;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(matched));
    MetricCounts c;
    c.rec_num = c.prec_num = static_cast<double>(matched.size());
    c.rec_den = static_cast<double>(g.size());
    c.prec_den = static_cast<double>(p.size());
    return c;
}

inline PRF compound_prf(const std::vector<Span>& predicted, const std::vector<Span>& gold) {
    return prf_from_counts(compound_counts(predicted, gold));
}

// ---- chain metrics ----
//
// Key and response are partitions over their own mention (span) sets; mentions
// align by exact span identity. A mention absent from the other side is its
// own partition cell for MUC and intersects nothing for B^3.

namespace detail {

using ChainSets = std::vector<std::vector<Span>>;

inline ChainSets chain_sets(const ChainPartition& p) {
    ChainSets out;
    for (const auto& chain : p.chains) {
        std::vector<Span> s;
        for (std::size_t m : chain) s.push_back(p.compounds[m]);
        std::sort(s.begin(), s.end());
        out.push_back(std::move(s));
    }
    return out;
}

inline std::map<Span, std::size_t> owner_of(const ChainSets& chains) {
    std::map<Span, std::size_t> owner;
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (const Span& s : chains[c]) owner.emplace(s, c);
    return owner;
}

// MUC recall numerator/denominator of `a` against `b`.
inline void muc_side(const ChainSets& a, const ChainSets& b, double& num, double& den) {
    std::map<Span, std::size_t> owner = owner_of(b);
    for (const auto& chain : a) {
        std::vector<std::size_t> parts;
        std::size_t unaligned = 0;
        for (const Span& s : chain) {
            auto it = owner.find(s);
            if (it == owner.end())
                ++unaligned;  // each unaligned mention is its own partition cell
            else
                parts.push_back(it->second);
        }
        std::sort(parts.begin(), parts.end());
        parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
        num += static_cast<double>(chain.size()) - static_cast<double>(parts.size() + unaligned);
        den += static_cast<double>(chain.size()) - 1.0;
    }
}

// B^3 recall numerator/denominator of `a` against `b`.
inline void b3_side(const ChainSets& a, const ChainSets& b, double& num, double& den) {
    std::map<Span, std::size_t> owner = owner_of(b);
    for (const auto& chain : a) {
        for (const Span& s : chain) {
            double inter = 0.0;  // unaligned mention shares nothing with the other side
            auto it = owner.find(s);
            if (it != owner.end()) {
                const std::vector<Span>& other = b[it->second];
                std::vector<Span> tmp;
                std::set_intersection(chain.begin(), chain.end(), other.begin(), other.end(),
                                      std::back_inserter(tmp));
                inter = static_cast<double>(tmp.size());
            }
            num += inter / static_cast<double>(chain.size());
            den += 1.0;
        }
    }
}

inline double phi4(const std::vector<Span>& k, const std::vector<Span>& r) {
    std::vector<Span> tmp;
    std::set_intersection(k.begin(), k.end(), r.begin(), r.end(), std::back_inserter(tmp));
    return 2.0 * static_cast<double>(tmp.size()) / static_cast<double>(k.size() + r.size());
}

constexpr double kInf = 1e18;

// Minimum-cost assignment of all rows to distinct columns (rows <= cols),
// classic O(rows^2 * cols) Hungarian with potentials. Returns total cost.
inline double hungarian_min(const std::vector<std::vector<double>>& cost) {
    int n = static_cast<int>(cost.size());
    int m = n == 0 ? 0 : static_cast<int>(cost[0].size());
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            int i0 = p[j0], j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    for (int j = 1; j <= m; ++j)
        if (p[j] > 0) total += cost[p[j] - 1][j - 1];
    return total;
}

// Maximum-total-similarity one-to-one chain alignment.
inline double best_alignment(const ChainSets& key, const ChainSets& response) {
    if (key.empty() || response.empty()) return 0.0;
    const ChainSets& rows = key.size() <= response.size() ? key : response;
    const ChainSets& cols = key.size() <= response.size() ? response : key;
    std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) cost[i][j] = -phi4(rows[i], cols[j]);
    return -hungarian_min(cost);
}

}  // namespace detail

inline MetricCounts muc_counts(const ChainPartition& key, const ChainPartition& response) {
    detail::ChainSets k = detail::chain_sets(key), r = detail::chain_sets(response);
    MetricCounts c;
    detail::muc_side(k, r, c.rec_num, c.rec_den);
    detail::muc_side(r, k, c.prec_num, c.prec_den);
    return c;
}

inline MetricCounts b3_counts(const ChainPartition& key, const ChainPartition& response) {
    detail::ChainSets k = detail::chain_sets(key), r = detail::chain_sets(response);
    MetricCounts c;
    detail::b3_side(k, r, c.rec_num, c.rec_den);
    detail::b3_side(r, k, c.prec_num, c.prec_den);
    return c;
}

inline MetricCounts ceaf_phi4_counts(const ChainPartition& key, const ChainPartition& response) {
    detail::ChainSets k = detail::chain_sets(key), r = detail::chain_sets(response);
    double total = detail::best_alignment(k, r);
    MetricCounts c;
    c.rec_num = c.prec_num = total;
    c.rec_den = static_cast<double>(k.size());
    c.prec_den = static_cast<double>(r.size());
    return c;
}

inline PRF muc(const ChainPartition& key, const ChainPartition& response) {
    return prf_from_counts(muc_counts(key, response));
}

inline PRF b_cubed(const ChainPartition& key, const ChainPartition& response) {
    return prf_from_counts(b3_counts(key, response));
}

inline PRF ceaf_phi4(const ChainPartition& key, const ChainPartition& response) {
    return prf_from_counts(ceaf_phi4_counts(key, response));
}

struct ChainScores {
    PRF muc;
    PRF b3;
    PRF ceaf;
    double avg_f1 = 0.0;
};

inline ChainScores chain_scores_from_counts(const MetricCounts& m, const MetricCounts& b,
                                            const MetricCounts& c) {
    ChainScores s;
    s.muc = prf_from_counts(m);
    s.b3 = prf_from_counts(b);
    s.ceaf = prf_from_counts(c);
    s.avg_f1 = (s.muc.f1 + s.b3.f1 + s.ceaf.f1) / 3.0;
    return s;
}

namespace detail {

// Response corpus indexed by document id; ids must match one-to-one.
inline std::vector<std::pair<const ChainPartition*, const ChainPartition*>> aligned_partitions(
    const Corpus& predicted, const Corpus& gold) {
    if (predicted.size() != gold.size())
        throw validation_error("corpus size mismatch: " + std::to_string(predicted.size()) +
                               " predicted vs " + std::to_string(gold.size()) + " gold");
    std::map<std::string, const AnnotatedDocument*> by_id;
    for (const AnnotatedDocument& d : predicted) by_id.emplace(d.doc.id, &d);
    std::vector<std::pair<const ChainPartition*, const ChainPartition*>> out;
    for (const AnnotatedDocument& g : gold) {
        auto it = by_id.find(g.doc.id);
        if (it == by_id.end())
            throw validation_error("no prediction for document id '" + g.doc.id + "'");
        out.emplace_back(&it->second->gold, &g.gold);
    }
    return out;
}

}  // namespace detail

inline ChainScores end_to_end_chain_scores(const Corpus& predicted, const Corpus& gold) {
    MetricCounts m, b, c;
    for (auto [resp, key] : detail::aligned_partitions(predicted, gold)) {
        m += muc_counts(*key, *resp);
        b += b3_counts(*key, *resp);
        c += ceaf_phi4_counts(*key, *resp);
    }
    return chain_scores_from_counts(m, b, c);
}

inline PRF corpus_compound_prf(const Corpus& predicted, const Corpus& gold) {
    MetricCounts total;
    for (auto [resp, key] : detail::aligned_partitions(predicted, gold))
        total += compound_counts(resp->compounds, key->compounds);
    return prf_from_counts(total);
}

// ---- breakdown tables ----

struct LengthRow {
    std::size_t length = 0;
    double gold_count = 0.0;
    double raw_f1 = 0.0;
    double smooth_f1 = 0.0;  // sliding window of size 7 over lengths
};

inline std::vector<LengthRow> length_breakdown(const Corpus& predicted, const Corpus& gold) {
    std::size_t max_len = 0;
    for (const AnnotatedDocument& d : gold)
        for (const Span& s : d.gold.compounds) max_len = std::max(max_len, s.width());
    std::vector<LengthRow> rows;
    if (max_len == 0) return rows;
    auto of_width = [](const std::vector<Span>& spans, std::size_t w) {
        std::vector<Span> out;
        for (const Span& s : spans)
            if (s.width() == w) out.push_back(s);
        return out;
    };
    std::vector<MetricCounts> counts(max_len + 1);
    for (auto [resp, key] : detail::aligned_partitions(predicted, gold))
        for (std::size_t w = 1; w <= max_len; ++w)
            counts[w] += compound_counts(of_width(resp->compounds, w),
                                         of_width(key->compounds, w));
    for (std::size_t w = 1; w <= max_len; ++w) {
        LengthRow r;
        r.length = w;
        r.gold_count = counts[w].rec_den;
        r.raw_f1 = prf_from_counts(counts[w]).f1;
        rows.push_back(r);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t k = i >= 3 ? i - 3 : 0; k < rows.size() && k <= i + 3; ++k) {
            sum += rows[k].raw_f1;
            ++n;
        }
        rows[i].smooth_f1 = sum / static_cast<double>(n);
    }
    return rows;
}

struct ChainSizeRow {
    std::string bucket;
    double key_chains = 0.0;
    ChainScores scores;
};

// Chain metrics restricted to gold chains of a size bucket: the key keeps only
// those chains, and each response chain is cut down to the surviving mentions.
inline std::vector<ChainSizeRow> chain_size_breakdown(const Corpus& predicted,
                                                      const Corpus& gold) {
    struct Bucket {
        std::string label;
        std::size_t lo, hi;
    };
    const std::vector<Bucket> buckets{{"1", 1, 1},  {"2", 2, 2},  {"3", 3, 3},
                                      {"4", 4, 4},  {"5+", 5, static_cast<std::size_t>(-1)}};
    std::vector<ChainSizeRow> rows;
    for (const Bucket& bk : buckets) {
        MetricCounts m, b, c;
        double key_chains = 0.0;
        for (auto [resp, key] : detail::aligned_partitions(predicted, gold)) {
            // rebuild both partitions over the bucket's mention set
            std::vector<Span> keep;
            std::vector<std::vector<std::size_t>> kchains;
            std::vector<Span> kcomp;
            for (const auto& chain : key->chains) {
                if (chain.size() < bk.lo || chain.size() > bk.hi) continue;
                std::vector<std::size_t> members;
                for (std::size_t mi : chain) {
                    members.push_back(kcomp.size());
                    kcomp.push_back(key->compounds[mi]);
                    keep.push_back(key->compounds[mi]);
                }
                kchains.push_back(std::move(members));
            }
            key_chains += static_cast<double>(kchains.size());
            std::sort(keep.begin(), keep.end());
            std::vector<Span> rcomp;
            std::vector<std::vector<std::size_t>> rchains;
            for (const auto& chain : resp->chains) {
                std::vector<std::size_t> members;
                for (std::size_t mi : chain) {
                    const Span& s = resp->compounds[mi];
                    if (std::binary_search(keep.begin(), keep.end(), s)) {
                        members.push_back(rcomp.size());
                        rcomp.push_back(s);
                    }
                }
                if (!members.empty()) rchains.push_back(std::move(members));
            }
            auto canon = [](std::vector<Span> comp, std::vector<std::vector<std::size_t>> ch) {
                // reindex into ascending-span order expected by ChainPartition
                std::vector<std::size_t> order(comp.size());
                for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                std::sort(order.begin(), order.end(),
                          [&](std::size_t a, std::size_t b) { return comp[a] < comp[b]; });
                std::vector<std::size_t> rank(comp.size());
                for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
                std::vector<Span> sorted;
                for (std::size_t i : order) sorted.push_back(comp[i]);
                for (auto& chain : ch)
                    for (std::size_t& mi : chain) mi = rank[mi];
                std::size_t n_tokens = 0;
                for (const Span& s : sorted) n_tokens = std::max(n_tokens, s.end);
                return ChainPartition::make(std::move(sorted), std::move(ch), n_tokens);
            };
            if (kcomp.empty() && rcomp.empty()) continue;
            ChainPartition kp = canon(std::move(kcomp), std::move(kchains));
            ChainPartition rp = canon(std::move(rcomp), std::move(rchains));
            m += muc_counts(kp, rp);
            b += b3_counts(kp, rp);
            c += ceaf_phi4_counts(kp, rp);
        }
        ChainSizeRow row;
        row.bucket = bk.label;
        row.key_chains = key_chains;
        row.scores = chain_scores_from_counts(m, b, c);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace ncce
