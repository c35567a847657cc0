#pragma once

#include <algorithm>
#include <cstdio>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "ncce/metrics.hpp"
#include "ncce/trainer.hpp"

namespace ncce {

struct SplitCorpus {
    Corpus train;
    Corpus dev;
    Corpus test;
};

// Deterministic three-way split by document position.
inline SplitCorpus split_corpus(const Corpus& corpus, std::size_t n_train, std::size_t n_dev,
                                std::size_t n_test) {
    if (n_train + n_dev + n_test > corpus.size())
        throw validation_error("split wants " + std::to_string(n_train + n_dev + n_test) +
                               " documents, corpus has " + std::to_string(corpus.size()));
    SplitCorpus s;
    auto it = corpus.begin();
    s.train.assign(it, it + n_train);
    s.dev.assign(it + n_train, it + n_train + n_dev);
    s.test.assign(it + n_train + n_dev, it + n_train + n_dev + n_test);
    return s;
}

struct GridConfig {
    std::string name;
    TrainConfig train;
};

struct ExperimentGrid {
    std::vector<GridConfig> configs;
    std::vector<std::uint64_t> seeds;
};

struct GridCell {
    std::string config;
    std::uint64_t seed = 0;
    double compound_f1 = 0.0;
    double muc_f1 = 0.0;
    double b3_f1 = 0.0;
    double ceaf_f1 = 0.0;
    double avg_chain_f1 = 0.0;
    std::size_t best_epoch = 0;
};

struct GridRow {
    std::string config;
    std::vector<GridCell> cells;  // one per seed, in grid seed order
    GridCell median;              // per-metric medians across the cells
    // breakdowns from the seed whose avg chain F1 is the median
    std::vector<LengthRow> length;
    std::vector<ChainSizeRow> sizes;
};

struct GridResult {
    std::vector<GridRow> rows;
};

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

struct CellOutcome {
    GridCell cell;
    Corpus predictions;
};

inline CellOutcome run_cell(const SplitCorpus& splits, const Lexicon& lex, GridConfig gc,
                            std::uint64_t seed) {
    gc.train.seed = seed;
    std::ostringstream sink;  // cells run concurrently; keep warnings off shared streams
    TrainResult tr = train(splits.train, splits.dev, lex, gc.train, &sink);
    CellOutcome out;
    out.predictions = predict(tr.system, splits.test, gc.train.lambda, &sink);
    out.cell.config = gc.name;
    out.cell.seed = seed;
    out.cell.compound_f1 = corpus_compound_prf(out.predictions, splits.test).f1;
    ChainScores cs = end_to_end_chain_scores(out.predictions, splits.test);
    out.cell.muc_f1 = cs.muc.f1;
    out.cell.b3_f1 = cs.b3.f1;
    out.cell.ceaf_f1 = cs.ceaf.f1;
    out.cell.avg_chain_f1 = cs.avg_f1;
    out.cell.best_epoch = tr.best_epoch;
    return out;
}

}  // namespace detail

// Trains every (config, seed) cell — cells run in parallel, each internally
// single-threaded — and scores test predictions. Row medians are per-metric.
inline GridResult run_grid(const SplitCorpus& splits, const Lexicon& lex,
                           const ExperimentGrid& grid) {
    if (grid.configs.empty()) throw config_error("grid has no configurations");
    if (grid.seeds.empty()) throw config_error("grid has no seeds");
    for (std::size_t i = 0; i < grid.configs.size(); ++i)
        for (std::size_t j = i + 1; j < grid.configs.size(); ++j)
            if (grid.configs[i].name == grid.configs[j].name)
                throw config_error("duplicate grid config name '" + grid.configs[i].name + "'");

    std::vector<std::future<detail::CellOutcome>> futures;
    for (const GridConfig& gc : grid.configs)
        for (std::uint64_t seed : grid.seeds)
            futures.push_back(std::async(std::launch::async, detail::run_cell, std::cref(splits),
                                         std::cref(lex), gc, seed));

    GridResult res;
    std::size_t f = 0;
    for (const GridConfig& gc : grid.configs) {
        GridRow row;
        row.config = gc.name;
        std::vector<detail::CellOutcome> outcomes;
        for (std::size_t s = 0; s < grid.seeds.size(); ++s)
            outcomes.push_back(futures[f++].get());
        for (const auto& o : outcomes) row.cells.push_back(o.cell);

        auto metric_median = [&](double GridCell::* field) {
            std::vector<double> v;
            for (const GridCell& c : row.cells) v.push_back(c.*field);
            return detail::median_of(std::move(v));
        };
        row.median.config = gc.name;
        row.median.compound_f1 = metric_median(&GridCell::compound_f1);
        row.median.muc_f1 = metric_median(&GridCell::muc_f1);
        row.median.b3_f1 = metric_median(&GridCell::b3_f1);
        row.median.ceaf_f1 = metric_median(&GridCell::ceaf_f1);
        row.median.avg_chain_f1 = metric_median(&GridCell::avg_chain_f1);

        // breakdowns from the median cell by avg chain F1 (lower middle)
        std::vector<std::size_t> order(outcomes.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return outcomes[a].cell.avg_chain_f1 < outcomes[b].cell.avg_chain_f1;
        });
        const Corpus& mid_pred = outcomes[order[(order.size() - 1) / 2]].predictions;
        row.length = length_breakdown(mid_pred, splits.test);
        row.sizes = chain_size_breakdown(mid_pred, splits.test);
        res.rows.push_back(std::move(row));
    }
    return res;
}

namespace detail {

inline std::string fixed(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

inline std::string pct(double v) { return fixed(100.0 * v, 1); }

}  // namespace detail

// Stable-ordered TSV: one line per cell plus a `median` line per config.
inline std::string grid_tsv(const GridResult& res) {
    std::ostringstream out;
    out << "config\tseed\tcompound_f1\tmuc_f1\tb3_f1\tceaf_f1\tavg_chain_f1\tbest_epoch\n";
    auto line = [&](const GridCell& c, const std::string& seed_label, bool with_epoch) {
        out << c.config << '\t' << seed_label << '\t' << detail::fixed(c.compound_f1) << '\t'
            << detail::fixed(c.muc_f1) << '\t' << detail::fixed(c.b3_f1) << '\t'
            << detail::fixed(c.ceaf_f1) << '\t' << detail::fixed(c.avg_chain_f1) << '\t'
            << (with_epoch ? std::to_string(c.best_epoch) : "-") << '\n';
    };
    for (const GridRow& row : res.rows) {
        for (const GridCell& c : row.cells) line(c, std::to_string(c.seed), true);
        line(row.median, "median", false);
    }
    return out.str();
}

inline std::string grid_report(const GridResult& res) {
    std::ostringstream out;
    out << "== results (median over seeds, %F1) ==\n";
    out << "config                    compound   MUC    B3     CEAF   avg-chain\n";
    for (const GridRow& row : res.rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-25s %8s %6s %6s %6s %9s\n", row.config.c_str(),
                      detail::pct(row.median.compound_f1).c_str(),
                      detail::pct(row.median.muc_f1).c_str(),
                      detail::pct(row.median.b3_f1).c_str(),
                      detail::pct(row.median.ceaf_f1).c_str(),
                      detail::pct(row.median.avg_chain_f1).c_str());
        out << buf;
    }
    for (const GridRow& row : res.rows) {
        out << "\n== " << row.config << ": compound F1 by length (median seed) ==\n";
        out << "length  gold  F1%    smoothed%\n";
        for (const LengthRow& lr : row.length) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%-7zu %-5.0f %-6s %s\n", lr.length, lr.gold_count,
                          detail::pct(lr.raw_f1).c_str(), detail::pct(lr.smooth_f1).c_str());
            out << buf;
        }
        out << "\n== " << row.config << ": chain scores by gold chain size (median seed) ==\n";
        out << "size  chains  MUC%   B3%    CEAF%  avg%\n";
        for (const ChainSizeRow& sr : row.sizes) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%-5s %-7.0f %-6s %-6s %-6s %s\n", sr.bucket.c_str(),
                          sr.key_chains, detail::pct(sr.scores.muc.f1).c_str(),
                          detail::pct(sr.scores.b3.f1).c_str(),
                          detail::pct(sr.scores.ceaf.f1).c_str(),
                          detail::pct(sr.scores.avg_f1).c_str());
            out << buf;
        }
    }
    return out.str();
}

// Table 2's desk-scale ablation axes over the synthetic corpus.
inline ExperimentGrid default_grid(const TrainConfig& base) {
    ExperimentGrid g;
    GridConfig full{"joint-full", base};
    full.train.mode = TrainMode::joint;

    GridConfig nolex{"joint-no-lexicon", full.train};
    nolex.train.model.no_lexicon = true;

    GridConfig nogate{"joint-no-gate", full.train};
    nogate.train.model.no_gate = true;

    GridConfig attn{"joint-attention", full.train};
    attn.train.model.encoder = EncoderVariant::attention;

    GridConfig pipe{"pipeline", full.train};
    pipe.train.mode = TrainMode::pipeline;

    g.configs = {full, nolex, nogate, attn, pipe};
    g.seeds = {1, 2, 3};
    return g;
}

}  // namespace ncce
