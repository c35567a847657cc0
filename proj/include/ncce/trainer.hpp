#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncce/adam.hpp"
#include "ncce/chains.hpp"
#include "ncce/corpus.hpp"
#include "ncce/encoder.hpp"
#include "ncce/extractor.hpp"
#include "ncce/lexicon.hpp"
#include "ncce/metrics.hpp"
#include "ncce/model.hpp"

namespace ncce {

enum class TrainMode { joint, pipeline };

inline std::string to_string(TrainMode m) {
    return m == TrainMode::joint ? "joint" : "pipeline";
}

inline TrainMode train_mode_from_string(const std::string& s) {
    if (s == "joint") return TrainMode::joint;
    if (s == "pipeline") return TrainMode::pipeline;
    throw config_error("unknown mode '" + s + "' (expected joint|pipeline)");
}

struct TrainConfig {
    TrainMode mode = TrainMode::joint;
    double mu = 0.4;      // loss coupling L = L_l + mu * L_r
    double lambda = 0.5;  // decode threshold
    double lr = 1e-3;     // small trainable encoder; the paper's 1e-5 suits a pretrained LM
    double warmup_fraction = 0.1;
    double weight_decay = 0.01;
    double clip_norm = 5.0;
    std::size_t max_epochs = 300;
    std::size_t patience = 35;
    std::uint64_t seed = 1;
    ModelConfig model;  // dropout, ablation flags, encoder variant, sizes

    void check() const {
        if (mode == TrainMode::joint && !(mu > 0.0))
            throw config_error("mu must be > 0 in joint mode");
        if (patience < 1) throw config_error("patience must be >= 1");
        if (max_epochs < 1) throw config_error("max_epochs must be >= 1");
        if (!(clip_norm > 0.0)) throw config_error("clip_norm must be > 0");
    }

    // Dev-based selection and the patience counter only engage once the lr
    // ramp is over: checkpoints taken at a reduced rate are transient states
    // and picking one starves the epochs that matter.
    std::size_t selection_floor() const {
        auto w = static_cast<std::size_t>(
            std::ceil(warmup_fraction * static_cast<double>(max_epochs)));
        return std::min(w, max_epochs - 1);
    }
};

inline nlohmann::ordered_json train_config_to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["mode"] = to_string(c.mode);
    j["mu"] = c.mu;
    j["lambda"] = c.lambda;
    j["lr"] = c.lr;
    j["warmup_fraction"] = c.warmup_fraction;
    j["weight_decay"] = c.weight_decay;
    j["clip_norm"] = c.clip_norm;
    j["max_epochs"] = c.max_epochs;
    j["patience"] = c.patience;
    j["seed"] = c.seed;
    j["model"] = config_to_json(c.model);
    return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.mode = train_mode_from_string(j.at("mode").get<std::string>());
        c.mu = j.at("mu").get<double>();
        c.lambda = j.at("lambda").get<double>();
        c.lr = j.at("lr").get<double>();
        c.warmup_fraction = j.at("warmup_fraction").get<double>();
        c.weight_decay = j.at("weight_decay").get<double>();
        c.clip_norm = j.at("clip_norm").get<double>();
        c.max_epochs = j.at("max_epochs").get<std::size_t>();
        c.patience = j.at("patience").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.model = config_from_json(j.at("model"));
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("bad train config: ") + e.what());
    }
    return c;
}

struct EpochLog {
    std::string stage;  // "joint" | "stage1" | "stage2"
    std::size_t epoch = 0;
    double loss_l = 0.0;
    double loss_r = 0.0;
    double dev_compound_f1 = 0.0;
    double dev_muc_f1 = 0.0;
    double dev_b3_f1 = 0.0;
    double dev_ceaf_f1 = 0.0;
    double dev_avg_chain_f1 = 0.0;
};

inline nlohmann::ordered_json epoch_log_to_json(const EpochLog& e) {
    nlohmann::ordered_json j;
    j["stage"] = e.stage;
    j["epoch"] = e.epoch;
    j["loss_l"] = e.loss_l;
    j["loss_r"] = e.loss_r;
    j["dev_compound_f1"] = e.dev_compound_f1;
    j["dev_muc_f1"] = e.dev_muc_f1;
    j["dev_b3_f1"] = e.dev_b3_f1;
    j["dev_ceaf_f1"] = e.dev_ceaf_f1;
    j["dev_avg_chain_f1"] = e.dev_avg_chain_f1;
    return j;
}

// A trained system: vocabulary + lexicon + model(s). Joint mode has a single
// model; pipeline mode adds a separate chain model with its own encoder.
struct NcceSystem {
    TrainMode mode = TrainMode::joint;
    double lambda = 0.5;
    Vocabulary vocab;
    Lexicon lexicon;  // unused when the model config says no_lexicon
    NcceModel tagger;
    NcceModel chainer;
    bool has_chainer = false;

    const NcceModel& chain_model() const { return has_chainer ? chainer : tagger; }
};

// ---- per-document losses ----

struct LossParts {
    NodeId total = -1;
    NodeId l_l = -1;
    NodeId l_r = -1;
};

inline LossParts document_loss(Tape& t, const ParamNodes& p, const NcceModel& m,
                               const AnnotatedDocument& ad, const Vocabulary& vocab,
                               const SememeGraph* graph, Rng& rng, double mu, bool training,
                               std::ostream* warnings = nullptr) {
    LossParts lp;
    TokenStates ts = token_states(t, p, m, ad.doc, vocab, graph, rng, training, warnings);
    lp.l_l = extraction_loss(t, ts.tag_probs, bio_encode(ad.doc.size(), ad.gold.compounds));
    // teacher forcing: chain detector trains over gold spans
    std::vector<SpanRepr> reprs = span_reprs(t, p, ts.u, ad.gold.compounds);
    PairSet ps = score_pairs(t, p, reprs);
    lp.l_r = chain_loss(t, ps, ad.gold);
    lp.total = t.add(lp.l_l, t.scale(lp.l_r, mu));
    return lp;
}

inline NodeId chain_only_loss(Tape& t, const ParamNodes& p, const NcceModel& m,
                              const AnnotatedDocument& ad, const Vocabulary& vocab,
                              const SememeGraph* graph, Rng& rng, bool training,
                              std::ostream* warnings = nullptr) {
    TokenStates ts = token_states(t, p, m, ad.doc, vocab, graph, rng, training, warnings);
    std::vector<SpanRepr> reprs = span_reprs(t, p, ts.u, ad.gold.compounds);
    return chain_loss(t, score_pairs(t, p, reprs), ad.gold);
}

// ---- prediction ----

namespace detail {

inline std::vector<std::optional<SememeGraph>> build_graphs(const NcceModel& m,
                                                            const Corpus& corpus,
                                                            const Lexicon& lex) {
    std::vector<std::optional<SememeGraph>> graphs(corpus.size());
    if (m.cfg.no_lexicon) return graphs;
    for (std::size_t i = 0; i < corpus.size(); ++i) graphs[i] = build_graph(corpus[i].doc, lex);
    return graphs;
}

inline const SememeGraph* graph_ptr(const std::optional<SememeGraph>& g) {
    return g ? &*g : nullptr;
}

}  // namespace detail

inline ChainPartition predict_document(const NcceSystem& sys, const Document& doc,
                                       double lambda, std::ostream* warnings = nullptr) {
    Rng rng(0);  // inert: dropout is identity outside training
    std::optional<SememeGraph> tag_graph, chain_graph;
    if (!sys.tagger.cfg.no_lexicon) tag_graph = build_graph(doc, sys.lexicon);

    Tape t;
    ParamNodes p = register_params(t, sys.tagger, /*requires_grad=*/false);
    TokenStates ts =
        token_states(t, p, sys.tagger, doc, sys.vocab, detail::graph_ptr(tag_graph), rng,
                     /*training=*/false, warnings);
    std::vector<Span> spans;
    for (const ScoredSpan& s : extract_spans(t.val(ts.tag_probs))) spans.push_back(s.span);
    if (spans.empty()) return ChainPartition::make({}, {}, doc.size());

    // pipeline: re-encode with the chain model's own encoder
    Tape t2;
    Tape* ct = &t;
    NodeId u = ts.u;
    ParamNodes p2;
    const ParamNodes* cp = &p;
    if (sys.has_chainer) {
        if (!sys.chainer.cfg.no_lexicon) chain_graph = build_graph(doc, sys.lexicon);
        p2 = register_params(t2, sys.chainer, /*requires_grad=*/false);
        TokenStates cs =
            token_states(t2, p2, sys.chainer, doc, sys.vocab, detail::graph_ptr(chain_graph),
                         rng, /*training=*/false, warnings);
        ct = &t2;
        cp = &p2;
        u = cs.u;
    }
    std::vector<SpanRepr> reprs = span_reprs(*ct, *cp, u, spans);
    PairSet ps = score_pairs(*ct, *cp, reprs);
    Tensor probs = pair_matrix(*ct, ps, spans.size());
    return decode_chains(spans, probs, lambda, doc.size());
}

inline Corpus predict(const NcceSystem& sys, const std::vector<Document>& docs, double lambda,
                      std::ostream* warnings = nullptr) {
    Corpus out;
    out.reserve(docs.size());
    for (const Document& d : docs) {
        AnnotatedDocument ad;
        ad.doc = d;
        ad.gold = predict_document(sys, d, lambda, warnings);
        out.push_back(std::move(ad));
    }
    return out;
}

inline Corpus predict(const NcceSystem& sys, const Corpus& corpus, double lambda,
                      std::ostream* warnings = nullptr) {
    std::vector<Document> docs;
    docs.reserve(corpus.size());
    for (const AnnotatedDocument& ad : corpus) docs.push_back(ad.doc);
    return predict(sys, docs, lambda, warnings);
}

struct DevScores {
    double compound_f1 = 0.0;
    ChainScores chains;
};

inline DevScores dev_scores(const NcceSystem& sys, const Corpus& dev,
                            std::ostream* warnings = nullptr) {
    Corpus pred = predict(sys, dev, sys.lambda, warnings);
    DevScores s;
    s.compound_f1 = corpus_compound_prf(pred, dev).f1;
    s.chains = end_to_end_chain_scores(pred, dev);
    return s;
}

// ---- training ----

struct TrainResult {
    NcceSystem system;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_dev_avg_chain_f1 = 0.0;
};

namespace detail {

inline std::vector<Tensor> collect_grads(Tape& t, const ParamNodes& p,
                                         const std::vector<std::string>& names) {
    std::vector<Tensor> g;
    g.reserve(names.size());
    for (const std::string& n : names) g.push_back(t.grad(p.at(n)));
    return g;
}

// One clipped AdamW update restricted to `names` (stage-2 training must leave
// the tag classifier untouched).
inline void apply_update(NcceModel& model, Tape& t, const ParamNodes& p, Adam& opt,
                         const std::vector<std::string>& names, double clip_norm) {
    std::vector<Tensor> grads = collect_grads(t, p, names);
    std::vector<Tensor*> gptr;
    for (Tensor& g : grads) gptr.push_back(&g);
    clip_global_norm(gptr, clip_norm);
    std::vector<Tensor*> params;
    std::vector<const Tensor*> gconst;
    for (std::size_t i = 0; i < names.size(); ++i) {
        params.push_back(&model.param(names[i]));
        gconst.push_back(&grads[i]);
    }
    opt.step(std::move(params), std::move(gconst));
}

inline void check_finite_loss(double loss, const std::string& stage, std::size_t epoch,
                              const std::string& doc_id, double l_l, double l_r) {
    if (std::isfinite(loss)) return;
    throw error("training diverged (" + stage + ", epoch " + std::to_string(epoch) +
                ", document '" + doc_id + "'): loss=" + std::to_string(loss) +
                " l_l=" + std::to_string(l_l) + " l_r=" + std::to_string(l_r));
}

inline ModelConfig resolve_model_config(ModelConfig mcfg, const Vocabulary& vocab,
                                        const Lexicon& lex) {
    mcfg.vocab_size = vocab.size();
    if (!mcfg.no_lexicon) {
        if (lex.concept_count() == 0)
            throw config_error("lexicon has no concepts; train with no_lexicon instead");
        mcfg.concept_count = lex.concept_count();
    } else {
        mcfg.concept_count = 0;
    }
    return mcfg;
}

}  // namespace detail

inline TrainResult train_joint(const Corpus& train, const Corpus& dev, const Lexicon& lex,
                               const TrainConfig& cfg, std::ostream* warnings = nullptr) {
    cfg.check();
    if (cfg.mode != TrainMode::joint) throw config_error("train_joint called with pipeline config");
    if (train.empty() || dev.empty())
        throw validation_error("training and development splits must be nonempty");

    TrainResult res;
    res.system.mode = TrainMode::joint;
    res.system.lambda = cfg.lambda;
    res.system.vocab = Vocabulary::build(train);
    res.system.lexicon = lex;
    ModelConfig mcfg = detail::resolve_model_config(cfg.model, res.system.vocab, lex);
    NcceModel model = NcceModel::init(mcfg, cfg.seed);

    auto graphs = detail::build_graphs(model, train, lex);
    Adam opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.warmup_fraction,
              cfg.max_epochs * train.size()});
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    NcceModel best = model;
    double best_f1 = -1.0;
    std::size_t best_epoch = 0, since_best = 0;
    const std::size_t sel_floor = cfg.selection_floor();
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double sum_l = 0.0, sum_r = 0.0;
        for (std::size_t idx : order) {
            Tape t;
            ParamNodes p = register_params(t, model);
            LossParts lp = document_loss(t, p, model, train[idx], res.system.vocab,
                                         detail::graph_ptr(graphs[idx]), rng, cfg.mu,
                                         /*training=*/true, warnings);
            double l_l = t.val(lp.l_l).item(), l_r = t.val(lp.l_r).item();
            detail::check_finite_loss(t.val(lp.total).item(), "joint", epoch, train[idx].doc.id,
                                      l_l, l_r);
            sum_l += l_l;
            sum_r += l_r;
            t.backward(lp.total);
            detail::apply_update(model, t, p, opt, model.names(), cfg.clip_norm);
        }

        res.system.tagger = model;
        DevScores ds = dev_scores(res.system, dev, warnings);
        EpochLog el;
        el.stage = "joint";
        el.epoch = epoch;
        el.loss_l = sum_l / static_cast<double>(train.size());
        el.loss_r = sum_r / static_cast<double>(train.size());
        el.dev_compound_f1 = ds.compound_f1;
        el.dev_muc_f1 = ds.chains.muc.f1;
        el.dev_b3_f1 = ds.chains.b3.f1;
        el.dev_ceaf_f1 = ds.chains.ceaf.f1;
        el.dev_avg_chain_f1 = ds.chains.avg_f1;
        res.log.push_back(el);

        if (epoch <= sel_floor) continue;
        if (ds.chains.avg_f1 > best_f1) {
            best_f1 = ds.chains.avg_f1;
            best = model;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    res.system.tagger = std::move(best);
    res.best_epoch = best_epoch;
    res.best_dev_avg_chain_f1 = best_f1;
    return res;
}

inline TrainResult train_pipeline(const Corpus& train, const Corpus& dev, const Lexicon& lex,
                                  const TrainConfig& cfg, std::ostream* warnings = nullptr) {
    cfg.check();
    if (cfg.mode != TrainMode::pipeline)
        throw config_error("train_pipeline called with joint config");
    if (train.empty() || dev.empty())
        throw validation_error("training and development splits must be nonempty");

    TrainResult res;
    res.system.mode = TrainMode::pipeline;
    res.system.lambda = cfg.lambda;
    res.system.vocab = Vocabulary::build(train);
    res.system.lexicon = lex;
    ModelConfig mcfg = detail::resolve_model_config(cfg.model, res.system.vocab, lex);

    // ---- stage 1: extractor on L_l only, selected on dev compound F1 ----
    NcceModel model = NcceModel::init(mcfg, cfg.seed);
    auto graphs = detail::build_graphs(model, train, lex);
    {
        Adam opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.warmup_fraction,
                  cfg.max_epochs * train.size()});
        Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        std::vector<std::size_t> order(train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        NcceModel best = model;
        double best_f1 = -1.0;
        std::size_t since_best = 0;
        const std::size_t sel_floor = cfg.selection_floor();
        for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            rng.shuffle(order);
            double sum_l = 0.0;
            for (std::size_t idx : order) {
                Tape t;
                ParamNodes p = register_params(t, model);
                TokenStates ts = token_states(t, p, model, train[idx].doc, res.system.vocab,
                                              detail::graph_ptr(graphs[idx]), rng,
                                              /*training=*/true, warnings);
                NodeId l_l = extraction_loss(
                    t, ts.tag_probs,
                    bio_encode(train[idx].doc.size(), train[idx].gold.compounds));
                double lv = t.val(l_l).item();
                detail::check_finite_loss(lv, "stage1", epoch, train[idx].doc.id, lv, 0.0);
                sum_l += lv;
                t.backward(l_l);
                detail::apply_update(model, t, p, opt, model.names(), cfg.clip_norm);
            }

            res.system.tagger = model;
            res.system.has_chainer = false;
            Corpus pred = predict(res.system, dev, cfg.lambda, warnings);
            double f1 = corpus_compound_prf(pred, dev).f1;
            EpochLog el;
            el.stage = "stage1";
            el.epoch = epoch;
            el.loss_l = sum_l / static_cast<double>(train.size());
            el.dev_compound_f1 = f1;
            res.log.push_back(el);

            if (epoch <= sel_floor) continue;
            if (f1 > best_f1) {
                best_f1 = f1;
                best = model;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
        res.system.tagger = std::move(best);
    }

    // ---- stage 2: chain detector with its own encoder on L_r over gold
    // spans, selected on dev avg chain F1 over stage-1 predicted spans ----
    NcceModel chain = NcceModel::init(mcfg, cfg.seed + 1);
    std::vector<std::string> chain_params;
    for (const std::string& n : chain.names())
        if (n.rfind("tag.", 0) != 0) chain_params.push_back(n);
    {
        Adam opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.warmup_fraction,
                  cfg.max_epochs * train.size()});
        Rng rng(cfg.seed ^ 0xc2b2ae3d27d4eb4fULL);
        std::vector<std::size_t> order(train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        NcceModel best = chain;
        double best_f1 = -1.0;
        std::size_t best_epoch = 0, since_best = 0;
        const std::size_t sel_floor = cfg.selection_floor();
        for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            rng.shuffle(order);
            double sum_r = 0.0;
            for (std::size_t idx : order) {
                Tape t;
                ParamNodes p = register_params(t, chain);
                NodeId l_r =
                    chain_only_loss(t, p, chain, train[idx], res.system.vocab,
                                    detail::graph_ptr(graphs[idx]), rng, /*training=*/true,
                                    warnings);
                double lv = t.val(l_r).item();
                detail::check_finite_loss(lv, "stage2", epoch, train[idx].doc.id, 0.0, lv);
                sum_r += lv;
                if (t.requires_grad(l_r)) {
                    t.backward(l_r);
                    detail::apply_update(chain, t, p, opt, chain_params, cfg.clip_norm);
                }
            }

            res.system.chainer = chain;
            res.system.has_chainer = true;
            DevScores ds = dev_scores(res.system, dev, warnings);
            EpochLog el;
            el.stage = "stage2";
            el.epoch = epoch;
            el.loss_r = sum_r / static_cast<double>(train.size());
            el.dev_compound_f1 = ds.compound_f1;
            el.dev_muc_f1 = ds.chains.muc.f1;
            el.dev_b3_f1 = ds.chains.b3.f1;
            el.dev_ceaf_f1 = ds.chains.ceaf.f1;
            el.dev_avg_chain_f1 = ds.chains.avg_f1;
            res.log.push_back(el);

            if (epoch <= sel_floor) continue;
            if (ds.chains.avg_f1 > best_f1) {
                best_f1 = ds.chains.avg_f1;
                best = chain;
                best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
        res.system.chainer = std::move(best);
        res.system.has_chainer = true;
        res.best_epoch = best_epoch;
        res.best_dev_avg_chain_f1 = best_f1;
    }
    return res;
}

inline TrainResult train(const Corpus& train_split, const Corpus& dev, const Lexicon& lex,
                         const TrainConfig& cfg, std::ostream* warnings = nullptr) {
    return cfg.mode == TrainMode::joint ? train_joint(train_split, dev, lex, cfg, warnings)
                                        : train_pipeline(train_split, dev, lex, cfg, warnings);
}

// ---- system persistence ----
//
// A system is a small manifest plus sibling files: <prefix>.json,
// <prefix>.vocab, <prefix>.lexicon.tsv, <prefix>.tagger.model and, for
// pipelines, <prefix>.chainer.model.

inline void save_system(const NcceSystem& sys, const std::string& prefix) {
    nlohmann::ordered_json j;
    j["format"] = "ncce-system";
    j["version"] = 1;
    j["mode"] = to_string(sys.mode);
    j["lambda"] = sys.lambda;
    j["has_lexicon"] = !sys.tagger.cfg.no_lexicon;
    sys.vocab.save(prefix + ".vocab");
    if (!sys.tagger.cfg.no_lexicon) store_lexicon(sys.lexicon, prefix + ".lexicon.tsv");
    save_model(sys.tagger, prefix + ".tagger.model");
    if (sys.has_chainer) save_model(sys.chainer, prefix + ".chainer.model");
    std::ofstream out(prefix + ".json", std::ios::binary);
    if (!out) throw io_error("cannot write system manifest: " + prefix + ".json");
    out << j.dump(2) << "\n";
}

inline NcceSystem load_system(const std::string& prefix) {
    std::ifstream in(prefix + ".json");
    if (!in) throw io_error("cannot open system manifest: " + prefix + ".json");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error("bad system manifest " + prefix + ".json: " + e.what());
    }
    if (j.value("format", "") != "ncce-system")
        throw io_error("not an ncce system manifest: " + prefix + ".json");
    NcceSystem sys;
    sys.mode = train_mode_from_string(j.at("mode").get<std::string>());
    sys.lambda = j.at("lambda").get<double>();
    sys.vocab = Vocabulary::load(prefix + ".vocab");
    sys.tagger = load_model(prefix + ".tagger.model");
    if (j.at("has_lexicon").get<bool>()) sys.lexicon = load_lexicon(prefix + ".lexicon.tsv");
    sys.has_chainer = sys.mode == TrainMode::pipeline;
    if (sys.has_chainer) sys.chainer = load_model(prefix + ".chainer.model");
    return sys;
}

}  // namespace ncce
