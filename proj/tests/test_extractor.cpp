#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracle.hpp"

#include "ncce/extractor.hpp"
#include "ncce/synth.hpp"

using namespace ncce;

static Tensor randu(std::size_t r, std::size_t c, Rng& rng) {
    Tensor t(r, c);
    for (double& v : t.data) v = rng.uniform(-1, 1);
    return t;
}

TEST_CASE("zeroed gate parameters average h and v") {
    Tape t;
    Rng rng(5);
    Tensor h = randu(3, 4, rng), v = randu(3, 4, rng);
    ParamNodes p;
    p.node["fuse.wf1"] = t.constant(Tensor(4, 4));
    p.node["fuse.wf2"] = t.constant(Tensor(4, 4));
    p.node["fuse.bf"] = t.constant(Tensor(1, 4));
    FuseResult f = fuse(t, p, t.constant(h), t.constant(v));
    REQUIRE(f.gate != -1);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(t.val(f.gate).at(i, j) == Catch::Approx(0.5));
            CHECK(t.val(f.u).at(i, j) == Catch::Approx(0.5 * (h.at(i, j) + v.at(i, j))));
        }
}

TEST_CASE("saturated gate selects h") {
    Tape t;
    Rng rng(6);
    Tensor h = randu(2, 3, rng), v = randu(2, 3, rng);
    Tensor bias(1, 3);
    bias.fill(50.0);  // sigmoid ~ 1
    ParamNodes p;
    p.node["fuse.wf1"] = t.constant(Tensor(3, 3));
    p.node["fuse.wf2"] = t.constant(Tensor(3, 3));
    p.node["fuse.bf"] = t.constant(bias);
    FuseResult f = fuse(t, p, t.constant(h), t.constant(v));
    for (std::size_t k = 0; k < h.size(); ++k)
        CHECK(t.val(f.u).data[k] == Catch::Approx(h.data[k]).margin(1e-12));
}

TEST_CASE("fuse rejects mismatched shapes") {
    Tape t;
    ParamNodes p;
    p.node["fuse.wf1"] = t.constant(Tensor(3, 3));
    p.node["fuse.wf2"] = t.constant(Tensor(3, 3));
    p.node["fuse.bf"] = t.constant(Tensor(1, 3));
    CHECK_THROWS_AS(fuse(t, p, t.constant(Tensor(2, 3)), t.constant(Tensor(3, 3))), shape_error);
}

TEST_CASE("concat fusion is an affine map of [h;v]") {
    Tape t;
    Rng rng(7);
    Tensor h = randu(2, 2, rng), v = randu(2, 2, rng);
    Tensor w = randu(4, 2, rng), b = randu(1, 2, rng);
    ParamNodes p;
    p.node["fuse.wcat"] = t.constant(w);
    p.node["fuse.bcat"] = t.constant(b);
    FuseResult f = fuse_concat(t, p, t.constant(h), t.constant(v));
    CHECK(f.gate == -1);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double expect = b.at(0, j);
            for (std::size_t k = 0; k < 2; ++k) {
                expect += h.at(i, k) * w.at(k, j);
                expect += v.at(i, k) * w.at(2 + k, j);
            }
            CHECK(t.val(f.u).at(i, j) == Catch::Approx(expect));
        }
}

TEST_CASE("tag distribution rows are distributions") {
    Tape t;
    Rng rng(8);
    ParamNodes p;
    p.node["tag.w"] = t.constant(randu(4, 3, rng));
    p.node["tag.b"] = t.constant(randu(1, 3, rng));
    NodeId probs = tag_distribution(t, p, t.constant(randu(5, 4, rng)));
    const Tensor& pv = t.val(probs);
    REQUIRE(pv.rows == 5);
    REQUIRE(pv.cols == 3);
    for (std::size_t i = 0; i < 5; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(pv.at(i, j) > 0.0);
            s += pv.at(i, j);
        }
        CHECK(s == Catch::Approx(1.0));
    }
}

TEST_CASE("extraction loss is summed negative log likelihood") {
    Tape t;
    Tensor probs(2, 3);
    probs.data = {0.7, 0.2, 0.1, 0.1, 0.1, 0.8};
    TagSequence gold;
    gold.tags = {Tag::B, Tag::O};
    NodeId loss = extraction_loss(t, t.constant(probs), gold);
    CHECK(t.val(loss).item() == Catch::Approx(-std::log(0.7) - std::log(0.8)));

    TagSequence wrong;
    wrong.tags = {Tag::B};
    CHECK_THROWS_AS(extraction_loss(t, t.constant(probs), wrong), shape_error);
}

TEST_CASE("argmax tags and span extraction") {
    Tensor probs(5, 3);
    // B I O B I -> spans [0,2) and [3,5)
    probs.data = {
        0.8, 0.1, 0.1,  //
        0.2, 0.7, 0.1,  //
        0.1, 0.2, 0.7,  //
        0.9, 0.05, 0.05,  //
        0.3, 0.6, 0.1,  //
    };
    TagSequence tags = argmax_tags(probs);
    CHECK(tags.tags == std::vector<Tag>{Tag::B, Tag::I, Tag::O, Tag::B, Tag::I});
    std::vector<ScoredSpan> spans = extract_spans(probs);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].span == Span{0, 2});
    CHECK(spans[0].confidence == Catch::Approx((0.8 + 0.7) / 2.0));
    CHECK(spans[1].span == Span{3, 5});
    CHECK(spans[1].confidence == Catch::Approx((0.9 + 0.6) / 2.0));
}

TEST_CASE("all-O predictions yield no spans") {
    Tensor probs(3, 3);
    probs.data = {0.1, 0.1, 0.8, 0.2, 0.2, 0.6, 0.0, 0.1, 0.9};
    CHECK(extract_spans(probs).empty());
}

static Corpus one_doc_corpus() {
    AnnotatedDocument d;
    d.doc = Document::make("x", {{"severe", "storm", "near", "runway"}});
    d.gold = ChainPartition::make({{0, 2}, {3, 4}}, {{0}, {1}}, 4);
    return {d};
}

TEST_CASE("token_states without lexicon short-circuits") {
    Corpus corpus = one_doc_corpus();
    Vocabulary vocab = Vocabulary::build(corpus);
    ModelConfig cfg;
    cfg.d = 6;
    cfg.d_w = 4;
    cfg.no_lexicon = true;
    cfg.concept_count = 0;
    cfg.vocab_size = vocab.size();
    cfg.dropout = 0.0;
    NcceModel m = NcceModel::init(cfg, 9);
    Tape t;
    ParamNodes p = register_params(t, m);
    Rng rng(1);
    TokenStates ts = token_states(t, p, m, corpus[0].doc, vocab, nullptr, rng, false, nullptr);
    CHECK(ts.v == -1);
    CHECK(ts.gate == -1);
    CHECK(ts.u == ts.h);
    CHECK(t.val(ts.tag_probs).rows == 4);
}

TEST_CASE("token_states requires a graph when the lexicon path is on") {
    Corpus corpus = one_doc_corpus();
    Vocabulary vocab = Vocabulary::build(corpus);
    Lexicon l = builtin_mini_lexicon();
    ModelConfig cfg;
    cfg.d = 6;
    cfg.d_w = 4;
    cfg.vocab_size = vocab.size();
    cfg.concept_count = l.concept_count();
    cfg.dropout = 0.0;
    NcceModel m = NcceModel::init(cfg, 9);
    Tape t;
    ParamNodes p = register_params(t, m);
    Rng rng(1);
    CHECK_THROWS_AS(token_states(t, p, m, corpus[0].doc, vocab, nullptr, rng, false, nullptr),
                    config_error);
}

TEST_CASE("training dropout is seed-reproducible") {
    Corpus corpus = one_doc_corpus();
    Vocabulary vocab = Vocabulary::build(corpus);
    ModelConfig cfg;
    cfg.d = 6;
    cfg.d_w = 4;
    cfg.no_lexicon = true;
    cfg.concept_count = 0;
    cfg.vocab_size = vocab.size();
    cfg.dropout = 0.5;
    NcceModel m = NcceModel::init(cfg, 9);

    auto run = [&](std::uint64_t seed) {
        Tape t;
        ParamNodes p = register_params(t, m);
        Rng rng(seed);
        TokenStates ts = token_states(t, p, m, corpus[0].doc, vocab, nullptr, rng, true, nullptr);
        return t.val(ts.u);
    };
    CHECK(run(4) == run(4));
    CHECK_FALSE(run(4) == run(5));
}

TEST_CASE("extraction path gradients match finite differences") {
    Corpus corpus = one_doc_corpus();
    Vocabulary vocab = Vocabulary::build(corpus);
    Lexicon l = builtin_mini_lexicon();
    SememeGraph g = build_graph(corpus[0].doc, l);
    ModelConfig cfg;
    cfg.d = 4;
    cfg.d_w = 4;
    cfg.gcn_layers = 2;
    cfg.activation = Activation::tanh;
    cfg.vocab_size = vocab.size();
    cfg.concept_count = l.concept_count();
    cfg.dropout = 0.0;
    NcceModel m = NcceModel::init(cfg, 21);

    auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
        ParamNodes p;
        for (std::size_t i = 0; i < m.names().size(); ++i) p.node[m.names()[i]] = ids[i];
        Rng rng(0);
        TokenStates ts = token_states(t, p, m, corpus[0].doc, vocab, &g, rng, false, nullptr);
        return extraction_loss(t, ts.tag_probs, bio_encode(4, corpus[0].gold.compounds));
    };
    std::vector<Tensor> inputs;
    for (const std::string& n : m.names()) inputs.push_back(m.param(n));
    auto rep = oracle::check_gradients(build, inputs);
    INFO("rel err " << rep.max_rel_err);
    CHECK(rep.max_rel_err < 1e-4);
}
