#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "oracle.hpp"

#include "ncce/encoder.hpp"

using namespace ncce;

static Corpus tiny_corpus() {
    AnnotatedDocument d;
    d.doc = Document::make("t1", {{"the", "jet", "engine"}, {"smoke", "alarm"}});
    d.gold = ChainPartition::make({}, {}, d.doc.size());
    return {d};
}

static ParamNodes nodes_for(const NcceModel& m, const std::vector<NodeId>& ids) {
    ParamNodes p;
    for (std::size_t i = 0; i < m.names().size(); ++i) p.node[m.names()[i]] = ids[i];
    return p;
}

static std::vector<Tensor> values_of(const NcceModel& m) {
    std::vector<Tensor> v;
    for (const std::string& n : m.names()) v.push_back(m.param(n));
    return v;
}

TEST_CASE("vocabulary basics") {
    Vocabulary v = Vocabulary::build(tiny_corpus());
    CHECK(v.size() == 2 + 5);  // reserved + distinct tokens
    CHECK(v.token(Vocabulary::pad_id) == "<pad>");
    CHECK(v.token(Vocabulary::unk_id) == "<unk>");
    CHECK(v.id("jet") >= 2);
    CHECK(v.id("never-seen") == Vocabulary::unk_id);
    // sorted distinct tokens: alarm < engine < jet < smoke < the
    CHECK(v.token(2) == "alarm");
    CHECK(v.token(6) == "the");
    CHECK(v.ids({"jet", "jet"}) == std::vector<std::size_t>{v.id("jet"), v.id("jet")});
}

TEST_CASE("vocabulary io") {
    Vocabulary v = Vocabulary::build(tiny_corpus());
    std::ostringstream out;
    v.save(out);

    SECTION("round trip") {
        std::istringstream in(out.str());
        Vocabulary back = Vocabulary::load(in);
        CHECK(back.size() == v.size());
        CHECK(back.id("engine") == v.id("engine"));
    }
    SECTION("missing reserved entries rejected") {
        std::istringstream in("alarm\nengine\n");
        CHECK_THROWS_AS(Vocabulary::load(in, "bad"), io_error);
    }
    SECTION("duplicate rejected with line number") {
        std::istringstream in("<pad>\n<unk>\njet\njet\n");
        CHECK_THROWS_MATCHES(
            Vocabulary::load(in, "dup"), io_error,
            Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("dup:4")));
    }
}

TEST_CASE("positional encoding frozen values") {
    Tensor pe = positional_encoding(3, 4);
    CHECK(pe.rows == 3);
    CHECK(pe.cols == 4);
    CHECK(pe.at(0, 0) == 0.0);        // sin(0)
    CHECK(pe.at(0, 1) == 1.0);        // cos(0)
    CHECK(pe.at(1, 0) == Catch::Approx(std::sin(1.0)));
    CHECK(pe.at(1, 1) == Catch::Approx(std::cos(1.0)));
    double w = 1.0 / std::pow(10000.0, 2.0 / 4.0);
    CHECK(pe.at(2, 2) == Catch::Approx(std::sin(2.0 * w)));
    CHECK(pe.at(2, 3) == Catch::Approx(std::cos(2.0 * w)));
}

TEST_CASE("single-token self-attention is the value projection") {
    Tape t;
    Rng rng(7);
    Tensor x(1, 4), wq(4, 4), wk(4, 4), wv(4, 4);
    for (double& v : x.data) v = rng.uniform(-1, 1);
    for (double& v : wq.data) v = rng.uniform(-1, 1);
    for (double& v : wk.data) v = rng.uniform(-1, 1);
    for (double& v : wv.data) v = rng.uniform(-1, 1);
    NodeId xn = t.constant(x);
    AttentionResult r = self_attention(t, xn, t.constant(wq), t.constant(wk), t.constant(wv));
    CHECK(t.val(r.attn).at(0, 0) == Catch::Approx(1.0));

    Tape t2;
    Tensor vproj = t2.val(t2.matmul(t2.constant(x), t2.constant(wv)));
    for (std::size_t c = 0; c < 4; ++c)
        CHECK(t.val(r.out).at(0, c) == Catch::Approx(vproj.at(0, c)));
}

TEST_CASE("attention rows are distributions") {
    Tape t;
    Rng rng(9);
    Tensor x(5, 4), w(4, 4);
    for (double& v : x.data) v = rng.uniform(-1, 1);
    for (double& v : w.data) v = rng.uniform(-1, 1);
    NodeId xn = t.constant(x);
    NodeId wn = t.constant(w);
    AttentionResult r = self_attention(t, xn, wn, wn, wn);
    const Tensor& a = t.val(r.attn);
    REQUIRE(a.rows == 5);
    REQUIRE(a.cols == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(a.at(i, j) >= 0.0);
            sum += a.at(i, j);
        }
        CHECK(sum == Catch::Approx(1.0));
    }
}

static ModelConfig enc_config(EncoderVariant variant) {
    ModelConfig c;
    c.d = 6;
    c.d_w = 4;
    c.encoder = variant;
    c.vocab_size = 9;
    c.no_lexicon = true;
    c.concept_count = 0;
    c.dropout = 0.0;
    return c;
}

TEST_CASE("encode output shape and determinism") {
    Corpus corpus = tiny_corpus();
    Vocabulary vocab = Vocabulary::build(corpus);
    for (EncoderVariant variant : {EncoderVariant::recurrent, EncoderVariant::attention}) {
        ModelConfig cfg = enc_config(variant);
        cfg.vocab_size = vocab.size();
        NcceModel m = NcceModel::init(cfg, 11);
        Tape t1, t2;
        ParamNodes p1 = register_params(t1, m);
        ParamNodes p2 = register_params(t2, m);
        NodeId a = encode(t1, p1, m, corpus[0].doc, vocab, nullptr);
        NodeId b = encode(t2, p2, m, corpus[0].doc, vocab, nullptr);
        CHECK(t1.val(a).rows == corpus[0].doc.size());
        CHECK(t1.val(a).cols == cfg.d);
        CHECK(t1.val(a) == t2.val(b));
        CHECK(t1.val(a).all_finite());
    }
}

TEST_CASE("sentences are encoded independently") {
    // same sentence in different documents gets identical rows, regardless of
    // what precedes it
    Document d1 = Document::make("a", {{"jet", "engine"}});
    Document d2 = Document::make("b", {{"the", "smoke", "alarm", "the"}, {"jet", "engine"}});
    Vocabulary vocab = Vocabulary::build(tiny_corpus());
    for (EncoderVariant variant : {EncoderVariant::recurrent, EncoderVariant::attention}) {
        ModelConfig cfg = enc_config(variant);
        cfg.vocab_size = vocab.size();
        NcceModel m = NcceModel::init(cfg, 13);
        Tape t;
        ParamNodes p = register_params(t, m);
        // copies: the second encode may grow the tape and move node storage
        Tensor r1 = t.val(encode(t, p, m, d1, vocab, nullptr));
        Tensor r2 = t.val(encode(t, p, m, d2, vocab, nullptr));
        for (std::size_t c = 0; c < cfg.d; ++c) {
            CHECK(r1.at(0, c) == Catch::Approx(r2.at(4, c)));
            CHECK(r1.at(1, c) == Catch::Approx(r2.at(5, c)));
        }
    }
}

TEST_CASE("recurrent direction order holds") {
    // the forward half of the state at token 0 must not depend on later
    // tokens; the backward half must
    Vocabulary vocab = Vocabulary::build(tiny_corpus());
    ModelConfig cfg = enc_config(EncoderVariant::recurrent);
    cfg.vocab_size = vocab.size();
    NcceModel m = NcceModel::init(cfg, 17);
    Document d1 = Document::make("a", {{"jet", "engine", "smoke"}});
    Document d2 = Document::make("b", {{"jet", "engine", "alarm"}});
    Tape t;
    ParamNodes p = register_params(t, m);
    Tensor r1 = t.val(encode(t, p, m, d1, vocab, nullptr));
    Tensor r2 = t.val(encode(t, p, m, d2, vocab, nullptr));
    for (std::size_t c = 0; c < cfg.d / 2; ++c)
        CHECK(r1.at(0, c) == Catch::Approx(r2.at(0, c)));  // forward half
    bool backward_differs = false;
    for (std::size_t c = cfg.d / 2; c < cfg.d; ++c)
        if (std::abs(r1.at(0, c) - r2.at(0, c)) > 1e-12) backward_differs = true;
    CHECK(backward_differs);
}

TEST_CASE("overlong sentences split into blocks with a warning") {
    std::vector<std::string> long_sentence(10, "jet");
    Document d = Document::make("long", {long_sentence});
    Vocabulary vocab = Vocabulary::build(tiny_corpus());
    ModelConfig cfg = enc_config(EncoderVariant::recurrent);
    cfg.vocab_size = vocab.size();
    cfg.max_sentence_len = 4;
    NcceModel m = NcceModel::init(cfg, 19);
    Tape t;
    ParamNodes p = register_params(t, m);
    std::ostringstream warn;
    const Tensor& r = t.val(encode(t, p, m, d, vocab, &warn));
    CHECK(r.rows == 10);
    CHECK(warn.str().find("split at 4") != std::string::npos);
}

TEST_CASE("encoder gradients match finite differences") {
    Corpus corpus = tiny_corpus();
    Vocabulary vocab = Vocabulary::build(corpus);
    for (EncoderVariant variant : {EncoderVariant::recurrent, EncoderVariant::attention}) {
        ModelConfig cfg = enc_config(variant);
        cfg.vocab_size = vocab.size();
        NcceModel m = NcceModel::init(cfg, 23);
        auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
            ParamNodes p = nodes_for(m, ids);
            return t.sum(encode(t, p, m, corpus[0].doc, vocab, nullptr));
        };
        auto rep = oracle::check_gradients(build, values_of(m));
        INFO(to_string(variant) << " rel err " << rep.max_rel_err);
        CHECK(rep.max_rel_err < 1e-4);
    }
}
