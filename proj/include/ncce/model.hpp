#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncce/tape.hpp"
#include "ncce/tensor.hpp"

namespace ncce {

enum class EncoderVariant { recurrent, attention };
enum class Activation { relu, tanh, identity };

inline std::string to_string(EncoderVariant v) {
    return v == EncoderVariant::recurrent ? "recurrent" : "attention";
}

inline EncoderVariant encoder_variant_from(const std::string& s) {
    if (s == "recurrent") return EncoderVariant::recurrent;
    if (s == "attention") return EncoderVariant::attention;
    throw config_error("unknown encoder variant '" + s + "'");
}

inline std::string to_string(Activation a) {
    return a == Activation::relu ? "relu" : a == Activation::tanh ? "tanh" : "identity";
}

inline Activation activation_from(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "identity") return Activation::identity;
    throw config_error("unknown activation '" + s + "'");
}

struct ModelConfig {
    std::size_t d = 64;                // hidden width (even: bidirectional halves)
    std::size_t d_w = 16;              // span width embedding size
    std::size_t gcn_layers = 2;
    Activation activation = Activation::relu;
    EncoderVariant encoder = EncoderVariant::recurrent;
    bool no_lexicon = false;           // ablation: drop the sememe path, u = h
    bool no_gate = false;              // ablation: concat + linear instead of the gate
    double dropout = 0.2;
    std::size_t max_sentence_len = 128;
    std::size_t vocab_size = 0;        // set when the vocabulary is built
    std::size_t concept_count = 0;     // lexicon concept-table size m'

    void check() const {
        if (d == 0 || d % 2 != 0) throw config_error("hidden width d must be even and > 0");
        if (d_w == 0) throw config_error("width embedding size must be > 0");
        if (gcn_layers == 0) throw config_error("gcn layer count must be >= 1");
        if (dropout < 0.0 || dropout >= 1.0) throw config_error("dropout must be in [0,1)");
        if (max_sentence_len == 0) throw config_error("max sentence length must be > 0");
        if (vocab_size < 2) throw config_error("vocabulary must include <pad> and <unk>");
        if (!no_lexicon && concept_count == 0)
            throw config_error("concept table is empty; use --no-lexicon to train without one");
    }

    std::size_t span_repr_width() const { return 3 * d + d_w; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline nlohmann::ordered_json config_to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["d"] = c.d;
    j["d_w"] = c.d_w;
    j["gcn_layers"] = c.gcn_layers;
    j["activation"] = to_string(c.activation);
    j["encoder"] = to_string(c.encoder);
    j["no_lexicon"] = c.no_lexicon;
    j["no_gate"] = c.no_gate;
    j["dropout"] = c.dropout;
    j["max_sentence_len"] = c.max_sentence_len;
    j["vocab_size"] = c.vocab_size;
    j["concept_count"] = c.concept_count;
    return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.d = j.at("d").get<std::size_t>();
    c.d_w = j.at("d_w").get<std::size_t>();
    c.gcn_layers = j.at("gcn_layers").get<std::size_t>();
    c.activation = activation_from(j.at("activation").get<std::string>());
    c.encoder = encoder_variant_from(j.at("encoder").get<std::string>());
    c.no_lexicon = j.at("no_lexicon").get<bool>();
    c.no_gate = j.at("no_gate").get<bool>();
    c.dropout = j.at("dropout").get<double>();
    c.max_sentence_len = j.at("max_sentence_len").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.concept_count = j.at("concept_count").get<std::size_t>();
    return c;
}

// Trainable parameters in a fixed registration order (the checkpoint and
// optimizer orderings). Which parameters exist depends on the config.
class NcceModel {
public:
    ModelConfig cfg;

    NcceModel() = default;

    // Fresh model with deterministic seed-driven initialization.
    static NcceModel init(ModelConfig cfg, std::uint64_t seed) {
        cfg.check();
        NcceModel m;
        m.cfg = cfg;
        Rng rng(seed);
        std::size_t d = cfg.d, hd = d / 2;

        m.add("embed", cfg.vocab_size, d, rng, Init::embedding);
        if (cfg.encoder == EncoderVariant::recurrent) {
            for (const char* dir : {"f", "b"}) {
                for (const char* gate : {"z", "r", "n"}) {
                    m.add("enc." + std::string(dir) + ".w" + gate, d, hd, rng, Init::xavier);
                    m.add("enc." + std::string(dir) + ".u" + gate, hd, hd, rng, Init::xavier);
                    m.add("enc." + std::string(dir) + ".b" + gate, 1, hd, rng, Init::zero);
                }
            }
        } else {
            for (const char* nm : {"wq", "wk", "wv", "wo"})
                m.add(std::string("enc.att.") + nm, d, d, rng, Init::xavier);
            m.add("enc.att.bo", 1, d, rng, Init::zero);
        }
        m.add("sem.wt", d, d, rng, Init::xavier);
        m.add("sem.bt", 1, d, rng, Init::zero);
        if (!cfg.no_lexicon) {
            // concept vectors start wide: the sememe channel has to separate
            // topics before the token embeddings have learned to
            m.add("sem.e", cfg.concept_count, d, rng, Init::wide);
            for (std::size_t l = 0; l < cfg.gcn_layers; ++l)
                m.add("sem.gcn.w" + std::to_string(l), d, d, rng, Init::xavier);
            if (!cfg.no_gate) {
                m.add("fuse.wf1", d, d, rng, Init::xavier);
                m.add("fuse.wf2", d, d, rng, Init::xavier);
                m.add("fuse.bf", 1, d, rng, Init::zero);
            } else {
                m.add("fuse.wcat", 2 * d, d, rng, Init::xavier);
                m.add("fuse.bcat", 1, d, rng, Init::zero);
            }
        }
        m.add("tag.w", d, 3, rng, Init::xavier);
        m.add("tag.b", 1, 3, rng, Init::zero);
        m.add("chain.watt", d, 1, rng, Init::xavier);
        m.add("chain.wid", 8, cfg.d_w, rng, Init::embedding);
        std::size_t p = cfg.span_repr_width();
        m.add("chain.wr", 4 * p, 2, rng, Init::xavier);
        m.add("chain.br", 1, 2, rng, Init::zero);
        return m;
    }

    bool has(const std::string& name) const { return index_.count(name) > 0; }

    Tensor& param(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw config_error("no parameter named '" + name + "'");
        return params_[it->second];
    }

    const Tensor& param(const std::string& name) const {
        return const_cast<NcceModel*>(this)->param(name);
    }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const Tensor& t : params_) n += t.size();
        return n;
    }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        for (Tensor& t : params_) out.push_back(&t);
        return out;
    }

    friend bool operator==(const NcceModel& a, const NcceModel& b) {
        return a.names_ == b.names_ && a.params_ == b.params_ &&
               config_to_json(a.cfg) == config_to_json(b.cfg);
    }

private:
    enum class Init { zero, xavier, embedding, wide };

    void add(const std::string& name, std::size_t r, std::size_t c, Rng& rng, Init how) {
        Tensor t(r, c);
        switch (how) {
            case Init::zero:
                break;
            case Init::xavier: {
                double lim = std::sqrt(6.0 / static_cast<double>(r + c));
                for (double& v : t.data) v = rng.uniform(-lim, lim);
                break;
            }
            case Init::embedding:
                for (double& v : t.data) v = rng.uniform(-0.1, 0.1);
                break;
            case Init::wide:
                for (double& v : t.data) v = rng.uniform(-0.5, 0.5);
                break;
        }
        index_.emplace(name, params_.size());
        names_.push_back(name);
        params_.push_back(std::move(t));
    }

    std::vector<std::string> names_;
    std::vector<Tensor> params_;
    std::map<std::string, std::size_t> index_;
};

// All parameters registered on a tape as gradient leaves, by name.
struct ParamNodes {
    std::map<std::string, NodeId> node;

    NodeId at(const std::string& name) const {
        auto it = node.find(name);
        if (it == node.end()) throw config_error("no parameter node named '" + name + "'");
        return it->second;
    }
};

inline ParamNodes register_params(Tape& tape, const NcceModel& model, bool requires_grad = true) {
    ParamNodes nodes;
    for (const std::string& name : model.names())
        nodes.node[name] = tape.leaf(model.param(name), requires_grad);
    return nodes;
}

// ---- checkpoint format ----
//
//   bytes 0-7   magic "NCCEMODL"
//   bytes 8-11  format version, u32 little-endian
//   bytes 12-19 header length H, u64 little-endian
//   H bytes     JSON header {"config": ..., "params": [{name, rows, cols}...]}
//   payload     for each param in header order, rows*cols float64 little-endian

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        int c = in.get();
        if (c == EOF) throw io_error("checkpoint truncated");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

inline std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        int c = in.get();
        if (c == EOF) throw io_error("checkpoint truncated");
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

inline void put_f64(std::ostream& out, double d) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(d));
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

inline double get_f64(std::istream& in) {
    std::uint64_t bits = get_u64(in);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[9] = "NCCEMODL";
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_model(const NcceModel& m, std::ostream& out) {
    nlohmann::ordered_json header;
    header["config"] = config_to_json(m.cfg);
    auto params = nlohmann::ordered_json::array();
    for (const std::string& name : m.names()) {
        const Tensor& t = m.param(name);
        params.push_back({{"name", name}, {"rows", t.rows}, {"cols", t.cols}});
    }
    header["params"] = std::move(params);
    std::string hs = header.dump();
    out.write(kCheckpointMagic, 8);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u64(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const std::string& name : m.names())
        for (double v : m.param(name).data) detail::put_f64(out, v);
}

inline void save_model(const NcceModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write checkpoint: " + path);
    save_model(m, out);
    if (!out) throw io_error("write failed: " + path);
}

inline NcceModel load_model(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
        throw io_error("not a model checkpoint (bad magic)");
    std::uint32_t version = detail::get_u32(in);
    if (version != kCheckpointVersion)
        throw io_error("unsupported checkpoint version " + std::to_string(version));
    std::uint64_t hlen = detail::get_u64(in);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (static_cast<std::uint64_t>(in.gcount()) != hlen) throw io_error("checkpoint truncated");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const std::exception& e) {
        throw io_error(std::string("bad checkpoint header: ") + e.what());
    }
    ModelConfig cfg = config_from_json(header.at("config"));
    // Rebuild with the recorded shapes, then overwrite values from the payload.
    NcceModel m = NcceModel::init(cfg, 0);
    const auto& plist = header.at("params");
    if (plist.size() != m.names().size())
        throw io_error("checkpoint parameter list does not match its config");
    for (std::size_t i = 0; i < plist.size(); ++i) {
        const auto& entry = plist[i];
        const std::string name = entry.at("name").get<std::string>();
        if (name != m.names()[i])
            throw io_error("checkpoint parameter order mismatch at '" + name + "'");
        Tensor& t = m.param(name);
        if (entry.at("rows").get<std::size_t>() != t.rows ||
            entry.at("cols").get<std::size_t>() != t.cols)
            throw io_error("checkpoint shape mismatch for '" + name + "'");
        for (double& v : t.data) v = detail::get_f64(in);
    }
    return m;
}

inline NcceModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint: " + path);
    return load_model(in);
}

}  // namespace ncce
