#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <ncce/ncce.hpp>

namespace {

struct TrainFlags {
    std::string mode = "joint";
    double mu = 0.4;
    double lambda = 0.5;
    double lr = 1e-3;
    double warmup_fraction = 0.1;
    double weight_decay = 0.01;
    double clip_norm = 5.0;
    std::size_t max_epochs = 300;
    std::size_t patience = 25;
    std::uint64_t seed = 1;
    bool no_lexicon = false;
    bool no_gate = false;
    std::string encoder = "recurrent";
    std::string activation = "relu";
    std::size_t d = 64;
    std::size_t d_w = 16;
    std::size_t gcn_layers = 2;
    double dropout = 0.2;
    std::size_t max_sentence_len = 128;
    std::string config_file;
};

// Every flag mirrored as a flat key in the optional config file; explicit
// command-line flags win over the file.
void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--mode", f.mode, "joint|pipeline")->check(CLI::IsMember({"joint", "pipeline"}));
    cmd->add_option("--mu", f.mu, "loss coupling coefficient");
    cmd->add_option("--lambda", f.lambda, "decode threshold");
    cmd->add_option("--lr", f.lr, "learning rate");
    cmd->add_option("--warmup-fraction", f.warmup_fraction, "linear warmup fraction");
    cmd->add_option("--weight-decay", f.weight_decay, "decoupled weight decay");
    cmd->add_option("--clip-norm", f.clip_norm, "global gradient norm clip");
    cmd->add_option("--max-epochs", f.max_epochs, "epoch budget");
    cmd->add_option("--patience", f.patience, "early-stop patience");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_flag("--no-lexicon", f.no_lexicon, "disable the sememe lexicon path");
    cmd->add_flag("--no-gate", f.no_gate, "replace the fusion gate with concat+linear");
    cmd->add_option("--encoder", f.encoder, "recurrent|attention")
        ->check(CLI::IsMember({"recurrent", "attention"}));
    cmd->add_option("--activation", f.activation, "relu|tanh|identity");
    cmd->add_option("--d", f.d, "hidden width");
    cmd->add_option("--d-w", f.d_w, "span width embedding size");
    cmd->add_option("--gcn-layers", f.gcn_layers, "GCN layer count");
    cmd->add_option("--dropout", f.dropout, "dropout probability");
    cmd->add_option("--max-sentence-len", f.max_sentence_len, "encoder block limit");
    cmd->add_option("--config", f.config_file, "flat key-value config file (JSON)");
}

// Fill from the config file any flag the user did not pass explicitly.
void apply_config_file(CLI::App* cmd, TrainFlags& f) {
    if (f.config_file.empty()) return;
    std::ifstream in(f.config_file);
    if (!in) throw ncce::io_error("cannot open config: " + f.config_file);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ncce::config_error("bad config " + f.config_file + ": " + e.what());
    }
    auto unseen = [&](const char* flag) { return cmd->count(flag) == 0; };
    auto grab = [&](const char* key, const char* flag, auto& slot) {
        if (j.contains(key) && unseen(flag)) j.at(key).get_to(slot);
    };
    grab("mode", "--mode", f.mode);
    grab("mu", "--mu", f.mu);
    grab("lambda", "--lambda", f.lambda);
    grab("lr", "--lr", f.lr);
    grab("warmup_fraction", "--warmup-fraction", f.warmup_fraction);
    grab("weight_decay", "--weight-decay", f.weight_decay);
    grab("clip_norm", "--clip-norm", f.clip_norm);
    grab("max_epochs", "--max-epochs", f.max_epochs);
    grab("patience", "--patience", f.patience);
    grab("seed", "--seed", f.seed);
    grab("no_lexicon", "--no-lexicon", f.no_lexicon);
    grab("no_gate", "--no-gate", f.no_gate);
    grab("encoder", "--encoder", f.encoder);
    grab("activation", "--activation", f.activation);
    grab("d", "--d", f.d);
    grab("d_w", "--d-w", f.d_w);
    grab("gcn_layers", "--gcn-layers", f.gcn_layers);
    grab("dropout", "--dropout", f.dropout);
    grab("max_sentence_len", "--max-sentence-len", f.max_sentence_len);
}

ncce::TrainConfig to_train_config(const TrainFlags& f) {
    ncce::TrainConfig cfg;
    cfg.mode = ncce::train_mode_from_string(f.mode);
    cfg.mu = f.mu;
    cfg.lambda = f.lambda;
    cfg.lr = f.lr;
    cfg.warmup_fraction = f.warmup_fraction;
    cfg.weight_decay = f.weight_decay;
    cfg.clip_norm = f.clip_norm;
    cfg.max_epochs = f.max_epochs;
    cfg.patience = f.patience;
    cfg.seed = f.seed;
    cfg.model.no_lexicon = f.no_lexicon;
    cfg.model.no_gate = f.no_gate;
    cfg.model.encoder = ncce::encoder_variant_from(f.encoder);
    cfg.model.activation = ncce::activation_from(f.activation);
    cfg.model.d = f.d;
    cfg.model.d_w = f.d_w;
    cfg.model.gcn_layers = f.gcn_layers;
    cfg.model.dropout = f.dropout;
    cfg.model.max_sentence_len = f.max_sentence_len;
    return cfg;
}

ncce::Lexicon load_lexicon_arg(const std::string& path) {
    if (path.empty()) return ncce::builtin_mini_lexicon();
    return ncce::load_lexicon(path);
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
    return buf;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ncce::io_error("cannot write: " + path);
    out << text;
}

int run(int argc, char** argv) {
    CLI::App app{"nominal compound chain extraction"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    std::string synth_out;
    std::size_t synth_docs = 80;
    std::uint64_t synth_seed = 1;
    synth->add_option("--out", synth_out, "output corpus file")->required();
    synth->add_option("--docs", synth_docs, "number of documents");
    synth->add_option("--seed", synth_seed, "random seed");
    synth->callback([&] {
        ncce::Corpus corpus =
            ncce::synth_corpus(synth_seed, synth_docs, ncce::default_vocab_spec());
        ncce::store_corpus(corpus, synth_out);
        std::cout << "wrote " << corpus.size() << " documents to " << synth_out << "\n";
    });

    // ---- stats ----
    auto* stats = app.add_subcommand("stats", "corpus statistics");
    std::string stats_in;
    bool stats_json = false;
    stats->add_option("corpus", stats_in, "corpus file")->required();
    stats->add_flag("--json", stats_json, "emit machine-readable stats");
    stats->callback([&] {
        ncce::StatsReport r = ncce::corpus_stats(ncce::load_corpus(stats_in));
        if (stats_json)
            std::cout << ncce::stats_to_json(r).dump(2) << "\n";
        else
            std::cout << ncce::stats_to_text(r);
    });

    // ---- train ----
    auto* train = app.add_subcommand("train", "train a model");
    std::string train_in, dev_in, out_prefix, log_path, lexicon_path;
    TrainFlags tf;
    train->add_option("--train", train_in, "training corpus")->required();
    train->add_option("--dev", dev_in, "development corpus")->required();
    train->add_option("--out", out_prefix, "output system prefix")->required();
    train->add_option("--log", log_path, "training log path (default <out>.log.jsonl)");
    train->add_option("--lexicon", lexicon_path, "sememe lexicon TSV (default: bundled)");
    add_train_flags(train, tf);
    train->callback([&] {
        apply_config_file(train, tf);
        ncce::TrainConfig cfg = to_train_config(tf);
        ncce::Corpus tr = ncce::load_corpus(train_in);
        ncce::Corpus dev = ncce::load_corpus(dev_in);
        ncce::Lexicon lex = load_lexicon_arg(lexicon_path);
        ncce::TrainResult res = ncce::train(tr, dev, lex, cfg, &std::cerr);
        ncce::save_system(res.system, out_prefix);
        std::ostringstream log;
        for (const ncce::EpochLog& e : res.log) log << ncce::epoch_log_to_json(e).dump() << "\n";
        write_file(log_path.empty() ? out_prefix + ".log.jsonl" : log_path, log.str());
        std::cout << "best dev avg chain F1 " << pct(res.best_dev_avg_chain_f1) << "% at epoch "
                  << res.best_epoch << "; system saved to " << out_prefix << ".json\n";
    });

    // ---- predict ----
    auto* predict = app.add_subcommand("predict", "extract compounds and chains");
    std::string model_prefix, pred_in, pred_out;
    double pred_lambda = -1.0;
    predict->add_option("--model", model_prefix, "system prefix from train")->required();
    predict->add_option("--in", pred_in, "input corpus (gold fields ignored)")->required();
    predict->add_option("--out", pred_out, "predicted corpus file")->required();
    predict->add_option("--lambda", pred_lambda, "decode threshold (default: trained value)");
    predict->callback([&] {
        ncce::NcceSystem sys = ncce::load_system(model_prefix);
        ncce::Corpus in = ncce::load_corpus(pred_in);
        double lam = pred_lambda >= 0.0 ? pred_lambda : sys.lambda;
        ncce::Corpus out = ncce::predict(sys, in, lam, &std::cerr);
        ncce::store_corpus(out, pred_out);
        std::cout << "wrote predictions for " << out.size() << " documents to " << pred_out
                  << "\n";
    });

    // ---- evaluate ----
    auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold");
    std::string gold_in, eval_pred_in;
    bool eval_json = false;
    evaluate->add_option("--gold", gold_in, "gold corpus")->required();
    evaluate->add_option("--pred", eval_pred_in, "predicted corpus")->required();
    evaluate->add_flag("--json", eval_json, "emit machine-readable scores");
    evaluate->callback([&] {
        ncce::Corpus gold = ncce::load_corpus(gold_in);
        ncce::Corpus pred = ncce::load_corpus(eval_pred_in);
        ncce::PRF comp = ncce::corpus_compound_prf(pred, gold);
        ncce::ChainScores cs = ncce::end_to_end_chain_scores(pred, gold);
        if (eval_json) {
            nlohmann::ordered_json j;
            auto put = [&](const char* k, const ncce::PRF& p) {
                j[k] = {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
            };
            put("compound", comp);
            put("muc", cs.muc);
            put("b3", cs.b3);
            put("ceaf_phi4", cs.ceaf);
            j["avg_chain_f1"] = cs.avg_f1;
            std::cout << j.dump(2) << "\n";
            return;
        }
        auto line = [&](const char* name, const ncce::PRF& p) {
            std::printf("%-10s P %5s  R %5s  F1 %5s\n", name, pct(p.precision).c_str(),
                        pct(p.recall).c_str(), pct(p.f1).c_str());
        };
        line("compound", comp);
        line("MUC", cs.muc);
        line("B3", cs.b3);
        line("CEAF-phi4", cs.ceaf);
        std::printf("avg chain F1 %s\n", pct(cs.avg_f1).c_str());
    });

    // ---- grid ----
    auto* grid = app.add_subcommand("grid", "run the ablation grid");
    std::string grid_train, grid_dev, grid_test, grid_out, grid_lexicon;
    std::vector<std::uint64_t> grid_seeds{1, 2, 3};
    TrainFlags gf;
    grid->add_option("--train", grid_train, "training corpus")->required();
    grid->add_option("--dev", grid_dev, "development corpus")->required();
    grid->add_option("--test", grid_test, "test corpus")->required();
    grid->add_option("--out", grid_out, "output prefix (.tsv and .txt)")->required();
    grid->add_option("--seeds", grid_seeds, "seeds per configuration");
    grid->add_option("--lexicon", grid_lexicon, "sememe lexicon TSV (default: bundled)");
    add_train_flags(grid, gf);
    grid->callback([&] {
        apply_config_file(grid, gf);
        ncce::SplitCorpus splits{ncce::load_corpus(grid_train), ncce::load_corpus(grid_dev),
                                 ncce::load_corpus(grid_test)};
        ncce::Lexicon lex = load_lexicon_arg(grid_lexicon);
        ncce::ExperimentGrid g = ncce::default_grid(to_train_config(gf));
        g.seeds = grid_seeds;
        ncce::GridResult res = ncce::run_grid(splits, lex, g);
        write_file(grid_out + ".tsv", ncce::grid_tsv(res));
        std::string report = ncce::grid_report(res);
        write_file(grid_out + ".txt", report);
        std::cout << report;
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ncce::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
