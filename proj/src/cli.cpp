#include "rec/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rec/initlab.hpp"
#include "rec/probe.hpp"

namespace rec {

const std::vector<std::string> kCommands = {
    "ingest",      "synth",       "pretrain",        "ft1",
    "ft2",         "build-table", "run-variant",     "run-matrix",
    "eval",        "probe-attention", "sweep-layers", "pretrain-size-ablation"};

std::string usage() {
    std::ostringstream out;
    out << "usage: reclab COMMAND [--config PATH] [--seed N] [--out DIR] [--KEY VALUE ...]\n";
    out << "commands:";
    for (const auto& c : kCommands) out << " " << c;
    out << "\n";
    out << "any --dotted.key VALUE flag overrides the same key in the config file\n";
    return out.str();
}

CliArgs parse_cli(const std::vector<std::string>& args) {
    check(!args.empty(), "missing command\n" + usage());
    CliArgs parsed;
    parsed.command = args[0];

    std::vector<std::pair<std::string, std::string>> overrides;
    std::string config_path;
    for (size_t i = 1; i < args.size(); ++i) {
        const std::string& a = args[i];
        check(a.size() > 2 && a.rfind("--", 0) == 0, "unexpected argument: " + a);
        check(i + 1 < args.size(), "flag " + a + " needs a value");
        const std::string key = a.substr(2);
        const std::string value = args[++i];
        if (key == "config")
            config_path = value;
        else
            overrides.emplace_back(key, value);
    }
    if (!config_path.empty()) parsed.config = Config::parse_file(config_path);
    for (const auto& [k, v] : overrides) parsed.config.set(k, v);  // flags win
    return parsed;
}

// ---------------------------------------------------------------------------
// artifact helpers: every artifact gets a content-hash name plus a stable
// human-label alias so later commands can reference it without knowing the hash

static std::string out_dir(const Config& cfg) {
    if (cfg.has("out")) return cfg.get_str("out");
    if (const char* env = std::getenv("RECLAB_OUT")) return env;
    return "artifacts";
}

static std::string write_ckpt(const std::string& dir, const std::string& label,
                              const Checkpoint& ckpt) {
    std::filesystem::create_directories(dir);
    const std::string hashed = dir + "/" + label + "-" + hash_hex(ckpt.content_hash()) + ".ckpt";
    ckpt.save(hashed);
    ckpt.save(dir + "/" + label + ".ckpt");
    std::cout << "wrote " << hashed << "\n";
    return hashed;
}

static std::string write_text(const std::string& dir, const std::string& label,
                              const std::string& ext, const std::string& text) {
    std::filesystem::create_directories(dir);
    const uint64_t h = fnv1a(text.data(), text.size());
    const std::string hashed = dir + "/" + label + "-" + hash_hex(h) + ext;
    for (const std::string& path : {hashed, dir + "/" + label + ext}) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        check(bool(f), "cannot write " + path);
        f << text;
    }
    std::cout << "wrote " << hashed << "\n";
    return hashed;
}

// ---------------------------------------------------------------------------
// config -> module structs

static EncoderConfig encoder_config(const Config& cfg, int vocab_size) {
    EncoderConfig ec;
    ec.layers = cfg.get_int("encoder.layers", ec.layers);
    ec.heads = cfg.get_int("encoder.heads", ec.heads);
    ec.dim = cfg.get_int("encoder.dim", ec.dim);
    ec.ffn_dim = cfg.get_int("encoder.ffn_dim", ec.ffn_dim);
    ec.max_tokens = cfg.get_int("encoder.max_tokens", ec.max_tokens);
    ec.max_items = cfg.get_int("encoder.max_items", ec.max_items);
    ec.dropout = float(cfg.get_double("encoder.dropout", ec.dropout));
    ec.vocab_size = vocab_size;
    return ec;
}

static BackboneConfig backbone_config(const Config& cfg) {
    BackboneConfig bc;
    bc.kind = backbone_from_name(cfg.get_str("backbone.kind", "sasrec"));
    bc.layers = cfg.get_int("backbone.layers", bc.layers);
    bc.heads = cfg.get_int("backbone.heads", bc.kind == BackboneKind::BERT4Rec ? 2 : 1);
    bc.dim = cfg.get_int("backbone.dim", bc.dim);
    bc.ffn_dim = cfg.get_int("backbone.ffn_dim", bc.ffn_dim);
    bc.max_items = cfg.get_int("backbone.max_items", bc.max_items);
    bc.dropout = float(cfg.get_double("backbone.dropout", bc.dropout));
    return bc;
}

static StageConfig stage_config(const Config& cfg, const std::string& sec, uint64_t master) {
    StageConfig s;
    s.epochs = cfg.get_int(sec + ".epochs", s.epochs);
    s.batch_size = cfg.get_int(sec + ".batch_size", s.batch_size);
    s.lr = float(cfg.get_double(sec + ".lr", s.lr));
    s.temperature = float(cfg.get_double(sec + ".temperature", s.temperature));
    s.mlm_rate = float(cfg.get_double(sec + ".mlm_rate", s.mlm_rate));
    s.patience = cfg.get_int(sec + ".patience", s.patience);
    s.tuned_layers = TunedLayers::parse(cfg.get_str(sec + ".tuned_layers", "all"));
    s.seed = derive_seed(master, sec);
    s.history_items = cfg.get_int(sec + ".history_items", s.history_items);
    s.val_cap = cfg.get_int(sec + ".val_cap", s.val_cap);
    s.grad_clip = float(cfg.get_double(sec + ".grad_clip", s.grad_clip));
    return s;
}

static EvalProtocol protocol_config(const Config& cfg) {
    EvalProtocol p;
    const std::string kind = cfg.get_str("protocol.kind", "sampled");
    if (kind == "sampled")
        p.kind = ProtocolKind::Sampled;
    else if (kind == "full")
        p.kind = ProtocolKind::Full;
    else
        fail("protocol.kind: expected sampled or full, got " + kind);
    p.n_negatives = cfg.get_int("protocol.negatives", 100);
    p.ks = cfg.get_int_list("protocol.ks", p.kind == ProtocolKind::Full ? "5,10,50" : "5,10");
    p.exclude_history = cfg.get_bool("protocol.exclude_history", false);
    return p;
}

static SynthParams synth_params(const Config& cfg) {
    SynthParams p;
    p.k_clusters = cfg.get_int("dataset.clusters", p.k_clusters);
    p.items_per_cluster = cfg.get_int("dataset.items_per_cluster", p.items_per_cluster);
    p.users = cfg.get_int("dataset.users", p.users);
    p.seq_len_min = cfg.get_int("dataset.seq_min", p.seq_len_min);
    p.seq_len_max = cfg.get_int("dataset.seq_max", p.seq_len_max);
    p.intra_cluster_prob = cfg.get_double("dataset.intra_cluster_prob", p.intra_cluster_prob);
    p.vocab_per_cluster = cfg.get_int("dataset.vocab_per_cluster", p.vocab_per_cluster);
    return p;
}

struct Bundle {
    ItemCatalog catalog;
    SequenceDataset dataset;
    SplitDataset split;
    Tokenizer tok;
};

static Bundle load_bundle(const Config& cfg) {
    const uint64_t master = cfg.get_u64("seed");
    Bundle b;
    InteractionLog log;
    if (cfg.get_bool("dataset.synthetic", false)) {
        std::tie(b.catalog, log) = generate_synthetic(synth_params(cfg),
                                                      derive_seed(master, "synth-data"));
    } else {
        std::tie(b.catalog, log) =
            ingest(cfg.get_str("dataset.interactions"), cfg.get_str("dataset.catalog"));
    }
    b.dataset = filter_and_build(log, cfg.get_int("dataset.min_user", 5),
                                 cfg.get_int("dataset.min_item", 5));
    b.split = leave_one_out(b.dataset);
    if (cfg.get_bool("dataset.exclude_cold", true)) {
        auto trained = trained_item_set(b.split);
        b.split.valid = exclude_cold_eval(b.split.valid, trained);
        b.split.test = exclude_cold_eval(b.split.test, trained);
    }
    auto protocol = protocol_config(cfg);
    if (protocol.kind == ProtocolKind::Sampled) {
        freeze_negatives(b.split.valid, b.catalog.size(), protocol.n_negatives,
                         derive_seed(master, "val-negatives"));
        freeze_negatives(b.split.test, b.catalog.size(), protocol.n_negatives,
                         derive_seed(master, "test-negatives"));
    }
    b.tok = Tokenizer::build(b.catalog, cfg.get_int("tokenizer.min_frequency", 1));
    return b;
}

static EmbeddingTable load_table(const Config& cfg) {
    return table_from_checkpoint(Checkpoint::load(cfg.get_str("table.path")));
}

static Encoder load_encoder(const Config& cfg) {
    return Encoder::from_checkpoint(Checkpoint::load(cfg.get_str("encoder.checkpoint")));
}

static TrainConfig train_config(const Config& cfg, uint64_t master) {
    TrainConfig t;
    t.epochs = cfg.get_int("train.epochs", t.epochs);
    t.batch_size = cfg.get_int("train.batch_size", t.batch_size);
    t.lrs.clear();
    for (double lr : cfg.get_list("train.lrs", "0.001")) t.lrs.push_back(float(lr));
    t.patience = cfg.get_int("train.patience", t.patience);
    t.seed = derive_seed(master, "variant-train");
    t.mask_prob = float(cfg.get_double("train.mask_prob", t.mask_prob));
    t.val_cap = cfg.get_int("train.val_cap", t.val_cap);
    t.grad_clip = float(cfg.get_double("train.grad_clip", t.grad_clip));
    return t;
}

static VariantSpec variant_spec(const Config& cfg, const std::string& prefix, uint64_t master) {
    VariantSpec spec;
    spec.mode = variant_mode_from_name(cfg.get_str(prefix + ".mode", "trainable"));
    spec.provenance = provenance_from_name(cfg.get_str(prefix + ".provenance", "random"));
    spec.name = cfg.get_str(prefix + ".name", provenance_name(spec.provenance) + "-" +
                                                  variant_mode_name(spec.mode));
    spec.train = train_config(cfg, master);
    spec.backbone_cfg = backbone_config(cfg);
    spec.backbone = spec.backbone_cfg.kind;
    return spec;
}

static std::optional<EmbeddingTable> variant_table(const Config& cfg, const VariantSpec& spec,
                                                   const std::string& table_key,
                                                   size_t catalog_size, uint64_t master) {
    if (spec.provenance == Provenance::Random)
        return random_table(int(catalog_size), spec.backbone_cfg.dim,
                            derive_seed(master, "random-table"));
    check(cfg.has(table_key), "config: variant '" + spec.name + "' needs " + table_key);
    return table_from_checkpoint(Checkpoint::load(cfg.get_str(table_key)));
}

// ---------------------------------------------------------------------------
// subcommands

static int cmd_ingest(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    auto [catalog, log] =
        ingest(cfg.get_str("dataset.interactions"), cfg.get_str("dataset.catalog"));
    auto dataset = filter_and_build(log, cfg.get_int("dataset.min_user", 5),
                                    cfg.get_int("dataset.min_item", 5));
    write_ckpt(dir, "dataset", dataset_snapshot(dataset));
    std::ostringstream stats;
    stats << "items " << catalog.size() << "\n";
    stats << "interactions " << log.records.size() << "\n";
    stats << "users_after_filter " << dataset.num_users() << "\n";
    write_text(dir, "ingest-stats", ".txt", stats.str());
    return 0;
}

static int cmd_synth(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const uint64_t master = cfg.get_u64("seed");
    auto [catalog, log] = generate_synthetic(synth_params(cfg), derive_seed(master, "synth-data"));
    std::filesystem::create_directories(dir);
    write_catalog(catalog, dir + "/catalog.tsv");
    write_interactions(log, dir + "/interactions.tsv");
    std::cout << "wrote " << dir << "/catalog.tsv (" << catalog.size() << " items)\n";
    std::cout << "wrote " << dir << "/interactions.tsv (" << log.records.size()
              << " interactions, " << log.num_users << " users)\n";
    return 0;
}

static int cmd_pretrain(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const uint64_t master = cfg.get_u64("seed");
    Bundle b = load_bundle(cfg);
    auto dataset = b.dataset;
    const double fraction = cfg.get_double("pt.fraction", 1.0);
    if (fraction < 1.0)
        dataset = subsample_users(dataset, fraction, derive_seed(master, "pt-fraction"));
    Encoder enc(encoder_config(cfg, b.tok.vocab_size()), derive_seed(master, "encoder-init"));
    auto report = stage_pt(enc, dataset, b.catalog, b.tok, stage_config(cfg, "pt", master));
    auto ckpt = enc.to_checkpoint();
    ckpt.set_meta("stage", "PT");
    write_ckpt(dir, "pt-encoder", ckpt);
    write_text(dir, "pt-report", ".txt", report.to_text());
    return 0;
}

static int cmd_ft1(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const uint64_t master = cfg.get_u64("seed");
    Bundle b = load_bundle(cfg);
    Encoder enc = load_encoder(cfg);
    auto [report, table] = stage_ft1(enc, b.split, b.catalog, b.tok,
                                     stage_config(cfg, "ft1", master));
    auto ckpt = enc.to_checkpoint();
    ckpt.set_meta("stage", "FT1");
    const std::string path = write_ckpt(dir, "ft1-encoder", ckpt);
    table.source_hash = hash_hex(ckpt.content_hash());
    write_ckpt(dir, "ft1-table", table_checkpoint(table));
    write_text(dir, "ft1-report", ".txt", report.to_text());
    (void)path;
    return 0;
}

static int cmd_ft2(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const uint64_t master = cfg.get_u64("seed");
    Bundle b = load_bundle(cfg);
    Encoder enc = load_encoder(cfg);
    EmbeddingTable table = load_table(cfg);
    auto report = stage_ft2(enc, table, b.split, b.catalog, b.tok,
                            stage_config(cfg, "ft2", master),
                            cfg.get_bool("ft2.table_trainable", false));
    auto ckpt = enc.to_checkpoint();
    ckpt.set_meta("stage", "FT2");
    write_ckpt(dir, "ft2-encoder", ckpt);
    write_ckpt(dir, "ft2-table", table_checkpoint(table));
    write_text(dir, "ft2-report", ".txt", report.to_text());
    return 0;
}

static int cmd_build_table(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    Bundle b = load_bundle(cfg);
    auto enc_ckpt = Checkpoint::load(cfg.get_str("encoder.checkpoint"));
    Encoder enc = Encoder::from_checkpoint(enc_ckpt);
    auto provenance = provenance_from_name(cfg.get_str("table.provenance", "LF"));
    auto table = build_item_table(enc, b.catalog, b.tok, provenance,
                                  hash_hex(enc_ckpt.content_hash()));
    write_ckpt(dir, "table-" + provenance_name(provenance), table_checkpoint(table));
    return 0;
}

static int cmd_run_variant(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const uint64_t master = cfg.get_u64("seed");
    Bundle b = load_bundle(cfg);
    auto protocol = protocol_config(cfg);
    auto spec = variant_spec(cfg, "variant", master);
    if (spec.mode == VariantMode::RecformerTrainable) {
        // encoder-side variant: stage-FT2 with the item table as a parameter
        Encoder enc = load_encoder(cfg);
        EmbeddingTable table = load_table(cfg);
        auto stage = stage_config(cfg, "ft2", master);
        auto report = stage_ft2(enc, table, b.split, b.catalog, b.tok, stage,
                                /*table_trainable=*/true);
        auto metrics = encoder_metrics(enc, table, b.split.test, b.catalog, b.tok, protocol,
                                       stage.history_items);
        metrics.checkpoint_hash = table.source_hash;
        auto ckpt = enc.to_checkpoint();
        ckpt.set_meta("stage", "FT2");
        write_ckpt(dir, "variant-" + spec.name + "-encoder", ckpt);
        write_ckpt(dir, "variant-" + spec.name + "-table", table_checkpoint(table));
        write_text(dir, "variant-" + spec.name + "-metrics", ".txt",
                   metrics.to_record() + report.to_text());
        return 0;
    }
    auto table = variant_table(cfg, spec, "table.path", b.catalog.size(), master);
    std::optional<Checkpoint> base;
    if (cfg.has("backbone.checkpoint"))
        base = Checkpoint::load(cfg.get_str("backbone.checkpoint"));
    auto result = run_variant(spec, table, base, b.split, protocol, b.catalog.size());
    write_ckpt(dir, "variant-" + spec.name + "-backbone", result.backbone_checkpoint);
    write_ckpt(dir, "variant-" + spec.name + "-table", result.table_checkpoint);
    write_text(dir, "variant-" + spec.name + "-metrics", ".txt",
               result.metrics.to_record() + result.report.to_text());
    return 0;
}

static int cmd_run_matrix(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const uint64_t master = cfg.get_u64("seed");
    Bundle b = load_bundle(cfg);
    auto protocol = protocol_config(cfg);

    std::vector<std::string> names;
    {
        std::istringstream in(cfg.get_str("variants"));
        std::string n;
        while (std::getline(in, n, ','))
            if (!n.empty()) names.push_back(n);
    }
    check(names.size() >= 2, "run-matrix: need at least two entries in 'variants'");
    std::vector<VariantSpec> specs;
    std::vector<std::optional<EmbeddingTable>> tables;
    for (const auto& name : names) {
        auto spec = variant_spec(cfg, "variant." + name, master);
        spec.name = name;
        tables.push_back(
            variant_table(cfg, spec, "variant." + name + ".table", b.catalog.size(), master));
        specs.push_back(std::move(spec));
    }
    auto report = run_matrix(specs, tables, b.split, protocol, b.catalog.size());
    write_text(dir, "matrix", ".txt", report.to_text());
    std::cout << report.to_text();
    return 0;
}

static int cmd_eval(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    Bundle b = load_bundle(cfg);
    auto protocol = protocol_config(cfg);
    auto bb_ckpt = Checkpoint::load(cfg.get_str("backbone.checkpoint"));
    Assembly as;
    as.backbone = Backbone::from_checkpoint(bb_ckpt);
    as.table = load_table(cfg);
    auto scorer = [&](const EvalInstance& inst, const std::vector<int>& cands) {
        return as.score(inst, cands);
    };
    auto metrics = evaluate(scorer, b.split.test, protocol, b.catalog.size());
    metrics.checkpoint_hash = as.table.source_hash.empty() ? hash_hex(bb_ckpt.content_hash())
                                                           : as.table.source_hash;
    write_text(dir, "eval-metrics", ".txt", metrics.to_record());
    std::cout << metrics.to_record();
    return 0;
}

static int cmd_probe_attention(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    Bundle b = load_bundle(cfg);
    Encoder enc = load_encoder(cfg);
    std::vector<int> prefix;
    if (cfg.has("probe.prefix")) {
        prefix = cfg.get_int_list("probe.prefix", "");
    } else {
        check(!b.split.test.empty(), "probe-attention: no test instances to pick a prefix from");
        // short histories render best; keep the three most recent items
        prefix = truncate_recent(b.split.test.front().prefix, 3);
    }
    auto trace = capture(enc, prefix, b.catalog, b.tok);
    write_text(dir, "attention-trace", ".tsv", trace.to_table());
    const auto metric = cfg.get_str("probe.metric", "cosine") == "js" ? RowMetric::JensenShannon
                                                                      : RowMetric::Cosine;
    auto sim = similarity(trace, metric);
    write_text(dir, "attention-similarity", ".tsv", sim.to_table());
    const int n_blocks = cfg.get_int("probe.blocks", 3);
    auto [within, between] =
        stratification_score(sim, layer_blocks(trace.layers, trace.heads, n_blocks));
    std::ostringstream out;
    out << "blocks " << n_blocks << "\nwithin " << within << "\nbetween " << between
        << "\nevidence " << within - between << "\n";
    write_text(dir, "stratification", ".txt", out.str());
    std::cout << out.str();
    return 0;
}

static int cmd_sweep_layers(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const uint64_t master = cfg.get_u64("seed");
    Bundle b = load_bundle(cfg);
    auto enc_ckpt = Checkpoint::load(cfg.get_str("encoder.checkpoint"));
    EmbeddingTable table = load_table(cfg);
    std::vector<TunedLayers> sets;
    if (cfg.has("probe.layer_sets")) {
        std::istringstream in(cfg.get_str("probe.layer_sets"));
        std::string part;
        while (std::getline(in, part, ';'))
            if (!part.empty()) sets.push_back(TunedLayers::parse(part));
    } else {
        sets = default_layer_sets(Encoder::from_checkpoint(enc_ckpt).config().layers);
    }
    auto report = layer_sweep(enc_ckpt, table, b.split, b.catalog, b.tok, sets,
                              stage_config(cfg, "ft2", master), protocol_config(cfg));
    write_text(dir, "layer-sweep", ".tsv", report.to_text());
    std::cout << report.to_text();
    return 0;
}

static int cmd_pretrain_size_ablation(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const uint64_t master = cfg.get_u64("seed");
    Bundle b = load_bundle(cfg);
    auto protocol = protocol_config(cfg);
    auto fractions = cfg.get_list("ablation.fractions", "0.01,0.1,1.0");
    check(!fractions.empty(), "ablation.fractions: empty list");

    std::ostringstream table_out;
    table_out << "fraction";
    for (int k : protocol.ks) table_out << "\thr@" << k << "\tndcg@" << k;
    table_out << "\n";
    for (double f : fractions) {
        std::ostringstream tag;
        tag << "pt-" << f;
        auto subset = f < 1.0 ? subsample_users(b.dataset, f, derive_seed(master, tag.str()))
                              : b.dataset;
        Encoder enc(encoder_config(cfg, b.tok.vocab_size()), derive_seed(master, "encoder-init"));
        stage_pt(enc, subset, b.catalog, b.tok, stage_config(cfg, "pt", master));
        auto ckpt = enc.to_checkpoint();
        ckpt.set_meta("stage", "PT");
        ckpt.set_meta("pt_fraction", std::to_string(f));
        write_ckpt(dir, "ablate-encoder-" + tag.str(), ckpt);

        auto table = build_item_table(enc, b.catalog, b.tok, Provenance::PT,
                                      hash_hex(ckpt.content_hash()));
        VariantSpec spec = variant_spec(cfg, "variant", master);
        spec.mode = VariantMode::Freeze;
        spec.provenance = Provenance::PT;
        spec.name = "pt-freeze-" + std::to_string(f);
        auto result = run_variant(spec, table, std::nullopt, b.split, protocol,
                                  b.catalog.size());
        table_out << f;
        for (size_t i = 0; i < result.metrics.ks.size(); ++i)
            table_out << "\t" << result.metrics.hr[i] << "\t" << result.metrics.ndcg[i];
        table_out << "\n";
    }
    write_text(dir, "pt-size-ablation", ".tsv", table_out.str());
    std::cout << table_out.str();
    return 0;
}

int dispatch(const std::string& command, const Config& cfg) {
    bool known = false;
    for (const auto& c : kCommands) known = known || c == command;
    if (!known) {
        std::cerr << "unknown command: " << command << "\n" << usage();
        return 2;
    }
    auto violations = validate(cfg, command);
    if (!violations.empty()) {
        for (const auto& v : violations) std::cerr << "config error: " << v << "\n";
        return 2;
    }
    try {
        if (command == "ingest") return cmd_ingest(cfg);
        if (command == "synth") return cmd_synth(cfg);
        if (command == "pretrain") return cmd_pretrain(cfg);
        if (command == "ft1") return cmd_ft1(cfg);
        if (command == "ft2") return cmd_ft2(cfg);
        if (command == "build-table") return cmd_build_table(cfg);
        if (command == "run-variant") return cmd_run_variant(cfg);
        if (command == "run-matrix") return cmd_run_matrix(cfg);
        if (command == "eval") return cmd_eval(cfg);
        if (command == "probe-attention") return cmd_probe_attention(cfg);
        if (command == "sweep-layers") return cmd_sweep_layers(cfg);
        if (command == "pretrain-size-ablation") return cmd_pretrain_size_ablation(cfg);
    } catch (const RecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;  // unreachable
}

}  // namespace rec
