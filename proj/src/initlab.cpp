#include "rec/initlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace rec {

std::string variant_mode_name(VariantMode m) {
    switch (m) {
        case VariantMode::Freeze: return "freeze";
        case VariantMode::Trainable: return "trainable";
        case VariantMode::FurtherAll: return "further_all";
        case VariantMode::FurtherEmb: return "further_emb";
        case VariantMode::AdditiveId: return "additive_id";
        case VariantMode::RecformerTrainable: return "recformer_trainable";
    }
    fail("unreachable variant mode");
}

VariantMode variant_mode_from_name(const std::string& name) {
    if (name == "freeze") return VariantMode::Freeze;
    if (name == "trainable") return VariantMode::Trainable;
    if (name == "further_all") return VariantMode::FurtherAll;
    if (name == "further_emb") return VariantMode::FurtherEmb;
    if (name == "additive_id") return VariantMode::AdditiveId;
    if (name == "recformer_trainable") return VariantMode::RecformerTrainable;
    fail("unknown variant mode: " + name);
}

void VariantSpec::validate_spec() const {
    if (mode == VariantMode::FurtherAll || mode == VariantMode::FurtherEmb)
        check(provenance == Provenance::FT,
              "variant '" + name + "': further_* modes start from the trained FT-freeze model");
    if (mode == VariantMode::AdditiveId)
        check(provenance != Provenance::Random,
              "variant '" + name + "': additive_id needs a text table to add");
    check(!train.lrs.empty(), "variant '" + name + "': empty learning-rate grid");
}

EmbeddingTable build_item_table(const Encoder& encoder, const ItemCatalog& catalog,
                                const Tokenizer& tok, Provenance provenance,
                                const std::string& source_hash) {
    auto table = encode_catalog(encoder, catalog, tok, provenance);
    table.source_hash = source_hash;
    return table;
}

static EmbeddingTable deep_copy(const EmbeddingTable& src) {
    EmbeddingTable out;
    out.matrix = make_tensor(src.matrix->shape, src.matrix->data);
    out.provenance = src.provenance;
    out.source_hash = src.source_hash;
    return out;
}

Assembly assemble(const VariantSpec& spec, const std::optional<EmbeddingTable>& init_table,
                  const std::optional<Checkpoint>& base_backbone) {
    spec.validate_spec();
    check(spec.mode != VariantMode::RecformerTrainable,
          "assemble: recformer_trainable is encoder-side; use run_recformer_trainable");
    Assembly as;

    if (spec.mode == VariantMode::FurtherAll || spec.mode == VariantMode::FurtherEmb) {
        check(base_backbone.has_value(), "assemble: further_* modes need a base backbone run");
        // lineage check: only a persisted FT-freeze run is a valid starting point
        check(base_backbone->get_meta("mode") == "freeze" &&
                  base_backbone->get_meta("provenance") == "FT",
              "assemble: base checkpoint is not an FT-freeze run (mode=" +
                  base_backbone->get_meta("mode") + ", provenance=" +
                  base_backbone->get_meta("provenance") + ")");
        as.backbone = Backbone::from_checkpoint(*base_backbone);
    } else {
        as.backbone = Backbone(spec.backbone_cfg, derive_seed(spec.train.seed, "backbone"));
    }

    const int dim = as.backbone.config().dim;
    if (spec.provenance == Provenance::Random) {
        check(spec.mode == VariantMode::Trainable || spec.mode == VariantMode::Freeze,
              "assemble: random provenance supports freeze/trainable only");
        check(init_table.has_value(), "assemble: random table must still be provided (sized)");
        as.table = deep_copy(*init_table);
    } else {
        check(init_table.has_value(), "assemble: provenance " +
                                          provenance_name(spec.provenance) +
                                          " requires an initializing table");
        check(init_table->provenance == spec.provenance,
              "assemble: table provenance mismatch for variant '" + spec.name + "'");
        check(init_table->dim() == dim, "assemble: table dim does not match backbone dim");
        as.table = deep_copy(*init_table);
    }

    switch (spec.mode) {
        case VariantMode::Freeze:
            as.table.set_trainable(false);
            as.trainable = as.backbone.params();
            break;
        case VariantMode::Trainable:
            as.table.set_trainable(true);
            as.trainable = as.backbone.params();
            as.trainable.push_back(as.table.matrix);
            break;
        case VariantMode::FurtherAll:
            as.table.set_trainable(true);
            as.trainable = as.backbone.params();
            as.trainable.push_back(as.table.matrix);
            break;
        case VariantMode::FurtherEmb:
            as.table.set_trainable(true);
            as.trainable = {as.table.matrix};  // just the item embeddings
            break;
        case VariantMode::AdditiveId: {
            as.text_table = deep_copy(as.table);
            as.text_table->set_trainable(false);
            as.table = random_table(as.text_table->items(), dim,
                                    derive_seed(spec.train.seed, "additive-id"));
            as.table.set_trainable(true);
            as.trainable = as.backbone.params();
            as.trainable.push_back(as.table.matrix);
            break;
        }
        case VariantMode::RecformerTrainable:
            break;  // unreachable, rejected above
    }
    for (auto& p : as.backbone.params())
        p->requires_grad = spec.mode != VariantMode::FurtherEmb;
    return as;
}

TensorPtr Assembly::effective_table(Graph& g) const {
    if (!text_table) return table.matrix;
    return add(g, table.matrix, text_table->matrix);
}

std::vector<float> Assembly::effective_row(int item) const {
    const int d = table.dim();
    std::vector<float> row(table.matrix->data.begin() + size_t(item) * d,
                           table.matrix->data.begin() + size_t(item + 1) * d);
    if (text_table)
        for (int i = 0; i < d; ++i) row[size_t(i)] += text_table->matrix->data[size_t(item) * d + i];
    return row;
}

std::vector<float> Assembly::user_vector(const std::vector<int>& prefix) const {
    check(!prefix.empty(), "user_vector: empty prefix");
    Graph g(/*recording=*/false);
    const int max_items = backbone.config().max_items;
    if (backbone.config().kind == BackboneKind::SASRec) {
        auto items = truncate_recent(prefix, max_items);
        auto h = backbone.sasrec_forward(g, effective_table(g), items);
        const int d = backbone.config().dim;
        const int T = int(items.size());
        return {h->data.begin() + size_t(T - 1) * d, h->data.begin() + size_t(T) * d};
    }
    // BERT4Rec: append one mask slot after the prefix and read its hidden state
    auto items = truncate_recent(prefix, max_items - 1);
    items.push_back(0);  // placeholder, replaced by the mask embedding
    const int T = int(items.size());
    auto h = backbone.bert4rec_hidden(g, effective_table(g), items, {T - 1});
    const int d = backbone.config().dim;
    return {h->data.begin() + size_t(T - 1) * d, h->data.begin() + size_t(T) * d};
}

std::vector<float> Assembly::score(const EvalInstance& inst,
                                   const std::vector<int>& cands) const {
    auto uvec = user_vector(inst.prefix);
    const int d = table.dim();
    std::vector<float> scores;
    scores.reserve(cands.size());
    for (int c : cands) {
        check(c >= 0 && c < table.items(), "score: candidate id out of range");
        auto row = effective_row(c);
        float s = 0.0f;
        for (int i = 0; i < d; ++i) s += uvec[size_t(i)] * row[size_t(i)];
        scores.push_back(s);
    }
    return scores;
}

static double assembly_val_ndcg10(const Assembly& as, const std::vector<EvalInstance>& valid,
                                  size_t catalog_size) {
    if (valid.empty()) return 0.0;
    EvalProtocol protocol;
    protocol.kind = ProtocolKind::Sampled;
    protocol.ks = {10};
    auto scorer = [&](const EvalInstance& inst, const std::vector<int>& cands) {
        return as.score(inst, cands);
    };
    return evaluate(scorer, valid, protocol, catalog_size).ndcg_at(10);
}

TrainReport train_backbone(Assembly& as, const SplitDataset& split, const TrainConfig& cfg,
                           float lr, size_t catalog_size) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainReport report;

    std::vector<size_t> usable;
    for (size_t u = 0; u < split.train.size(); ++u)
        if (split.train[u].size() >= 2) usable.push_back(u);
    check(!usable.empty(), "train_backbone: no training sequences of length >= 2");

    std::vector<EvalInstance> valid = split.valid;
    if (cfg.val_cap > 0 && int(valid.size()) > cfg.val_cap) {
        Rng rng(derive_seed(cfg.seed, "valcap"));
        auto perm = rng.permutation(valid.size());
        valid.clear();
        for (int i = 0; i < cfg.val_cap; ++i) valid.push_back(split.valid[perm[size_t(i)]]);
    }

    check(!as.trainable.empty(), "train_backbone: nothing to train");
    AdamState opt(as.trainable, {lr});
    EarlyStopper stopper(cfg.patience);
    std::vector<std::vector<float>> best;
    for (const auto& p : as.trainable) best.push_back(p->data);

    const int max_items = as.backbone.config().max_items;
    const bool is_sasrec = as.backbone.config().kind == BackboneKind::SASRec;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng order_rng(derive_seed(cfg.seed, "bb-order-" + std::to_string(epoch)));
        auto order = usable;
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
            const size_t end = std::min(order.size(), start + size_t(cfg.batch_size));
            Graph g;
            auto table = as.effective_table(g);
            TensorPtr total;
            int n = 0;
            for (size_t bi = start; bi < end; ++bi) {
                auto seq = truncate_recent(split.train[order[bi]], max_items);
                if (seq.size() < 2) continue;
                uint64_t iseed = derive_seed(cfg.seed, "bb-inst-" + std::to_string(epoch) + "-" +
                                                           std::to_string(order[bi]));
                TensorPtr loss;
                if (is_sasrec) {
                    loss = sasrec_next_item_loss(g, as.backbone, table, seq, /*train=*/true,
                                                 iseed);
                } else {
                    Rng mrng(iseed);
                    std::vector<int> positions, labels;
                    for (size_t t = 0; t < seq.size(); ++t)
                        if (mrng.uniformf() < cfg.mask_prob) {
                            positions.push_back(int(t));
                            labels.push_back(seq[t]);
                        }
                    if (positions.empty()) {  // the Cloze loss needs at least one slot
                        positions.push_back(int(seq.size()) - 1);
                        labels.push_back(seq.back());
                    }
                    loss = bert4rec_masked_loss(g, as.backbone, table, seq, positions, labels,
                                                /*train=*/true, mix64(iseed));
                }
                total = total ? add(g, total, loss) : loss;
                ++n;
            }
            if (!total) continue;
            auto loss = scale(g, total, 1.0f / float(n));
            opt.zero_grad();
            g.backward(loss);
            opt.clip_global_norm(cfg.grad_clip);
            opt.step();
            loss_sum += loss->data[0];
            ++batches;
        }
        const double val = assembly_val_ndcg10(as, valid, catalog_size);
        report.epochs.push_back({epoch, batches ? loss_sum / double(batches) : 0.0, val});
        if (stopper.observe(epoch, val))
            for (size_t i = 0; i < as.trainable.size(); ++i) best[i] = as.trainable[i]->data;
        if (stopper.should_stop(epoch)) {
            report.stop_reason = "early_stop";
            break;
        }
    }
    if (report.stop_reason.empty()) report.stop_reason = "max_epochs";
    report.best_epoch = stopper.best_epoch();
    for (size_t i = 0; i < as.trainable.size(); ++i) as.trainable[i]->data = best[i];
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

VariantResult run_variant(const VariantSpec& spec,
                          const std::optional<EmbeddingTable>& init_table,
                          const std::optional<Checkpoint>& base_backbone,
                          const SplitDataset& split, const EvalProtocol& protocol,
                          size_t catalog_size) {
    spec.validate_spec();
    VariantResult result;
    std::optional<Assembly> best_as;
    double best_val = -1e300;
    for (float lr : spec.train.lrs) {
        Assembly as = assemble(spec, init_table, base_backbone);
        auto report = train_backbone(as, split, spec.train, lr, catalog_size);
        double val = report.best_epoch >= 0 && !report.epochs.empty()
                         ? report.epochs[size_t(std::min<int>(report.best_epoch,
                                                              int(report.epochs.size()) - 1))]
                               .val_ndcg10
                         : -1e300;
        if (val > best_val) {
            best_val = val;
            best_as = std::move(as);
            result.report = std::move(report);
            result.chosen_lr = lr;
        }
    }

    auto scorer = [&](const EvalInstance& inst, const std::vector<int>& cands) {
        return best_as->score(inst, cands);
    };
    result.metrics = evaluate(scorer, split.test, protocol, catalog_size);
    result.metrics.checkpoint_hash = init_table && !init_table->source_hash.empty()
                                         ? init_table->source_hash
                                         : "random";

    result.backbone_checkpoint = best_as->backbone.to_checkpoint();
    result.backbone_checkpoint.set_meta("variant", spec.name);
    result.backbone_checkpoint.set_meta("mode", variant_mode_name(spec.mode));
    result.backbone_checkpoint.set_meta("provenance", provenance_name(spec.provenance));
    result.backbone_checkpoint.set_meta("lr", std::to_string(result.chosen_lr));
    result.table_checkpoint = table_checkpoint(best_as->table);
    return result;
}

std::string MatrixReport::to_text() const {
    std::ostringstream out;
    out << "# variant metrics (fractions; Improv. relative to " << baseline_name << ")\n";
    for (const auto& row : rows) {
        out << row.name;
        for (size_t i = 0; i < row.metrics.ks.size(); ++i) {
            out << " hr@" << row.metrics.ks[i] << "=" << std::fixed << std::setprecision(6)
                << row.metrics.hr[i] << " ndcg@" << row.metrics.ks[i] << "="
                << row.metrics.ndcg[i];
        }
        for (size_t i = 0; i < row.metrics.ks.size(); ++i)
            out << " improv_ndcg@" << row.metrics.ks[i] << "=" << std::setprecision(4)
                << row.improv_ndcg[i] * 100.0 << "%";
        out << "\n";
    }
    return out.str();
}

MatrixReport run_matrix(const std::vector<VariantSpec>& specs,
                        const std::vector<std::optional<EmbeddingTable>>& init_tables,
                        const SplitDataset& split, const EvalProtocol& protocol,
                        size_t catalog_size) {
    check(specs.size() == init_tables.size(), "run_matrix: specs/tables size mismatch");
    MatrixReport report;
    std::vector<MetricsReport> metrics;
    size_t baseline = 0;
    bool have_baseline = false;
    for (size_t i = 0; i < specs.size(); ++i) {
        auto result = run_variant(specs[i], init_tables[i], std::nullopt, split, protocol,
                                  catalog_size);
        metrics.push_back(result.metrics);
        if (!have_baseline && specs[i].provenance == Provenance::Random) {
            baseline = i;
            have_baseline = true;
        }
    }
    if (!have_baseline) baseline = 0;
    report.baseline_name = specs[baseline].name;
    const auto& base = metrics[baseline];
    for (size_t i = 0; i < specs.size(); ++i) {
        MatrixRow row;
        row.name = specs[i].name;
        row.metrics = metrics[i];
        for (size_t k = 0; k < metrics[i].ks.size(); ++k) {
            row.improv_hr.push_back(base.hr[k] > 0 ? metrics[i].hr[k] / base.hr[k] - 1.0 : 0.0);
            row.improv_ndcg.push_back(base.ndcg[k] > 0 ? metrics[i].ndcg[k] / base.ndcg[k] - 1.0
                                                       : 0.0);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace rec
