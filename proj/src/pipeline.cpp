#include "rec/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace rec {

TunedLayers TunedLayers::parse(const std::string& text) {
    if (text == "all" || text == "ALL") return all();
    if (text == "none" || text == "NONE") return none();
    std::vector<int> ls;
    std::istringstream in(text);
    std::string piece;
    while (std::getline(in, piece, ','))
        if (!piece.empty()) ls.push_back(std::stoi(piece));
    check(!ls.empty(), "tuned_layers: cannot parse '" + text + "'");
    return subset(std::move(ls));
}

std::string TunedLayers::to_string() const {
    if (mode == Mode::All) return "all";
    if (mode == Mode::None) return "none";
    std::ostringstream out;
    for (size_t i = 0; i < layers.size(); ++i) out << (i ? "," : "") << layers[i];
    return out.str();
}

std::string TrainReport::to_text() const {
    std::ostringstream out;
    out.precision(10);
    for (const auto& e : epochs)
        out << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_ndcg10 "
            << e.val_ndcg10 << "\n";
    out << "best_epoch " << best_epoch << "\n";
    out << "stop_reason " << stop_reason << "\n";
    // wall_seconds is deliberately omitted: report files must be byte-identical
    // across reruns of the same config and seed
    return out.str();
}

bool EarlyStopper::observe(int epoch, double indicator) {
    if (indicator > best_value_) {
        best_value_ = indicator;
        best_epoch_ = epoch;
        return true;
    }
    return false;
}

MlmResult mlm_mask(const std::vector<int>& token_ids, float mlm_rate, uint64_t seed,
                   int vocab_size) {
    check(mlm_rate > 0.0f && mlm_rate < 1.0f, "mlm_mask: rate must be in (0,1)");
    check(vocab_size > Tokenizer::kFirstLearned, "mlm_mask: vocabulary has no learned tokens");
    Rng rng(derive_seed(seed, "mlm"));
    MlmResult res;
    res.corrupted = token_ids;
    const int learned = vocab_size - Tokenizer::kFirstLearned;
    for (size_t i = 0; i < token_ids.size(); ++i) {
        if (Tokenizer::is_special(token_ids[i])) continue;
        if (rng.uniformf() >= mlm_rate) continue;
        res.positions.push_back(int(i));
        res.labels.push_back(token_ids[i]);
        const float roll = rng.uniformf();
        if (roll < 0.8f)
            res.corrupted[i] = Tokenizer::kMask;
        else if (roll < 0.9f)
            res.corrupted[i] = Tokenizer::kFirstLearned + int(rng.below(uint64_t(learned)));
        // else: left unchanged
    }
    return res;
}

TensorPtr iic_loss(Graph& g, const TensorPtr& seq_vecs, const TensorPtr& item_vecs, float tau) {
    check(seq_vecs->shape == item_vecs->shape && seq_vecs->shape.size() == 2,
          "iic_loss: expects matching [B, d] inputs");
    const int B = seq_vecs->shape[0];
    check(B >= 2, "iic_loss: batch of at least 2 required (in-batch negatives)");
    auto sims = scale(g, matmul(g, seq_vecs, transpose(g, item_vecs)), 1.0f / tau);
    std::vector<int> diag(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) diag[size_t(b)] = b;
    return cross_entropy_logits(g, sims, diag);
}

std::vector<TensorPtr> apply_layer_mask(Encoder& encoder, const TunedLayers& tuned) {
    const int L = encoder.config().layers;
    for (auto& p : encoder.params()) p->requires_grad = false;
    std::vector<TensorPtr> trainable;
    switch (tuned.mode) {
        case TunedLayers::Mode::None:
            break;
        case TunedLayers::Mode::All:
            trainable = encoder.params();
            break;
        case TunedLayers::Mode::Subset:
            for (int l : tuned.layers) {
                check(l >= 0 && l < L, "apply_layer_mask: layer index out of range");
                for (auto& p : encoder.layer_params(l)) trainable.push_back(p);
            }
            break;
    }
    for (auto& p : trainable) p->requires_grad = true;
    return trainable;
}

EmbeddingTable encode_catalog(const Encoder& encoder, const ItemCatalog& catalog,
                              const Tokenizer& tok, Provenance provenance) {
    EmbeddingTable table;
    const int d = encoder.config().dim;
    table.matrix = make_tensor({int(catalog.size()), d});
    table.provenance = provenance;
    for (size_t i = 0; i < catalog.size(); ++i) {
        Graph g(/*recording=*/false);
        auto vec = encoder.encode_item(g, int(i), catalog, tok);
        std::copy(vec->data.begin(), vec->data.end(), table.matrix->data.begin() + long(i) * d);
    }
    return table;
}

std::vector<float> encode_history_vec(const Encoder& encoder, const std::vector<int>& prefix,
                                      const ItemCatalog& catalog, const Tokenizer& tok,
                                      int history_items) {
    Graph g(/*recording=*/false);
    auto flat = flatten_history(truncate_recent(prefix, history_items), catalog, tok,
                                encoder.config().max_tokens);
    return encoder.encode(g, flat, /*train=*/false, 0)->data;
}

static std::vector<EvalInstance> capped_valid(const std::vector<EvalInstance>& valid,
                                              const StageConfig& cfg) {
    if (cfg.val_cap <= 0 || int(valid.size()) <= cfg.val_cap) return valid;
    Rng rng(derive_seed(cfg.seed, "valcap"));
    auto perm = rng.permutation(valid.size());
    std::vector<EvalInstance> out;
    for (int i = 0; i < cfg.val_cap; ++i) out.push_back(valid[perm[size_t(i)]]);
    return out;
}

double encoder_val_ndcg10(const Encoder& encoder, const EmbeddingTable& table,
                          const std::vector<EvalInstance>& valid, const ItemCatalog& catalog,
                          const Tokenizer& tok, const StageConfig& cfg) {
    if (valid.empty()) return 0.0;
    EvalProtocol protocol;
    protocol.kind = ProtocolKind::Sampled;
    protocol.ks = {10};
    auto scorer = [&](const EvalInstance& inst, const std::vector<int>& cands) {
        auto vec = encode_history_vec(encoder, inst.prefix, catalog, tok, cfg.history_items);
        return score_candidates(vec, table, cands);
    };
    return evaluate(scorer, valid, protocol, catalog.size()).ndcg_at(10);
}

// parameter snapshot used to restore the best epoch
static std::vector<std::vector<float>> snapshot(const std::vector<TensorPtr>& params) {
    std::vector<std::vector<float>> s;
    for (const auto& p : params) s.push_back(p->data);
    return s;
}

static void restore(const std::vector<TensorPtr>& params,
                    const std::vector<std::vector<float>>& s) {
    for (size_t i = 0; i < params.size(); ++i) params[i]->data = s[i];
}

TrainReport stage_pt(Encoder& encoder, const SequenceDataset& dataset,
                     const ItemCatalog& catalog, const Tokenizer& tok, const StageConfig& cfg) {
    check(dataset.num_users() > 0, "stage_pt: empty dataset");
    const auto t0 = std::chrono::steady_clock::now();
    auto trainable = apply_layer_mask(encoder, cfg.tuned_layers);
    check(!trainable.empty(), "stage_pt: no trainable parameters");
    AdamState opt(trainable, {cfg.lr});
    EarlyStopper stopper(cfg.patience);
    TrainReport report;
    auto best = snapshot(trainable);

    std::vector<size_t> usable;
    for (size_t u = 0; u < dataset.num_users(); ++u)
        if (dataset.sequences[u].size() >= 2) usable.push_back(u);
    check(!usable.empty(), "stage_pt: no sequences of length >= 2");

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng order_rng(derive_seed(cfg.seed, "pt-order-" + std::to_string(epoch)));
        auto order = usable;
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
            const size_t end = std::min(order.size(), start + size_t(cfg.batch_size));
            if (end - start < 2) continue;  // IIC needs in-batch negatives
            Graph g;
            std::vector<TensorPtr> cls_vecs, item_vecs, mlm_losses;
            for (size_t bi = start; bi < end; ++bi) {
                const auto& seq = dataset.sequences[order[bi]];
                uint64_t iseed = derive_seed(cfg.seed, "pt-inst-" + std::to_string(epoch) + "-" +
                                                           std::to_string(order[bi]));
                Rng irng(iseed);
                const size_t cut = 1 + irng.below(seq.size() - 1);
                std::vector<int> prefix(seq.begin(), seq.begin() + long(cut));
                const int next_item = seq[cut];
                auto flat = flatten_history(truncate_recent(prefix, cfg.history_items), catalog,
                                            tok, encoder.config().max_tokens);
                auto mlm = mlm_mask(flat.token_ids, cfg.mlm_rate, mix64(iseed),
                                    encoder.config().vocab_size);
                FlatInput corrupted = flat;
                corrupted.token_ids = mlm.corrupted;
                auto hidden = encoder.forward(g, corrupted, /*train=*/true, mix64(iseed + 1));
                cls_vecs.push_back(l2_normalize_rows(g, gather_rows(g, hidden, {0})));
                if (!mlm.positions.empty())
                    mlm_losses.push_back(cross_entropy_logits(
                        g, encoder.mlm_logits(g, hidden, mlm.positions), mlm.labels));
                item_vecs.push_back(encoder.encode_item(g, next_item, catalog, tok,
                                                        /*train=*/true, mix64(iseed + 2)));
            }
            auto loss = iic_loss(g, concat_rows(g, cls_vecs), concat_rows(g, item_vecs),
                                 cfg.temperature);
            if (!mlm_losses.empty()) {
                auto mlm_total = mlm_losses[0];
                for (size_t i = 1; i < mlm_losses.size(); ++i)
                    mlm_total = add(g, mlm_total, mlm_losses[i]);
                // MLM and IIC summed with unit weights
                loss = add(g, loss, scale(g, mlm_total, 1.0f / float(mlm_losses.size())));
            }
            opt.zero_grad();
            g.backward(loss);
            opt.clip_global_norm(cfg.grad_clip);
            opt.step();
            loss_sum += loss->data[0];
            ++batches;
        }
        const double train_loss = batches ? loss_sum / double(batches) : 0.0;
        report.epochs.push_back({epoch, train_loss, std::nan("")});
        // stage-PT has no ranking validation; train loss drives early stopping
        if (stopper.observe(epoch, -train_loss)) best = snapshot(trainable);
        if (stopper.should_stop(epoch)) {
            report.stop_reason = "early_stop";
            break;
        }
    }
    if (report.stop_reason.empty()) report.stop_reason = "max_epochs";
    report.best_epoch = stopper.best_epoch();
    restore(trainable, best);
    for (auto& p : encoder.params()) p->requires_grad = true;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// shared FT loop: CLS vector of the training prefix against an item table
static TrainReport ft_loop(Encoder& encoder, EmbeddingTable& table, bool reencode_each_epoch,
                           const SplitDataset& split, const ItemCatalog& catalog,
                           const Tokenizer& tok, const StageConfig& cfg,
                           std::vector<TensorPtr> trainable) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainReport report;
    auto valid = capped_valid(split.valid, cfg);

    std::vector<size_t> usable;
    for (size_t u = 0; u < split.train.size(); ++u)
        if (split.train[u].size() >= 2) usable.push_back(u);
    check(!usable.empty(), "fine-tuning: no training sequences of length >= 2");

    if (trainable.empty()) {
        // freeze-everything configuration: nothing to optimize, report only
        if (reencode_each_epoch) table = encode_catalog(encoder, catalog, tok, table.provenance);
        const double val = encoder_val_ndcg10(encoder, table, valid, catalog, tok, cfg);
        report.epochs.push_back({0, std::nan(""), val});
        report.best_epoch = 0;
        report.stop_reason = "no_trainable_params";
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return report;
    }

    AdamState opt(trainable, {cfg.lr});
    EarlyStopper stopper(cfg.patience);
    auto best = snapshot(trainable);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (reencode_each_epoch)
            table = encode_catalog(encoder, catalog, tok, table.provenance);
        Rng order_rng(derive_seed(cfg.seed, "ft-order-" + std::to_string(epoch)));
        auto order = usable;
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
            const size_t end = std::min(order.size(), start + size_t(cfg.batch_size));
            Graph g;
            std::vector<TensorPtr> cls_vecs;
            std::vector<int> targets;
            for (size_t bi = start; bi < end; ++bi) {
                const auto& seq = split.train[order[bi]];
                std::vector<int> prefix(seq.begin(), seq.end() - 1);
                targets.push_back(seq.back());
                uint64_t iseed = derive_seed(cfg.seed, "ft-inst-" + std::to_string(epoch) + "-" +
                                                           std::to_string(order[bi]));
                auto flat = flatten_history(truncate_recent(prefix, cfg.history_items), catalog,
                                            tok, encoder.config().max_tokens);
                cls_vecs.push_back(encoder.encode(g, flat, /*train=*/true, iseed));
            }
            auto logits = matmul(g, concat_rows(g, cls_vecs), transpose(g, table.matrix));
            auto loss = cross_entropy_logits(g, logits, targets);
            opt.zero_grad();
            g.backward(loss);
            opt.clip_global_norm(cfg.grad_clip);
            opt.step();
            loss_sum += loss->data[0];
            ++batches;
        }
        EmbeddingTable eval_table = table;
        if (reencode_each_epoch)
            eval_table = encode_catalog(encoder, catalog, tok, table.provenance);
        const double val = encoder_val_ndcg10(encoder, eval_table, valid, catalog, tok, cfg);
        report.epochs.push_back({epoch, batches ? loss_sum / double(batches) : 0.0, val});
        if (stopper.observe(epoch, val)) best = snapshot(trainable);
        if (stopper.should_stop(epoch)) {
            report.stop_reason = "early_stop";
            break;
        }
    }
    if (report.stop_reason.empty()) report.stop_reason = "max_epochs";
    report.best_epoch = stopper.best_epoch();
    restore(trainable, best);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::pair<TrainReport, EmbeddingTable> stage_ft1(Encoder& encoder, const SplitDataset& split,
                                                 const ItemCatalog& catalog,
                                                 const Tokenizer& tok, const StageConfig& cfg) {
    check(!split.train.empty(), "stage_ft1: empty split");
    auto trainable = apply_layer_mask(encoder, cfg.tuned_layers);
    EmbeddingTable table;
    table.provenance = Provenance::FT;
    table.matrix = make_tensor({int(catalog.size()), encoder.config().dim});
    auto report = ft_loop(encoder, table, /*reencode_each_epoch=*/true, split, catalog, tok, cfg,
                          std::move(trainable));
    for (auto& p : encoder.params()) p->requires_grad = true;
    // final table from the restored best parameters
    table = encode_catalog(encoder, catalog, tok, Provenance::FT);
    return {std::move(report), std::move(table)};
}

TrainReport stage_ft2(Encoder& encoder, EmbeddingTable& table, const SplitDataset& split,
                      const ItemCatalog& catalog, const Tokenizer& tok, const StageConfig& cfg,
                      bool table_trainable) {
    check(!split.train.empty(), "stage_ft2: empty split");
    check(table.items() == int(catalog.size()), "stage_ft2: table/catalog size mismatch");
    auto trainable = apply_layer_mask(encoder, cfg.tuned_layers);
    table.set_trainable(table_trainable);
    if (table_trainable) trainable.push_back(table.matrix);
    auto report = ft_loop(encoder, table, /*reencode_each_epoch=*/false, split, catalog, tok,
                          cfg, std::move(trainable));
    table.set_trainable(false);
    for (auto& p : encoder.params()) p->requires_grad = true;
    return report;
}

}  // namespace rec
