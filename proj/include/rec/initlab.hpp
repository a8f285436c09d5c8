#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rec/eval.hpp"
#include "rec/pipeline.hpp"
#include "rec/seqmodels.hpp"

namespace rec {

enum class VariantMode {
    Freeze,             // table fixed, backbone trainable
    Trainable,          // table and backbone trainable
    FurtherAll,         // continue from a trained FT-freeze run, all trainable
    FurtherEmb,         // continue from a trained FT-freeze run, only the table trainable
    AdditiveId,         // trainable random ID table + frozen text table, summed
    RecformerTrainable  // stage-FT2 with a trainable table (encoder-side variant)
};

std::string variant_mode_name(VariantMode m);
VariantMode variant_mode_from_name(const std::string& name);

struct TrainConfig {
    int epochs = 50;
    int batch_size = 128;
    std::vector<float> lrs = {1e-3f};  // grid; best chosen by validation NDCG@10
    int patience = 10;
    uint64_t seed = 1;
    float mask_prob = 0.2f;  // BERT4Rec Cloze rate
    int val_cap = 0;
    float grad_clip = 5.0f;
};

struct VariantSpec {
    std::string name;
    BackboneKind backbone = BackboneKind::SASRec;
    Provenance provenance = Provenance::Random;
    VariantMode mode = VariantMode::Trainable;
    TrainConfig train;
    BackboneConfig backbone_cfg;

    void validate_spec() const;
};

// trained backbone + item table(s) ready for training or scoring
struct Assembly {
    Backbone backbone;
    EmbeddingTable table;                       // main (trainable or frozen per mode)
    std::optional<EmbeddingTable> text_table;   // additive_id: frozen text rows
    std::vector<TensorPtr> trainable;

    // effective item-table tensor inside a graph (sum of tables for additive_id)
    TensorPtr effective_table(Graph& g) const;
    std::vector<float> effective_row(int item) const;
    std::vector<float> user_vector(const std::vector<int>& prefix) const;
    std::vector<float> score(const EvalInstance& inst, const std::vector<int>& cands) const;
};

EmbeddingTable build_item_table(const Encoder& encoder, const ItemCatalog& catalog,
                                const Tokenizer& tok, Provenance provenance,
                                const std::string& source_hash);

// init_table: the provenance-tagged initializer (ignored for Random).
// base: a persisted FT-freeze backbone checkpoint, required by further_* modes.
Assembly assemble(const VariantSpec& spec, const std::optional<EmbeddingTable>& init_table,
                  const std::optional<Checkpoint>& base_backbone);

struct VariantResult {
    TrainReport report;
    MetricsReport metrics;
    Checkpoint backbone_checkpoint;
    Checkpoint table_checkpoint;
    float chosen_lr = 0.0f;
};

VariantResult run_variant(const VariantSpec& spec, const std::optional<EmbeddingTable>& init_table,
                          const std::optional<Checkpoint>& base_backbone,
                          const SplitDataset& split, const EvalProtocol& protocol,
                          size_t catalog_size);

struct MatrixRow {
    std::string name;
    MetricsReport metrics;
    std::vector<double> improv_hr;    // relative vs the random-init baseline, aligned with ks
    std::vector<double> improv_ndcg;
};

struct MatrixReport {
    std::vector<MatrixRow> rows;
    std::string baseline_name;
    std::string to_text() const;
};

// one row per variant; Improv. columns are relative to the first
// random-provenance variant of the same list
MatrixReport run_matrix(const std::vector<VariantSpec>& specs,
                        const std::vector<std::optional<EmbeddingTable>>& init_tables,
                        const SplitDataset& split, const EvalProtocol& protocol,
                        size_t catalog_size);

// standalone backbone training with early stopping on validation NDCG@10
TrainReport train_backbone(Assembly& assembly, const SplitDataset& split,
                           const TrainConfig& cfg, float lr, size_t catalog_size);

}  // namespace rec
