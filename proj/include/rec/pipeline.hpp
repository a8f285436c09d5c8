#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rec/corpus.hpp"
#include "rec/eval.hpp"
#include "rec/seqmodels.hpp"
#include "rec/textenc.hpp"

namespace rec {

struct TunedLayers {
    enum class Mode { All, None, Subset };
    Mode mode = Mode::All;
    std::vector<int> layers;

    static TunedLayers all() { return {Mode::All, {}}; }
    static TunedLayers none() { return {Mode::None, {}}; }
    static TunedLayers subset(std::vector<int> ls) { return {Mode::Subset, std::move(ls)}; }
    static TunedLayers parse(const std::string& text);
    std::string to_string() const;
};

struct StageConfig {
    int epochs = 10;
    int batch_size = 16;
    float lr = 1e-3f;
    float temperature = 0.05f;  // IIC tau
    float mlm_rate = 0.15f;
    int patience = 10;
    TunedLayers tuned_layers = TunedLayers::all();
    uint64_t seed = 1;
    int history_items = 8;   // most recent items kept when flattening a history
    int val_cap = 256;       // validation instances used for the early-stop indicator (0 = all)
    float grad_clip = 5.0f;
};

struct EpochRecord {
    int epoch;
    double train_loss;
    double val_ndcg10;  // NaN when the stage has no ranking validation (stage-PT)
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    std::string stop_reason;
    double wall_seconds = 0.0;

    std::string to_text() const;  // one machine-readable line per epoch + summary
};

// tracks the best indicator value; stops `patience` epochs after the best
class EarlyStopper {
  public:
    explicit EarlyStopper(int patience) : patience_(patience) {
        check(patience >= 1, "early stopping patience must be >= 1");
    }
    // returns true if this epoch is a new best
    bool observe(int epoch, double indicator);
    bool should_stop(int epoch) const { return epoch - best_epoch_ >= patience_; }
    int best_epoch() const { return best_epoch_; }
    double best_value() const { return best_value_; }

  private:
    int patience_;
    int best_epoch_ = -1;
    double best_value_ = -1e300;
};

struct MlmResult {
    std::vector<int> corrupted;
    std::vector<int> positions;  // label positions
    std::vector<int> labels;     // original token ids at those positions
};

// each maskable (non-special) token is independently selected with
// probability mlm_rate; selected tokens become [MASK] 80% / random learned
// token 10% / unchanged 10%
MlmResult mlm_mask(const std::vector<int>& token_ids, float mlm_rate, uint64_t seed,
                   int vocab_size);

// in-batch contrastive loss over L2-normalized vectors: cross-entropy of the
// BxB similarity matrix divided by tau, diagonal as targets
TensorPtr iic_loss(Graph& g, const TensorPtr& seq_vecs, const TensorPtr& item_vecs, float tau);

// marks exactly the per-layer parameters of the listed layers trainable;
// embeddings and the final norm stay frozen unless tuned_layers = ALL
std::vector<TensorPtr> apply_layer_mask(Encoder& encoder, const TunedLayers& tuned);

// eval-mode CLS vector of every catalog item; detached from any graph
EmbeddingTable encode_catalog(const Encoder& encoder, const ItemCatalog& catalog,
                              const Tokenizer& tok, Provenance provenance);

std::vector<float> encode_history_vec(const Encoder& encoder, const std::vector<int>& prefix,
                                      const ItemCatalog& catalog, const Tokenizer& tok,
                                      int history_items);

// sampled-protocol NDCG@10 of the encoder+table scorer over (at most
// val_cap) validation instances
double encoder_val_ndcg10(const Encoder& encoder, const EmbeddingTable& table,
                          const std::vector<EvalInstance>& valid, const ItemCatalog& catalog,
                          const Tokenizer& tok, const StageConfig& cfg);

// MLM + IIC pre-training over the dataset's full sequences
TrainReport stage_pt(Encoder& encoder, const SequenceDataset& dataset,
                     const ItemCatalog& catalog, const Tokenizer& tok, const StageConfig& cfg);

// per-epoch re-encoded frozen item table, encoder trained against it with
// full-softmax cross-entropy; early stop on validation NDCG@10
std::pair<TrainReport, EmbeddingTable> stage_ft1(Encoder& encoder, const SplitDataset& split,
                                                 const ItemCatalog& catalog,
                                                 const Tokenizer& tok, const StageConfig& cfg);

// fixed item table; encoder trained subject to tuned_layers. When
// table_trainable is set the table itself becomes an ordinary parameter.
TrainReport stage_ft2(Encoder& encoder, EmbeddingTable& table, const SplitDataset& split,
                      const ItemCatalog& catalog, const Tokenizer& tok, const StageConfig& cfg,
                      bool table_trainable = false);

}  // namespace rec
