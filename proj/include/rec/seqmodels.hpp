#pragma once

#include <string>
#include <vector>

#include "rec/checkpoint.hpp"
#include "rec/tensor.hpp"

namespace rec {

enum class Provenance { Random, LF, PT, FT };

std::string provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

// catalog-aligned item vector table; provenance is fixed at creation
struct EmbeddingTable {
    TensorPtr matrix;  // [catalog_size, dim]
    Provenance provenance = Provenance::Random;
    std::string source_hash;  // content hash of the initializing checkpoint

    int items() const { return matrix->shape[0]; }
    int dim() const { return matrix->shape[1]; }
    bool trainable() const { return matrix->requires_grad; }
    void set_trainable(bool t) { matrix->requires_grad = t; }
    uint64_t checksum() const {
        return fnv1a(matrix->data.data(), matrix->data.size() * sizeof(float));
    }
};

EmbeddingTable random_table(int items, int dim, uint64_t seed);

// plain binary matrix export: one-line text header "rows cols provenance",
// then row-major little-endian float32
void export_table(const EmbeddingTable& table, const std::string& path);
EmbeddingTable import_table(const std::string& path);

Checkpoint table_checkpoint(const EmbeddingTable& table);
EmbeddingTable table_from_checkpoint(const Checkpoint& ckpt);

enum class BackboneKind { SASRec, BERT4Rec };

std::string backbone_name(BackboneKind k);
BackboneKind backbone_from_name(const std::string& name);

struct BackboneConfig {
    BackboneKind kind = BackboneKind::SASRec;
    int layers = 2;
    int heads = 1;  // SASRec default; BERT4Rec uses 2
    int dim = 64;
    int ffn_dim = 256;
    int max_items = 50;
    float dropout = 0.1f;
};

// ID-based transformer over item embeddings. SASRec is strictly causal;
// BERT4Rec is unmasked bidirectional with a learned mask-item embedding.
class Backbone {
  public:
    Backbone() = default;
    Backbone(const BackboneConfig& cfg, uint64_t seed);

    const BackboneConfig& config() const { return cfg_; }

    // per-position user vectors [T, dim]; position t attends only to <= t
    TensorPtr sasrec_forward(Graph& g, const TensorPtr& table, const std::vector<int>& items,
                             bool train = false, uint64_t dropout_seed = 0) const;

    // hidden states for a partially masked sequence (masked positions use the
    // learned mask embedding); bidirectional attention
    TensorPtr bert4rec_hidden(Graph& g, const TensorPtr& table, const std::vector<int>& items,
                              const std::vector<int>& masked_positions, bool train = false,
                              uint64_t dropout_seed = 0) const;

    // logits over the catalog at the masked slots, tied to the item table
    TensorPtr bert4rec_forward(Graph& g, const TensorPtr& table, const std::vector<int>& items,
                               const std::vector<int>& masked_positions, bool train = false,
                               uint64_t dropout_seed = 0) const;

    std::vector<std::pair<std::string, TensorPtr>> named_params() const;
    std::vector<TensorPtr> params() const;

    Checkpoint to_checkpoint() const;
    static Backbone from_checkpoint(const Checkpoint& ckpt);

    TensorPtr pos_emb, mask_emb, final_gamma, final_beta;
    struct Layer {
        TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;
        TensorPtr ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
        TensorPtr w1, b1, w2, b2;
    };
    std::vector<Layer> layers;

  private:
    TensorPtr run(Graph& g, TensorPtr h, bool causal, bool train, uint64_t dropout_seed) const;
    BackboneConfig cfg_;
};

// truncate to the most recent max_items entries
std::vector<int> truncate_recent(const std::vector<int>& items, int max_items);

// score_c = dot(user_vector, table row c); plain evaluation path, no autograd
std::vector<float> score_candidates(const std::vector<float>& user_vec,
                                    const EmbeddingTable& table,
                                    const std::vector<int>& candidates);

// SASRec: full-softmax cross-entropy of each position's vector against the
// next item over the whole catalog (causality makes this equivalent to
// last-position loss over every prefix).
TensorPtr sasrec_next_item_loss(Graph& g, const Backbone& backbone, const TensorPtr& table,
                                const std::vector<int>& sequence, bool train = false,
                                uint64_t dropout_seed = 0);

// BERT4Rec: cross-entropy at the masked slots
TensorPtr bert4rec_masked_loss(Graph& g, const Backbone& backbone, const TensorPtr& table,
                               const std::vector<int>& corrupted,
                               const std::vector<int>& masked_positions,
                               const std::vector<int>& labels, bool train = false,
                               uint64_t dropout_seed = 0);

}  // namespace rec
