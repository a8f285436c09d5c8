#pragma once

#include <map>
#include <string>
#include <vector>

#include "rec/checkpoint.hpp"
#include "rec/corpus.hpp"
#include "rec/tensor.hpp"

namespace rec {

// Whitespace tokenizer over lowercased catalog text. Special ids sit below
// the learned-token range.
class Tokenizer {
  public:
    static constexpr int kPad = 0;
    static constexpr int kCls = 1;
    static constexpr int kMask = 2;
    static constexpr int kUnk = 3;
    static constexpr int kFirstLearned = 4;

    static Tokenizer build(const ItemCatalog& catalog, int min_frequency);

    int vocab_size() const { return kFirstLearned + int(id_to_token_.size()); }
    int lookup(const std::string& token) const;
    std::vector<int> tokenize(const std::string& text) const;
    static bool is_special(int id) { return id < kFirstLearned; }

    void save(const std::string& path) const;
    static Tokenizer load(const std::string& path);

  private:
    std::map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
};

// Token-level layout of a flattened item history:
//   token_type: 0 = [CLS] (and PAD), 1 = attribute key, 2 = attribute value
//   item_pos:   0 = [CLS] slot, then 1, 2, ... per item (1 = most recent)
struct FlatInput {
    std::vector<int> token_ids;
    std::vector<int> token_type;
    std::vector<int> item_pos;
    std::vector<int> attention_mask;  // 1 = real token, 0 = PAD
    size_t size() const { return token_ids.size(); }
};

struct FlatFragment {
    std::vector<int> token_ids;
    std::vector<int> token_type;
};

FlatFragment flatten_item(const std::vector<std::pair<std::string, std::string>>& item,
                          const Tokenizer& tok);

// [CLS] first, then item fragments in reversed chronological order (most
// recent first). Truncates by dropping whole oldest items, then tail tokens
// of the last retained item; never emits an empty layout.
FlatInput flatten_history(const std::vector<int>& prefix, const ItemCatalog& catalog,
                          const Tokenizer& tok, int max_tokens);

FlatInput flatten_single_item(int item_id, const ItemCatalog& catalog, const Tokenizer& tok,
                              int max_tokens);

// per-layer, per-head post-softmax attention rows of the [CLS] query
struct AttentionCapture {
    int layers = 0;
    int heads = 0;
    int tokens = 0;
    std::vector<float> rows;  // [layers][heads][tokens]
    float at(int l, int h, int t) const {
        return rows[(size_t(l) * heads + h) * tokens + t];
    }
};

struct EncoderConfig {
    int layers = 6;
    int heads = 4;
    int dim = 64;
    int ffn_dim = 256;
    int max_tokens = 128;
    int max_items = 64;  // item-position table size (slot 0 = CLS)
    int vocab_size = 0;
    float dropout = 0.1f;
};

// Bidirectional transformer encoder with token / absolute-position /
// token-type / item-position embeddings added at the input layer. Pre-norm
// residual blocks, GELU, full attention. CLS output is L2-normalized.
class Encoder {
  public:
    Encoder() = default;
    Encoder(const EncoderConfig& cfg, uint64_t seed);

    const EncoderConfig& config() const { return cfg_; }

    // hidden states [T, dim] after the final norm
    TensorPtr forward(Graph& g, const FlatInput& input, bool train, uint64_t dropout_seed,
                      AttentionCapture* capture = nullptr) const;
    // final-layer hidden state at position 0, L2-normalized: [1, dim]
    TensorPtr encode(Graph& g, const FlatInput& input, bool train, uint64_t dropout_seed,
                     AttentionCapture* capture = nullptr) const;
    TensorPtr encode_item(Graph& g, int item_id, const ItemCatalog& catalog,
                          const Tokenizer& tok, bool train = false,
                          uint64_t dropout_seed = 0) const;
    // logits over the vocabulary (tied token embedding) at the given positions
    TensorPtr mlm_logits(Graph& g, const TensorPtr& hidden,
                         const std::vector<int>& positions) const;

    std::vector<std::pair<std::string, TensorPtr>> named_params() const;
    std::vector<TensorPtr> params() const;
    // parameters of one transformer layer, in checkpoint order
    std::vector<TensorPtr> layer_params(int layer) const;
    std::vector<TensorPtr> embedding_params() const;

    Checkpoint to_checkpoint() const;
    static Encoder from_checkpoint(const Checkpoint& ckpt);

    TensorPtr token_emb, pos_emb, type_emb, itempos_emb;
    TensorPtr final_gamma, final_beta;
    struct Layer {
        TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;
        TensorPtr ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
        TensorPtr w1, b1, w2, b2;
    };
    std::vector<Layer> layers;

  private:
    EncoderConfig cfg_;
};

}  // namespace rec
