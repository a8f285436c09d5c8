#include "rec/textenc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace rec {

static std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(char(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Tokenizer Tokenizer::build(const ItemCatalog& catalog, int min_frequency) {
    check(!catalog.items.empty(), "build_tokenizer: empty catalog");
    std::map<std::string, int> freq;
    std::vector<std::string> order;
    for (const auto& item : catalog.items)
        for (const auto& kv : item) {
            for (const auto& src : {kv.first, kv.second})
                for (auto& t : whitespace_tokens(src)) {
                    auto [it, inserted] = freq.try_emplace(t, 0);
                    if (inserted) order.push_back(t);
                    ++it->second;
                }
        }
    Tokenizer tok;
    for (const auto& t : order)  // first-appearance order keeps id assignment deterministic
        if (freq[t] >= min_frequency) {
            tok.token_to_id_[t] = kFirstLearned + int(tok.id_to_token_.size());
            tok.id_to_token_.push_back(t);
        }
    check(!tok.id_to_token_.empty(), "build_tokenizer: empty vocabulary after thresholding");
    return tok;
}

int Tokenizer::lookup(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

std::vector<int> Tokenizer::tokenize(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& t : whitespace_tokens(text)) ids.push_back(lookup(t));
    return ids;
}

void Tokenizer::save(const std::string& path) const {
    std::ofstream out(path);
    check(bool(out), "tokenizer: cannot open " + path);
    for (size_t i = 0; i < id_to_token_.size(); ++i)
        out << id_to_token_[i] << "\t" << (kFirstLearned + i) << "\n";
}

Tokenizer Tokenizer::load(const std::string& path) {
    std::ifstream in(path);
    check(bool(in), "tokenizer: cannot open " + path);
    Tokenizer tok;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        check(tab != std::string::npos, "tokenizer: malformed line in " + path);
        std::string t = line.substr(0, tab);
        int id = std::stoi(line.substr(tab + 1));
        check(id == kFirstLearned + int(tok.id_to_token_.size()),
              "tokenizer: ids must be dense in " + path);
        tok.token_to_id_[t] = id;
        tok.id_to_token_.push_back(t);
    }
    check(!tok.id_to_token_.empty(), "tokenizer: empty file " + path);
    return tok;
}

FlatFragment flatten_item(const std::vector<std::pair<std::string, std::string>>& item,
                          const Tokenizer& tok) {
    FlatFragment frag;
    for (const auto& [key, value] : item) {
        for (int id : tok.tokenize(key)) {
            frag.token_ids.push_back(id);
            frag.token_type.push_back(1);
        }
        for (int id : tok.tokenize(value)) {
            frag.token_ids.push_back(id);
            frag.token_type.push_back(2);
        }
    }
    return frag;
}

FlatInput flatten_history(const std::vector<int>& prefix, const ItemCatalog& catalog,
                          const Tokenizer& tok, int max_tokens) {
    check(!prefix.empty(), "flatten_history: empty prefix");
    check(max_tokens >= 2, "flatten_history: max_tokens too small");
    FlatInput flat;
    flat.token_ids = {Tokenizer::kCls};
    flat.token_type = {0};
    flat.item_pos = {0};
    flat.attention_mask = {1};
    int slot = 1;
    for (auto it = prefix.rbegin(); it != prefix.rend(); ++it) {  // most recent first
        check(*it >= 0 && size_t(*it) < catalog.size(), "flatten_history: item id out of range");
        FlatFragment frag = flatten_item(catalog.items[size_t(*it)], tok);
        size_t room = size_t(max_tokens) - flat.size();
        if (room == 0) break;
        size_t take = std::min(room, frag.token_ids.size());
        for (size_t k = 0; k < take; ++k) {
            flat.token_ids.push_back(frag.token_ids[k]);
            flat.token_type.push_back(frag.token_type[k]);
            flat.item_pos.push_back(slot);
            flat.attention_mask.push_back(1);
        }
        if (take < frag.token_ids.size()) break;  // tail of the last retained item truncated
        ++slot;
    }
    return flat;
}

FlatInput flatten_single_item(int item_id, const ItemCatalog& catalog, const Tokenizer& tok,
                              int max_tokens) {
    return flatten_history({item_id}, catalog, tok, max_tokens);
}

// ---- encoder ------------------------------------------------------------

Encoder::Encoder(const EncoderConfig& cfg, uint64_t seed) : cfg_(cfg) {
    check(cfg.dim % cfg.heads == 0, "encoder: dim must be divisible by heads");
    check(cfg.layers >= 1, "encoder: at least one layer required");
    check(cfg.vocab_size > Tokenizer::kFirstLearned, "encoder: vocab_size not set");
    Rng rng(derive_seed(seed, "encoder-init"));
    auto param = [&](std::vector<int> shape, float stddev) {
        auto t = make_tensor(std::move(shape), true);
        fill_normal(*t, rng, stddev);
        return t;
    };
    auto ones = [&](int n) {
        auto t = make_tensor({n}, true);
        std::fill(t->data.begin(), t->data.end(), 1.0f);
        return t;
    };
    auto zeros = [&](std::vector<int> shape) { return make_tensor(std::move(shape), true); };

    token_emb = param({cfg.vocab_size, cfg.dim}, 0.02f);
    pos_emb = param({cfg.max_tokens, cfg.dim}, 0.02f);
    type_emb = param({3, cfg.dim}, 0.02f);
    itempos_emb = param({cfg.max_items + 1, cfg.dim}, 0.02f);
    final_gamma = ones(cfg.dim);
    final_beta = zeros({cfg.dim});
    for (int l = 0; l < cfg.layers; ++l) {
        Layer ly;
        ly.wq = param({cfg.dim, cfg.dim}, 0.02f);
        ly.bq = zeros({cfg.dim});
        ly.wk = param({cfg.dim, cfg.dim}, 0.02f);
        ly.bk = zeros({cfg.dim});
        ly.wv = param({cfg.dim, cfg.dim}, 0.02f);
        ly.bv = zeros({cfg.dim});
        ly.wo = param({cfg.dim, cfg.dim}, 0.02f);
        ly.bo = zeros({cfg.dim});
        ly.ln1_gamma = ones(cfg.dim);
        ly.ln1_beta = zeros({cfg.dim});
        ly.ln2_gamma = ones(cfg.dim);
        ly.ln2_beta = zeros({cfg.dim});
        ly.w1 = param({cfg.dim, cfg.ffn_dim}, 0.02f);
        ly.b1 = zeros({cfg.ffn_dim});
        ly.w2 = param({cfg.ffn_dim, cfg.dim}, 0.02f);
        ly.b2 = zeros({cfg.dim});
        layers.push_back(std::move(ly));
    }
}

TensorPtr Encoder::forward(Graph& g, const FlatInput& input, bool train, uint64_t dropout_seed,
                           AttentionCapture* capture) const {
    const int T = int(input.size());
    check(T >= 1, "encoder: empty input");
    check(T <= cfg_.max_tokens, "encoder: input longer than max_tokens");
    check(input.token_type[0] == 0 && input.item_pos[0] == 0,
          "encoder: input must start with the CLS slot");
    for (int ip : input.item_pos)
        check(ip <= cfg_.max_items, "encoder: item position exceeds max_items");

    std::vector<int> pos_idx(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) pos_idx[size_t(t)] = t;
    auto h = gather_rows(g, token_emb, input.token_ids);
    h = add(g, h, gather_rows(g, pos_emb, pos_idx));
    h = add(g, h, gather_rows(g, type_emb, input.token_type));
    h = add(g, h, gather_rows(g, itempos_emb, input.item_pos));

    // additive attention bias: PAD columns get a large negative value
    auto mask_bias = make_tensor({T});
    for (int t = 0; t < T; ++t)
        mask_bias->data[size_t(t)] = input.attention_mask[size_t(t)] ? 0.0f : -1e9f;

    const int H = cfg_.heads, dh = cfg_.dim / cfg_.heads;
    const float scal = 1.0f / std::sqrt(float(dh));
    const float drop = train ? cfg_.dropout : 0.0f;
    uint64_t dseed = derive_seed(dropout_seed, "encdrop");
    if (capture) {
        capture->layers = cfg_.layers;
        capture->heads = H;
        capture->tokens = T;
        capture->rows.assign(size_t(cfg_.layers) * H * T, 0.0f);
    }

    for (int l = 0; l < cfg_.layers; ++l) {
        const Layer& ly = layers[size_t(l)];
        auto x1 = layer_norm(g, h, ly.ln1_gamma, ly.ln1_beta);
        auto q = add_bias(g, matmul(g, x1, ly.wq), ly.bq);
        auto k = add_bias(g, matmul(g, x1, ly.wk), ly.bk);
        auto v = add_bias(g, matmul(g, x1, ly.wv), ly.bv);
        std::vector<TensorPtr> heads_out;
        for (int hh = 0; hh < H; ++hh) {
            auto qh = slice_cols(g, q, hh * dh, dh);
            auto kh = slice_cols(g, k, hh * dh, dh);
            auto vh = slice_cols(g, v, hh * dh, dh);
            auto scores = scale(g, matmul(g, qh, transpose(g, kh)), scal);
            scores = add_bias(g, scores, mask_bias);
            auto att = softmax(g, scores, 1);
            if (capture)
                for (int t = 0; t < T; ++t)
                    capture->rows[(size_t(l) * H + hh) * T + t] = att->data[size_t(t)];
            heads_out.push_back(matmul(g, att, vh));
        }
        auto ctx = concat_cols(g, heads_out);
        auto attn_out = add_bias(g, matmul(g, ctx, ly.wo), ly.bo);
        h = add(g, h, dropout(g, attn_out, drop, dseed = mix64(dseed)));
        auto x2 = layer_norm(g, h, ly.ln2_gamma, ly.ln2_beta);
        auto ff = add_bias(g, matmul(g, gelu(g, add_bias(g, matmul(g, x2, ly.w1), ly.b1)), ly.w2),
                           ly.b2);
        h = add(g, h, dropout(g, ff, drop, dseed = mix64(dseed)));
    }
    return layer_norm(g, h, final_gamma, final_beta);
}

TensorPtr Encoder::encode(Graph& g, const FlatInput& input, bool train, uint64_t dropout_seed,
                          AttentionCapture* capture) const {
    auto h = forward(g, input, train, dropout_seed, capture);
    return l2_normalize_rows(g, gather_rows(g, h, {0}));
}

TensorPtr Encoder::encode_item(Graph& g, int item_id, const ItemCatalog& catalog,
                               const Tokenizer& tok, bool train, uint64_t dropout_seed) const {
    return encode(g, flatten_single_item(item_id, catalog, tok, cfg_.max_tokens), train,
                  dropout_seed);
}

TensorPtr Encoder::mlm_logits(Graph& g, const TensorPtr& hidden,
                              const std::vector<int>& positions) const {
    auto picked = gather_rows(g, hidden, positions);
    return matmul(g, picked, transpose(g, token_emb));
}

std::vector<std::pair<std::string, TensorPtr>> Encoder::named_params() const {
    std::vector<std::pair<std::string, TensorPtr>> out = {
        {"token_emb", token_emb},   {"pos_emb", pos_emb},
        {"type_emb", type_emb},     {"itempos_emb", itempos_emb},
        {"final_gamma", final_gamma}, {"final_beta", final_beta},
    };
    for (size_t l = 0; l < layers.size(); ++l) {
        const Layer& ly = layers[l];
        const std::string p = "layer" + std::to_string(l) + ".";
        out.insert(out.end(), {{p + "wq", ly.wq}, {p + "bq", ly.bq}, {p + "wk", ly.wk},
                               {p + "bk", ly.bk}, {p + "wv", ly.wv}, {p + "bv", ly.bv},
                               {p + "wo", ly.wo}, {p + "bo", ly.bo},
                               {p + "ln1_gamma", ly.ln1_gamma}, {p + "ln1_beta", ly.ln1_beta},
                               {p + "ln2_gamma", ly.ln2_gamma}, {p + "ln2_beta", ly.ln2_beta},
                               {p + "w1", ly.w1}, {p + "b1", ly.b1}, {p + "w2", ly.w2},
                               {p + "b2", ly.b2}});
    }
    return out;
}

std::vector<TensorPtr> Encoder::params() const {
    std::vector<TensorPtr> out;
    for (auto& np : named_params()) out.push_back(np.second);
    return out;
}

std::vector<TensorPtr> Encoder::layer_params(int layer) const {
    check(layer >= 0 && layer < int(layers.size()), "layer_params: index out of range");
    const Layer& ly = layers[size_t(layer)];
    return {ly.wq, ly.bq, ly.wk, ly.bk, ly.wv, ly.bv, ly.wo, ly.bo,
            ly.ln1_gamma, ly.ln1_beta, ly.ln2_gamma, ly.ln2_beta,
            ly.w1, ly.b1, ly.w2, ly.b2};
}

std::vector<TensorPtr> Encoder::embedding_params() const {
    return {token_emb, pos_emb, type_emb, itempos_emb};
}

Checkpoint Encoder::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.kind = "encoder";
    ckpt.set_meta("layers", std::to_string(cfg_.layers));
    ckpt.set_meta("heads", std::to_string(cfg_.heads));
    ckpt.set_meta("dim", std::to_string(cfg_.dim));
    ckpt.set_meta("ffn_dim", std::to_string(cfg_.ffn_dim));
    ckpt.set_meta("max_tokens", std::to_string(cfg_.max_tokens));
    ckpt.set_meta("max_items", std::to_string(cfg_.max_items));
    ckpt.set_meta("vocab_size", std::to_string(cfg_.vocab_size));
    ckpt.set_meta("dropout", std::to_string(cfg_.dropout));
    for (auto& np : named_params()) ckpt.add(np.first, np.second);
    return ckpt;
}

Encoder Encoder::from_checkpoint(const Checkpoint& ckpt) {
    check(ckpt.kind == "encoder", "encoder: wrong checkpoint kind: " + ckpt.kind);
    EncoderConfig cfg;
    cfg.layers = std::stoi(ckpt.get_meta("layers"));
    cfg.heads = std::stoi(ckpt.get_meta("heads"));
    cfg.dim = std::stoi(ckpt.get_meta("dim"));
    cfg.ffn_dim = std::stoi(ckpt.get_meta("ffn_dim"));
    cfg.max_tokens = std::stoi(ckpt.get_meta("max_tokens"));
    cfg.max_items = std::stoi(ckpt.get_meta("max_items"));
    cfg.vocab_size = std::stoi(ckpt.get_meta("vocab_size"));
    cfg.dropout = std::stof(ckpt.get_meta("dropout"));
    Encoder enc(cfg, 0);
    for (auto& np : enc.named_params()) {
        auto src = ckpt.find(np.first);
        check(src->shape == np.second->shape, "encoder: shape mismatch for " + np.first);
        np.second->data = src->data;
    }
    return enc;
}

}  // namespace rec
