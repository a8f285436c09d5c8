#include "rec/seqmodels.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace rec {

std::string provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Random: return "random";
        case Provenance::LF: return "LF";
        case Provenance::PT: return "PT";
        case Provenance::FT: return "FT";
    }
    fail("unreachable provenance");
}

Provenance provenance_from_name(const std::string& name) {
    if (name == "random") return Provenance::Random;
    if (name == "LF") return Provenance::LF;
    if (name == "PT") return Provenance::PT;
    if (name == "FT") return Provenance::FT;
    fail("unknown provenance: " + name);
}

std::string backbone_name(BackboneKind k) {
    return k == BackboneKind::SASRec ? "sasrec" : "bert4rec";
}

BackboneKind backbone_from_name(const std::string& name) {
    if (name == "sasrec") return BackboneKind::SASRec;
    if (name == "bert4rec") return BackboneKind::BERT4Rec;
    fail("unknown backbone: " + name);
}

EmbeddingTable random_table(int items, int dim, uint64_t seed) {
    EmbeddingTable table;
    table.matrix = make_tensor({items, dim}, true);
    Rng rng(derive_seed(seed, "table-init"));
    fill_normal(*table.matrix, rng, 0.02f);
    table.provenance = Provenance::Random;
    return table;
}

void export_table(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    check(bool(out), "export_table: cannot open " + path);
    out << table.items() << " " << table.dim() << " " << provenance_name(table.provenance)
        << "\n";
    out.write(reinterpret_cast<const char*>(table.matrix->data.data()),
              std::streamsize(table.matrix->data.size() * sizeof(float)));
}

EmbeddingTable import_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(bool(in), "import_table: cannot open " + path);
    std::string header;
    check(bool(std::getline(in, header)), "import_table: missing header in " + path);
    std::istringstream hs(header);
    int rows = 0, cols = 0;
    std::string prov;
    hs >> rows >> cols >> prov;
    check(bool(hs) && rows > 0 && cols > 0, "import_table: malformed header in " + path);
    EmbeddingTable table;
    table.matrix = make_tensor({rows, cols});
    table.provenance = provenance_from_name(prov);
    in.read(reinterpret_cast<char*>(table.matrix->data.data()),
            std::streamsize(table.matrix->data.size() * sizeof(float)));
    check(in.gcount() == std::streamsize(table.matrix->data.size() * sizeof(float)),
          "import_table: truncated payload in " + path);
    return table;
}

Checkpoint table_checkpoint(const EmbeddingTable& table) {
    Checkpoint ckpt;
    ckpt.kind = "table";
    ckpt.set_meta("provenance", provenance_name(table.provenance));
    ckpt.set_meta("source_hash", table.source_hash.empty() ? "-" : table.source_hash);
    ckpt.add("matrix", table.matrix);
    return ckpt;
}

EmbeddingTable table_from_checkpoint(const Checkpoint& ckpt) {
    check(ckpt.kind == "table", "table_from_checkpoint: wrong kind: " + ckpt.kind);
    EmbeddingTable table;
    table.matrix = ckpt.find("matrix");
    table.provenance = provenance_from_name(ckpt.get_meta("provenance"));
    std::string src = ckpt.get_meta("source_hash");
    if (src != "-") table.source_hash = src;
    return table;
}

// ---- backbone -----------------------------------------------------------

Backbone::Backbone(const BackboneConfig& cfg, uint64_t seed) : cfg_(cfg) {
    check(cfg.dim % cfg.heads == 0, "backbone: dim must be divisible by heads");
    Rng rng(derive_seed(seed, "backbone-init"));
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
    pos_emb = param({cfg.max_items, cfg.dim}, 0.02f);
    mask_emb = param({1, cfg.dim}, 0.02f);
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

TensorPtr Backbone::run(Graph& g, TensorPtr h, bool causal, bool train,
                        uint64_t dropout_seed) const {
    const int T = h->shape[0];
    const int H = cfg_.heads, dh = cfg_.dim / cfg_.heads;
    const float scal = 1.0f / std::sqrt(float(dh));
    const float drop = train ? cfg_.dropout : 0.0f;
    uint64_t dseed = derive_seed(dropout_seed, "bbdrop");

    TensorPtr causal_bias;
    if (causal) {
        causal_bias = make_tensor({T, T});
        for (int r = 0; r < T; ++r)
            for (int c = 0; c < T; ++c)
                causal_bias->data[size_t(r) * T + c] = c <= r ? 0.0f : -1e9f;
    }

    for (const Layer& ly : layers) {
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
            if (causal) scores = add(g, scores, causal_bias);
            heads_out.push_back(matmul(g, softmax(g, scores, 1), vh));
        }
        auto attn_out = add_bias(g, matmul(g, concat_cols(g, heads_out), ly.wo), ly.bo);
        h = add(g, h, dropout(g, attn_out, drop, dseed = mix64(dseed)));
        auto x2 = layer_norm(g, h, ly.ln2_gamma, ly.ln2_beta);
        auto ff = add_bias(g, matmul(g, gelu(g, add_bias(g, matmul(g, x2, ly.w1), ly.b1)), ly.w2),
                           ly.b2);
        h = add(g, h, dropout(g, ff, drop, dseed = mix64(dseed)));
    }
    return layer_norm(g, h, final_gamma, final_beta);
}

TensorPtr Backbone::sasrec_forward(Graph& g, const TensorPtr& table,
                                   const std::vector<int>& items, bool train,
                                   uint64_t dropout_seed) const {
    check(cfg_.kind == BackboneKind::SASRec, "sasrec_forward: wrong backbone kind");
    check(!items.empty(), "sasrec_forward: empty sequence");
    check(int(items.size()) <= cfg_.max_items, "sasrec_forward: sequence exceeds max_items");
    const int T = int(items.size());
    std::vector<int> pos(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) pos[size_t(t)] = t;
    auto h = add(g, gather_rows(g, table, items), gather_rows(g, pos_emb, pos));
    return run(g, h, /*causal=*/true, train, dropout_seed);
}

TensorPtr Backbone::bert4rec_hidden(Graph& g, const TensorPtr& table,
                                    const std::vector<int>& items,
                                    const std::vector<int>& masked_positions, bool train,
                                    uint64_t dropout_seed) const {
    check(cfg_.kind == BackboneKind::BERT4Rec, "bert4rec_hidden: wrong backbone kind");
    check(!items.empty(), "bert4rec_hidden: empty sequence");
    check(!masked_positions.empty(), "bert4rec_hidden: at least one masked position required");
    check(int(items.size()) <= cfg_.max_items, "bert4rec_hidden: sequence exceeds max_items");
    const int T = int(items.size());
    const int n_items = table->shape[0];
    // mask embedding appended as a virtual row past the catalog
    auto full = concat_rows(g, {table, mask_emb});
    std::vector<int> ids = items;
    for (int p : masked_positions) {
        check(p >= 0 && p < T, "bert4rec_hidden: masked position out of range");
        ids[size_t(p)] = n_items;
    }
    std::vector<int> pos(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) pos[size_t(t)] = t;
    auto h = add(g, gather_rows(g, full, ids), gather_rows(g, pos_emb, pos));
    return run(g, h, /*causal=*/false, train, dropout_seed);
}

TensorPtr Backbone::bert4rec_forward(Graph& g, const TensorPtr& table,
                                     const std::vector<int>& items,
                                     const std::vector<int>& masked_positions, bool train,
                                     uint64_t dropout_seed) const {
    auto h = bert4rec_hidden(g, table, items, masked_positions, train, dropout_seed);
    auto picked = gather_rows(g, h, masked_positions);
    return matmul(g, picked, transpose(g, table));
}

std::vector<std::pair<std::string, TensorPtr>> Backbone::named_params() const {
    std::vector<std::pair<std::string, TensorPtr>> out = {
        {"pos_emb", pos_emb},
        {"mask_emb", mask_emb},
        {"final_gamma", final_gamma},
        {"final_beta", final_beta},
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

std::vector<TensorPtr> Backbone::params() const {
    std::vector<TensorPtr> out;
    for (auto& np : named_params()) out.push_back(np.second);
    return out;
}

Checkpoint Backbone::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.kind = "backbone";
    ckpt.set_meta("backbone", backbone_name(cfg_.kind));
    ckpt.set_meta("layers", std::to_string(cfg_.layers));
    ckpt.set_meta("heads", std::to_string(cfg_.heads));
    ckpt.set_meta("dim", std::to_string(cfg_.dim));
    ckpt.set_meta("ffn_dim", std::to_string(cfg_.ffn_dim));
    ckpt.set_meta("max_items", std::to_string(cfg_.max_items));
    ckpt.set_meta("dropout", std::to_string(cfg_.dropout));
    for (auto& np : named_params()) ckpt.add(np.first, np.second);
    return ckpt;
}

Backbone Backbone::from_checkpoint(const Checkpoint& ckpt) {
    check(ckpt.kind == "backbone", "backbone: wrong checkpoint kind: " + ckpt.kind);
    BackboneConfig cfg;
    cfg.kind = backbone_from_name(ckpt.get_meta("backbone"));
    cfg.layers = std::stoi(ckpt.get_meta("layers"));
    cfg.heads = std::stoi(ckpt.get_meta("heads"));
    cfg.dim = std::stoi(ckpt.get_meta("dim"));
    cfg.ffn_dim = std::stoi(ckpt.get_meta("ffn_dim"));
    cfg.max_items = std::stoi(ckpt.get_meta("max_items"));
    cfg.dropout = std::stof(ckpt.get_meta("dropout"));
    Backbone bb(cfg, 0);
    for (auto& np : bb.named_params()) {
        auto src = ckpt.find(np.first);
        check(src->shape == np.second->shape, "backbone: shape mismatch for " + np.first);
        np.second->data = src->data;
    }
    return bb;
}

std::vector<int> truncate_recent(const std::vector<int>& items, int max_items) {
    if (int(items.size()) <= max_items) return items;
    return {items.end() - max_items, items.end()};
}

std::vector<float> score_candidates(const std::vector<float>& user_vec,
                                    const EmbeddingTable& table,
                                    const std::vector<int>& candidates) {
    check(!candidates.empty(), "score_candidates: empty candidate list");
    check(int(user_vec.size()) == table.dim(), "score_candidates: dimension mismatch");
    const int d = table.dim();
    std::vector<float> scores;
    scores.reserve(candidates.size());
    for (int c : candidates) {
        check(c >= 0 && c < table.items(), "score_candidates: candidate id out of range");
        const float* row = table.matrix->data.data() + size_t(c) * d;
        float s = 0.0f;
        for (int i = 0; i < d; ++i) s += user_vec[size_t(i)] * row[i];
        scores.push_back(s);
    }
    return scores;
}

TensorPtr sasrec_next_item_loss(Graph& g, const Backbone& backbone, const TensorPtr& table,
                                const std::vector<int>& sequence, bool train,
                                uint64_t dropout_seed) {
    check(sequence.size() >= 2, "sasrec_next_item_loss: sequence needs at least two items");
    std::vector<int> input(sequence.begin(), sequence.end() - 1);
    std::vector<int> targets(sequence.begin() + 1, sequence.end());
    auto h = backbone.sasrec_forward(g, table, input, train, dropout_seed);
    auto logits = matmul(g, h, transpose(g, table));
    return cross_entropy_logits(g, logits, targets);
}

TensorPtr bert4rec_masked_loss(Graph& g, const Backbone& backbone, const TensorPtr& table,
                               const std::vector<int>& corrupted,
                               const std::vector<int>& masked_positions,
                               const std::vector<int>& labels, bool train,
                               uint64_t dropout_seed) {
    check(masked_positions.size() == labels.size(),
          "bert4rec_masked_loss: positions/labels mismatch");
    auto logits =
        backbone.bert4rec_forward(g, table, corrupted, masked_positions, train, dropout_seed);
    return cross_entropy_logits(g, logits, labels);
}

}  // namespace rec
