#include "rec/probe.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace rec {

std::vector<float> AttentionTrace::row(int l, int h) const {
    const size_t base = (size_t(l) * heads + h) * tokens;
    return {rows.begin() + base, rows.begin() + base + tokens};
}

std::string AttentionTrace::to_table() const {
    std::ostringstream out;
    out << "# " << descriptor << "\n";
    out << "layer\thead\ttoken\titem_pos\ttoken_type\tweight\n";
    for (int l = 0; l < layers; ++l)
        for (int h = 0; h < heads; ++h)
            for (int t = 0; t < tokens; ++t)
                out << l << "\t" << h << "\t" << t << "\t" << item_pos[size_t(t)] << "\t"
                    << token_type[size_t(t)] << "\t" << std::setprecision(8) << at(l, h, t)
                    << "\n";
    return out.str();
}

AttentionTrace capture(const Encoder& encoder, const std::vector<int>& prefix,
                       const ItemCatalog& catalog, const Tokenizer& tok) {
    check(!prefix.empty(), "capture: empty history prefix");
    auto input = flatten_history(prefix, catalog, tok, encoder.config().max_tokens);
    Graph g(/*recording=*/false);
    AttentionCapture cap;
    encoder.encode(g, input, /*train=*/false, 0, &cap);

    AttentionTrace trace;
    trace.layers = cap.layers;
    trace.heads = cap.heads;
    trace.tokens = cap.tokens;
    trace.rows = cap.rows;
    trace.item_pos = input.item_pos;
    trace.token_type = input.token_type;
    std::ostringstream desc;
    desc << "history of " << prefix.size() << " items, " << input.size() << " tokens";
    trace.descriptor = desc.str();
    return trace;
}

std::string SimilarityMatrix::to_table() const {
    std::ostringstream out;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) out << (j ? "\t" : "") << std::setprecision(8) << at(i, j);
        out << "\n";
    }
    return out.str();
}

static double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += double(a[i]) * b[i];
        na += double(a[i]) * a[i];
        nb += double(b[i]) * b[i];
    }
    check(na > 0.0 && nb > 0.0, "similarity: zero-norm attention row");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// base-2 Jensen-Shannon divergence of two distributions, in [0, 1]
static double js_divergence(const std::vector<float>& p, const std::vector<float>& q) {
    double d = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (double(p[i]) + q[i]);
        if (p[i] > 0) d += 0.5 * p[i] * std::log2(p[i] / m);
        if (q[i] > 0) d += 0.5 * q[i] * std::log2(q[i] / m);
    }
    return d;
}

SimilarityMatrix similarity(const AttentionTrace& trace, RowMetric metric) {
    check(trace.layers > 0 && trace.heads > 0 && trace.tokens > 0, "similarity: empty trace");
    const int n = trace.n_rows();
    std::vector<std::vector<float>> rows;
    rows.reserve(size_t(n));
    for (int l = 0; l < trace.layers; ++l)
        for (int h = 0; h < trace.heads; ++h) rows.push_back(trace.row(l, h));

    SimilarityMatrix m;
    m.n = n;
    m.values.assign(size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double s = metric == RowMetric::Cosine
                           ? cosine(rows[size_t(i)], rows[size_t(j)])
                           : 1.0 - js_divergence(rows[size_t(i)], rows[size_t(j)]);
            m.values[size_t(i) * n + j] = s;
            m.values[size_t(j) * n + i] = s;
        }
    return m;
}

std::pair<double, double> stratification_score(const SimilarityMatrix& matrix,
                                               const std::vector<std::vector<int>>& blocks) {
    std::vector<int> block_of(size_t(matrix.n), -1);
    for (size_t b = 0; b < blocks.size(); ++b) {
        check(!blocks[b].empty(), "stratification: empty block");
        for (int idx : blocks[b]) {
            check(idx >= 0 && idx < matrix.n, "stratification: index out of range");
            check(block_of[size_t(idx)] == -1, "stratification: index in two blocks");
            block_of[size_t(idx)] = int(b);
        }
    }
    for (int i = 0; i < matrix.n; ++i)
        check(block_of[size_t(i)] != -1, "stratification: partition does not cover index " +
                                             std::to_string(i));

    double within = 0.0, between = 0.0;
    size_t n_within = 0, n_between = 0;
    for (int i = 0; i < matrix.n; ++i)
        for (int j = i + 1; j < matrix.n; ++j) {
            if (block_of[size_t(i)] == block_of[size_t(j)]) {
                within += matrix.at(i, j);
                ++n_within;
            } else {
                between += matrix.at(i, j);
                ++n_between;
            }
        }
    check(n_within > 0, "stratification: no within-block pairs");
    check(n_between > 0, "stratification: no between-block pairs");
    return {within / double(n_within), between / double(n_between)};
}

std::vector<std::vector<int>> layer_blocks(int layers, int heads, int n_blocks) {
    check(n_blocks >= 1 && layers % n_blocks == 0,
          "layer_blocks: layer count not divisible into blocks");
    const int per = layers / n_blocks;
    std::vector<std::vector<int>> blocks;
    for (int b = 0; b < n_blocks; ++b) {
        std::vector<int> block;
        for (int l = b * per; l < (b + 1) * per; ++l)
            for (int h = 0; h < heads; ++h) block.push_back(l * heads + h);
        blocks.push_back(std::move(block));
    }
    return blocks;
}

std::vector<TunedLayers> default_layer_sets(int layers) {
    check(layers >= 3 && layers % 3 == 0, "default_layer_sets: layer count must be a multiple of 3");
    const int third = layers / 3;
    std::vector<TunedLayers> sets;
    sets.push_back(TunedLayers::none());
    sets.push_back(TunedLayers::all());
    for (int offset = 0; offset < third; ++offset)  // one layer per equal third
        sets.push_back(TunedLayers::subset({offset, offset + third, offset + 2 * third}));
    for (int i = 1; i <= 3; ++i) sets.push_back(TunedLayers::subset({i * third - 1}));
    return sets;
}

MetricsReport encoder_metrics(const Encoder& encoder, const EmbeddingTable& table,
                              const std::vector<EvalInstance>& instances,
                              const ItemCatalog& catalog, const Tokenizer& tok,
                              const EvalProtocol& protocol, int history_items) {
    auto scorer = [&](const EvalInstance& inst, const std::vector<int>& cands) {
        auto uvec = encode_history_vec(encoder, inst.prefix, catalog, tok, history_items);
        return score_candidates(uvec, table, cands);
    };
    return evaluate(scorer, instances, protocol, size_t(table.items()));
}

std::string SweepReport::to_text() const {
    std::ostringstream out;
    out << "tuned_layers";
    if (!rows.empty())
        for (size_t i = 0; i < rows[0].metrics.ks.size(); ++i)
            out << "\thr@" << rows[0].metrics.ks[i] << "\tndcg@" << rows[0].metrics.ks[i];
    out << "\tbest_epoch\tstop\n";
    for (const auto& row : rows) {
        out << row.set_name;
        for (size_t i = 0; i < row.metrics.ks.size(); ++i)
            out << "\t" << std::fixed << std::setprecision(6) << row.metrics.hr[i] << "\t"
                << row.metrics.ndcg[i];
        out << "\t" << row.report.best_epoch << "\t" << row.report.stop_reason << "\n";
    }
    return out.str();
}

SweepReport layer_sweep(const Checkpoint& base_encoder, const EmbeddingTable& table,
                        const SplitDataset& split, const ItemCatalog& catalog,
                        const Tokenizer& tok, const std::vector<TunedLayers>& sets,
                        const StageConfig& cfg, const EvalProtocol& protocol) {
    check(!sets.empty(), "layer_sweep: no layer sets");
    SweepReport report;
    for (const auto& set : sets) {
        Encoder enc = Encoder::from_checkpoint(base_encoder);  // isolated cell state
        EmbeddingTable tbl;
        tbl.matrix = make_tensor(table.matrix->shape, table.matrix->data);
        tbl.provenance = table.provenance;
        tbl.source_hash = table.source_hash;
        StageConfig cell = cfg;
        cell.tuned_layers = set;
        SweepRow row;
        row.set_name = set.to_string();
        row.report = stage_ft2(enc, tbl, split, catalog, tok, cell);
        row.metrics =
            encoder_metrics(enc, tbl, split.test, catalog, tok, protocol, cfg.history_items);
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace rec
