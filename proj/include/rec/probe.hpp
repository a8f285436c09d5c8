#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rec/pipeline.hpp"
#include "rec/textenc.hpp"

namespace rec {

// per-layer, per-head CLS-query attention rows with token annotations
struct AttentionTrace {
    int layers = 0;
    int heads = 0;
    int tokens = 0;
    std::vector<float> rows;      // [layers][heads][tokens]
    std::vector<int> item_pos;    // per token; 0 = CLS slot
    std::vector<int> token_type;  // per token; 0 = CLS/PAD, 1 = key, 2 = value
    std::string descriptor;

    float at(int l, int h, int t) const { return rows[(size_t(l) * heads + h) * tokens + t]; }
    std::vector<float> row(int l, int h) const;
    int n_rows() const { return layers * heads; }

    // one record per (layer, head, token): plot-ready tabular text
    std::string to_table() const;
};

AttentionTrace capture(const Encoder& encoder, const std::vector<int>& prefix,
                       const ItemCatalog& catalog, const Tokenizer& tok);

struct SimilarityMatrix {
    int n = 0;
    std::vector<double> values;  // [n][n]

    double at(int i, int j) const { return values[size_t(i) * n + j]; }
    std::string to_table() const;
};

// Cosine over raw attention rows is the primary redundancy metric.
// JensenShannon reports 1 - JSD_base2(p, q), also symmetric with unit diagonal.
enum class RowMetric { Cosine, JensenShannon };

SimilarityMatrix similarity(const AttentionTrace& trace, RowMetric metric = RowMetric::Cosine);

// blocks partition the flat (layer*heads + head) indices; returns
// (within-block mean, between-block mean) over off-diagonal pairs
std::pair<double, double> stratification_score(const SimilarityMatrix& matrix,
                                               const std::vector<std::vector<int>>& blocks);

// contiguous equal blocks of layers, each spanning every head
std::vector<std::vector<int>> layer_blocks(int layers, int heads, int n_blocks);

// NONE, ALL, one set per equal third at each offset, then the last layer of
// each third as singletons; reproduces {3,7,11} etc. at L=12
std::vector<TunedLayers> default_layer_sets(int layers);

struct SweepRow {
    std::string set_name;
    MetricsReport metrics;
    TrainReport report;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::string to_text() const;
};

// encoder+table scorer evaluated over the test instances
MetricsReport encoder_metrics(const Encoder& encoder, const EmbeddingTable& table,
                              const std::vector<EvalInstance>& instances,
                              const ItemCatalog& catalog, const Tokenizer& tok,
                              const EvalProtocol& protocol, int history_items);

// one stage_ft2 run per layer set, each starting from the same base
// checkpoint and item table
SweepReport layer_sweep(const Checkpoint& base_encoder, const EmbeddingTable& table,
                        const SplitDataset& split, const ItemCatalog& catalog,
                        const Tokenizer& tok, const std::vector<TunedLayers>& sets,
                        const StageConfig& cfg, const EvalProtocol& protocol);

}  // namespace rec
