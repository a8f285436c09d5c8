#pragma once

#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rec/checkpoint.hpp"
#include "rec/common.hpp"

namespace rec {

// item id -> ordered textual attribute (key, value) pairs; ids are dense [0, size)
struct ItemCatalog {
    std::vector<std::vector<std::pair<std::string, std::string>>> items;
    size_t size() const { return items.size(); }
};

struct Interaction {
    int user;
    int item;
    int64_t timestamp;
};

struct InteractionLog {
    std::vector<Interaction> records;
    int num_users = 0;
};

// per-user chronologically ordered item-id sequences
struct SequenceDataset {
    std::vector<int> user_ids;             // original dense user id per sequence
    std::vector<std::vector<int>> sequences;
    size_t num_users() const { return sequences.size(); }
};

struct EvalInstance {
    int user;
    std::vector<int> prefix;
    int positive;
    std::vector<int> negatives;  // empty under full-ranking
};

// leave-one-out split: train = all but the last two items, validation target
// is the second-to-last item, test target the last
struct SplitDataset {
    std::vector<int> user_ids;
    std::vector<std::vector<int>> train;
    std::vector<EvalInstance> valid;
    std::vector<EvalInstance> test;
    int skipped_short = 0;  // users with sequences shorter than 3
};

std::pair<ItemCatalog, InteractionLog> ingest(const std::string& interactions_path,
                                              const std::string& catalog_path);

SequenceDataset filter_and_build(const InteractionLog& log, int min_user_interactions,
                                 int min_item_interactions);

SplitDataset leave_one_out(const SequenceDataset& dataset);

std::unordered_set<int> trained_item_set(const SplitDataset& split);

std::vector<EvalInstance> exclude_cold_eval(const std::vector<EvalInstance>& instances,
                                            const std::unordered_set<int>& trained);

// n distinct uniform negatives from [0, catalog_size) excluding the positive;
// deterministic under (instance.user, seed)
EvalInstance sample_negatives(const EvalInstance& instance, size_t catalog_size, int n,
                              uint64_t seed);

void freeze_negatives(std::vector<EvalInstance>& instances, size_t catalog_size, int n,
                      uint64_t seed);

struct SynthParams {
    int k_clusters = 8;
    int items_per_cluster = 50;
    int users = 2000;
    int seq_len_min = 8;
    int seq_len_max = 24;
    double intra_cluster_prob = 0.8;
    int vocab_per_cluster = 24;
};

// Item text = shared tokens + an item-unique token + cluster-vocabulary tokens;
// cluster vocabularies are drawn from a common pool, so text only partially
// identifies the behavioral cluster. User sequences follow a cluster-level
// Markov chain staying in-cluster with probability intra_cluster_prob.
std::pair<ItemCatalog, InteractionLog> generate_synthetic(const SynthParams& params,
                                                          uint64_t seed);

SequenceDataset subsample_users(const SequenceDataset& dataset, double fraction, uint64_t seed);

void write_catalog(const ItemCatalog& catalog, const std::string& path);
void write_interactions(const InteractionLog& log, const std::string& path);

Checkpoint dataset_snapshot(const SequenceDataset& dataset);
SequenceDataset dataset_from_snapshot(const Checkpoint& ckpt);

}  // namespace rec
