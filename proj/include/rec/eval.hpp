#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rec/corpus.hpp"

namespace rec {

enum class ProtocolKind { Sampled, Full };

struct EvalProtocol {
    ProtocolKind kind = ProtocolKind::Sampled;
    int n_negatives = 100;                 // sampled only
    std::vector<int> ks = {5, 10};         // {5, 10, 50} under full-ranking
    bool exclude_history = false;          // full-ranking toggle, default off
};

struct MetricsReport {
    std::vector<int> ks;
    std::vector<double> hr;    // fractions in [0,1], aligned with ks
    std::vector<double> ndcg;
    size_t instances = 0;
    std::string protocol;
    std::string checkpoint_hash;

    double hr_at(int k) const;
    double ndcg_at(int k) const;
    std::string to_record() const;  // machine-readable one-liner per metric
};

// pessimistic tie rule: rank = 1 + #(score > s+) + #(score == s+ among negatives)
int rank_of_positive(const std::vector<float>& scores, size_t positive_index);

double hr_at_k(const std::vector<int>& ranks, int k);
double ndcg_at_k(const std::vector<int>& ranks, int k);

// scorer maps (instance, candidate ids) -> scores, candidate-aligned
using Scorer =
    std::function<std::vector<float>(const EvalInstance&, const std::vector<int>&)>;

MetricsReport evaluate(const Scorer& scorer, const std::vector<EvalInstance>& instances,
                       const EvalProtocol& protocol, size_t catalog_size);

}  // namespace rec
