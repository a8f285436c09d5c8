#include "rec/eval.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace rec {

double MetricsReport::hr_at(int k) const {
    for (size_t i = 0; i < ks.size(); ++i)
        if (ks[i] == k) return hr[i];
    fail("metrics: no HR@" + std::to_string(k));
}

double MetricsReport::ndcg_at(int k) const {
    for (size_t i = 0; i < ks.size(); ++i)
        if (ks[i] == k) return ndcg[i];
    fail("metrics: no NDCG@" + std::to_string(k));
}

std::string MetricsReport::to_record() const {
    std::ostringstream out;
    out.precision(10);
    out << "protocol " << protocol << "\n";
    out << "instances " << instances << "\n";
    out << "checkpoint " << (checkpoint_hash.empty() ? "-" : checkpoint_hash) << "\n";
    for (size_t i = 0; i < ks.size(); ++i) {
        out << "hr@" << ks[i] << " " << hr[i] << "\n";
        out << "ndcg@" << ks[i] << " " << ndcg[i] << "\n";
    }
    return out.str();
}

int rank_of_positive(const std::vector<float>& scores, size_t positive_index) {
    check(positive_index < scores.size(), "rank_of_positive: index out of range");
    const float pos = scores[positive_index];
    check(!std::isnan(pos), "rank_of_positive: NaN score");
    int rank = 1;
    for (size_t i = 0; i < scores.size(); ++i) {
        check(!std::isnan(scores[i]), "rank_of_positive: NaN score");
        if (i == positive_index) continue;
        if (scores[i] > pos || scores[i] == pos) ++rank;  // pessimistic on ties
    }
    return rank;
}

double hr_at_k(const std::vector<int>& ranks, int k) {
    check(!ranks.empty(), "hr_at_k: empty rank list");
    size_t hits = 0;
    for (int r : ranks) {
        check(r >= 1, "hr_at_k: ranks are 1-based");
        if (r <= k) ++hits;
    }
    return double(hits) / double(ranks.size());
}

double ndcg_at_k(const std::vector<int>& ranks, int k) {
    check(!ranks.empty(), "ndcg_at_k: empty rank list");
    double sum = 0.0;
    for (int r : ranks) {
        check(r >= 1, "ndcg_at_k: ranks are 1-based");
        if (r <= k) sum += 1.0 / std::log2(double(r) + 1.0);  // single relevant item: IDCG = 1
    }
    return sum / double(ranks.size());
}

MetricsReport evaluate(const Scorer& scorer, const std::vector<EvalInstance>& instances,
                       const EvalProtocol& protocol, size_t catalog_size) {
    check(!instances.empty(), "evaluate: empty instance set");
    std::vector<int> ranks;
    ranks.reserve(instances.size());
    for (const auto& inst : instances) {
        std::vector<int> candidates;
        size_t positive_index = 0;
        if (protocol.kind == ProtocolKind::Sampled) {
            check(!inst.negatives.empty(), "evaluate: sampled protocol needs frozen negatives");
            candidates.push_back(inst.positive);
            candidates.insert(candidates.end(), inst.negatives.begin(), inst.negatives.end());
            positive_index = 0;
        } else {
            std::unordered_set<int> skip;
            if (protocol.exclude_history)
                skip.insert(inst.prefix.begin(), inst.prefix.end());
            skip.erase(inst.positive);
            candidates.reserve(catalog_size);
            for (size_t i = 0; i < catalog_size; ++i)
                if (!skip.count(int(i))) {
                    if (int(i) == inst.positive) positive_index = candidates.size();
                    candidates.push_back(int(i));
                }
        }
        auto scores = scorer(inst, candidates);
        check(scores.size() == candidates.size(), "evaluate: scorer output size mismatch");
        ranks.push_back(rank_of_positive(scores, positive_index));
    }

    MetricsReport report;
    report.ks = protocol.ks;
    report.instances = instances.size();
    report.protocol = protocol.kind == ProtocolKind::Sampled
                          ? "sampled-" + std::to_string(protocol.n_negatives)
                          : "full";
    for (int k : protocol.ks) {
        report.hr.push_back(hr_at_k(ranks, k));
        report.ndcg.push_back(ndcg_at_k(ranks, k));
    }
    return report;
}

}  // namespace rec
