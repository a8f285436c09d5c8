#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "rec/eval.hpp"

using namespace rec;

namespace {

// sort-based oracle: pessimistic rank = position after sorting descending,
// counting every tie against the positive
int oracle_rank(const std::vector<float>& scores, size_t pos) {
    int rank = 1;
    for (size_t i = 0; i < scores.size(); ++i)
        if (i != pos && scores[i] >= scores[pos]) ++rank;
    return rank;
}

}  // namespace

TEST_CASE("rank_of_positive matches the sort-based oracle on random vectors") {
    Rng rng(606);
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t n = 2 + rng.below(30);
        std::vector<float> scores(n);
        for (auto& s : scores) s = float(int(rng.below(10))) * 0.5f;  // coarse grid forces ties
        const size_t pos = rng.below(n);
        CHECK(rank_of_positive(scores, pos) == oracle_rank(scores, pos));
    }
}

TEST_CASE("pessimistic tie handling and NaN rejection") {
    CHECK(rank_of_positive({1.0f, 1.0f, 0.5f}, 0) == 2);  // tie counts against us
    CHECK(rank_of_positive({2.0f, 1.0f, 0.5f}, 0) == 1);
    CHECK(rank_of_positive({0.1f, 0.9f, 0.5f}, 0) == 3);
    CHECK_THROWS_AS(rank_of_positive({std::nanf(""), 1.0f}, 1), RecError);
    CHECK_THROWS_AS(rank_of_positive({1.0f}, 3), RecError);
}

TEST_CASE("worked metric values") {
    std::vector<int> ranks = {1, 3, 12};
    CHECK(hr_at_k(ranks, 10) == doctest::Approx(2.0 / 3.0));
    CHECK(ndcg_at_k(ranks, 10) == doctest::Approx(0.5));
    CHECK(ndcg_at_k({3}, 5) == doctest::Approx(0.5));
    CHECK(hr_at_k({1}, 1) == doctest::Approx(1.0));
    CHECK(ndcg_at_k({1}, 10) == doctest::Approx(1.0));
    CHECK(ndcg_at_k({2}, 10) == doctest::Approx(1.0 / std::log2(3.0)));
    CHECK(hr_at_k({11}, 10) == doctest::Approx(0.0));
    CHECK_THROWS_AS(hr_at_k({}, 10), RecError);
    CHECK_THROWS_AS(ndcg_at_k({0}, 10), RecError);
}

TEST_CASE("metrics match a brute-force oracle over random score vectors") {
    Rng rng(707);
    std::vector<int> ranks, oranks;
    std::vector<EvalInstance> instances;
    std::vector<std::vector<float>> tables;
    for (int i = 0; i < 1000; ++i) {
        std::vector<float> scores(101);
        for (auto& s : scores) s = rng.normal();
        ranks.push_back(rank_of_positive(scores, 0));
        oranks.push_back(oracle_rank(scores, 0));
    }
    CHECK(ranks == oranks);
    for (int k : {5, 10}) {
        double hr = 0, ndcg = 0;
        for (int r : oranks) {
            if (r <= k) {
                hr += 1;
                ndcg += 1.0 / std::log2(r + 1.0);
            }
        }
        CHECK(hr_at_k(ranks, k) == doctest::Approx(hr / 1000.0));
        CHECK(ndcg_at_k(ranks, k) == doctest::Approx(ndcg / 1000.0));
    }
}

TEST_CASE("evaluate: sampled protocol with frozen negatives") {
    // scorer prefers small item ids; positive=3, negatives {0,1,9}
    std::vector<EvalInstance> inst = {{0, {5}, 3, {0, 1, 9}}};
    EvalProtocol p;
    p.kind = ProtocolKind::Sampled;
    p.ks = {1, 2, 3};
    auto scorer = [](const EvalInstance&, const std::vector<int>& cands) {
        std::vector<float> s;
        for (int c : cands) s.push_back(-float(c));
        return s;
    };
    auto rep = evaluate(scorer, inst, p, 10);
    // order: 0 > 1 > 3 > 9, positive rank 3
    CHECK(rep.hr_at(2) == doctest::Approx(0.0));
    CHECK(rep.hr_at(3) == doctest::Approx(1.0));
    CHECK(rep.ndcg_at(3) == doctest::Approx(0.5));
    CHECK(rep.instances == 1);

    std::vector<EvalInstance> missing = {{0, {5}, 3, {}}};
    CHECK_THROWS_AS(evaluate(scorer, missing, p, 10), RecError);
}

TEST_CASE("full-ranking equals sampled with all-but-positive negatives") {
    Rng rng(808);
    std::vector<float> table(40);
    for (auto& v : table) v = rng.normal();
    auto scorer = [&](const EvalInstance& inst, const std::vector<int>& cands) {
        std::vector<float> s;
        for (int c : cands) s.push_back(table[size_t(c)] * float(1 + inst.user % 3));
        return s;
    };
    std::vector<EvalInstance> sampled, full;
    for (int u = 0; u < 25; ++u) {
        EvalInstance inst{u, {1, 2}, int(rng.below(40)), {}};
        full.push_back(inst);
        sampled.push_back(sample_negatives(inst, 40, 39, 1));
    }
    EvalProtocol ps;
    ps.kind = ProtocolKind::Sampled;
    ps.ks = {5, 10};
    EvalProtocol pf;
    pf.kind = ProtocolKind::Full;
    pf.ks = {5, 10};
    auto rs = evaluate(scorer, sampled, ps, 40);
    auto rf = evaluate(scorer, full, pf, 40);
    CHECK(rs.hr == rf.hr);
    CHECK(rs.ndcg == rf.ndcg);
}

TEST_CASE("full-ranking history exclusion removes prefix items from candidates") {
    // positive 3; history item 0 would otherwise outrank it
    std::vector<float> table = {10.0f, 1.0f, 0.5f, 5.0f, 0.1f};
    auto scorer = [&](const EvalInstance&, const std::vector<int>& cands) {
        std::vector<float> s;
        for (int c : cands) s.push_back(table[size_t(c)]);
        return s;
    };
    std::vector<EvalInstance> inst = {{0, {0}, 3, {}}};
    EvalProtocol p;
    p.kind = ProtocolKind::Full;
    p.ks = {1};
    auto keep = evaluate(scorer, inst, p, 5);
    CHECK(keep.hr_at(1) == doctest::Approx(0.0));  // item 0 still competes
    p.exclude_history = true;
    auto excl = evaluate(scorer, inst, p, 5);
    CHECK(excl.hr_at(1) == doctest::Approx(1.0));
}

TEST_CASE("random scorer lands near the analytic HR under the sampled protocol") {
    // uniform random scores over 101 candidates: P(rank <= 10) = 10/101
    Rng rng(909);
    std::vector<EvalInstance> inst;
    for (int u = 0; u < 3000; ++u) {
        EvalInstance e{u, {0}, int(rng.below(200)), {}};
        inst.push_back(sample_negatives(e, 200, 100, 17));
    }
    Rng score_rng(910);
    auto scorer = [&](const EvalInstance&, const std::vector<int>& cands) {
        std::vector<float> s;
        for (size_t i = 0; i < cands.size(); ++i) s.push_back(score_rng.normal());
        return s;
    };
    EvalProtocol p;
    p.kind = ProtocolKind::Sampled;
    p.ks = {10};
    auto rep = evaluate(scorer, inst, p, 200);
    const double expect = 10.0 / 101.0;
    const double sigma = std::sqrt(expect * (1 - expect) / 3000.0);
    CHECK(std::fabs(rep.hr_at(10) - expect) < 4 * sigma);
}

TEST_CASE("metrics report record format and lookups") {
    MetricsReport r;
    r.ks = {5, 10};
    r.hr = {0.25, 0.5};
    r.ndcg = {0.2, 0.3};
    r.instances = 4;
    r.protocol = "sampled-100";
    r.checkpoint_hash = "beef";
    auto text = r.to_record();
    CHECK(text.find("hr@5 0.25") != std::string::npos);
    CHECK(text.find("checkpoint beef") != std::string::npos);
    CHECK_THROWS_AS(r.hr_at(50), RecError);
}
