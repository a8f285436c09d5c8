#include "rec/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace rec {

static std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::pair<ItemCatalog, InteractionLog> ingest(const std::string& interactions_path,
                                              const std::string& catalog_path) {
    ItemCatalog catalog;
    std::unordered_map<std::string, int> item_map;
    {
        std::ifstream in(catalog_path);
        check(bool(in), "ingest: cannot open catalog file: " + catalog_path);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto f = split_tabs(line);
            check(f.size() >= 3 && f.size() % 2 == 1,
                  "ingest: malformed catalog line " + std::to_string(lineno) + " in " +
                      catalog_path);
            check(!item_map.count(f[0]),
                  "ingest: duplicate item id at catalog line " + std::to_string(lineno));
            item_map[f[0]] = int(catalog.items.size());
            std::vector<std::pair<std::string, std::string>> attrs;
            for (size_t i = 1; i + 1 < f.size(); i += 2) attrs.emplace_back(f[i], f[i + 1]);
            catalog.items.push_back(std::move(attrs));
        }
        check(!catalog.items.empty(), "ingest: empty catalog: " + catalog_path);
    }

    InteractionLog log;
    std::unordered_map<std::string, int> user_map;
    std::vector<std::string> user_names;
    {
        std::ifstream in(interactions_path);
        check(bool(in), "ingest: cannot open interactions file: " + interactions_path);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto f = split_tabs(line);
            check(f.size() == 3, "ingest: malformed interaction line " + std::to_string(lineno) +
                                     " in " + interactions_path);
            auto it = item_map.find(f[1]);
            check(it != item_map.end(), "ingest: unknown item id '" + f[1] +
                                            "' at interaction line " + std::to_string(lineno));
            int64_t ts = 0;
            try {
                ts = std::stoll(f[2]);
            } catch (...) {
                fail("ingest: bad timestamp at interaction line " + std::to_string(lineno));
            }
            auto [uit, inserted] = user_map.try_emplace(f[0], int(user_names.size()));
            if (inserted) user_names.push_back(f[0]);
            log.records.push_back({uit->second, it->second, ts});
        }
    }
    log.num_users = int(user_names.size());

    // id maps persisted alongside the inputs (two-column: external id, dense id)
    {
        std::ofstream out(catalog_path + ".idmap");
        std::vector<std::pair<std::string, int>> rows(item_map.begin(), item_map.end());
        std::sort(rows.begin(), rows.end(),
                  [](const auto& a, const auto& b) { return a.second < b.second; });
        for (const auto& r : rows) out << r.first << "\t" << r.second << "\n";
    }
    {
        std::ofstream out(interactions_path + ".idmap");
        for (size_t i = 0; i < user_names.size(); ++i) out << user_names[i] << "\t" << i << "\n";
    }
    return {std::move(catalog), std::move(log)};
}

SequenceDataset filter_and_build(const InteractionLog& log, int min_user_interactions,
                                 int min_item_interactions) {
    check(min_user_interactions >= 0 && min_item_interactions >= 0,
          "filter_and_build: thresholds must be nonnegative");
    std::vector<char> keep(log.records.size(), 1);
    // iterate to a fixed point: dropping an item can push a user below
    // threshold and vice versa
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<int, int> user_count, item_count;
        for (size_t i = 0; i < log.records.size(); ++i)
            if (keep[i]) {
                ++user_count[log.records[i].user];
                ++item_count[log.records[i].item];
            }
        for (size_t i = 0; i < log.records.size(); ++i) {
            if (!keep[i]) continue;
            if (user_count[log.records[i].user] < min_user_interactions ||
                item_count[log.records[i].item] < min_item_interactions) {
                keep[i] = 0;
                changed = true;
            }
        }
    }

    std::map<int, std::vector<std::pair<int64_t, int>>> per_user;  // ordered by user id
    for (size_t i = 0; i < log.records.size(); ++i)
        if (keep[i]) per_user[log.records[i].user].emplace_back(log.records[i].timestamp,
                                                                log.records[i].item);
    check(!per_user.empty(), "filter_and_build: empty dataset after filtering");

    SequenceDataset ds;
    for (auto& [user, recs] : per_user) {
        // ties broken by input (file) order
        std::stable_sort(recs.begin(), recs.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<int> seq;
        seq.reserve(recs.size());
        for (const auto& r : recs) seq.push_back(r.second);
        ds.user_ids.push_back(user);
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

SplitDataset leave_one_out(const SequenceDataset& dataset) {
    SplitDataset split;
    for (size_t u = 0; u < dataset.num_users(); ++u) {
        const auto& seq = dataset.sequences[u];
        if (seq.size() < 3) {
            ++split.skipped_short;
            continue;
        }
        const int user = dataset.user_ids[u];
        split.user_ids.push_back(user);
        split.train.emplace_back(seq.begin(), seq.end() - 2);
        EvalInstance valid{user, {seq.begin(), seq.end() - 2}, seq[seq.size() - 2], {}};
        EvalInstance test{user, {seq.begin(), seq.end() - 1}, seq.back(), {}};
        split.valid.push_back(std::move(valid));
        split.test.push_back(std::move(test));
    }
    return split;
}

std::unordered_set<int> trained_item_set(const SplitDataset& split) {
    std::unordered_set<int> s;
    for (const auto& seq : split.train) s.insert(seq.begin(), seq.end());
    return s;
}

std::vector<EvalInstance> exclude_cold_eval(const std::vector<EvalInstance>& instances,
                                            const std::unordered_set<int>& trained) {
    std::vector<EvalInstance> kept;
    for (const auto& inst : instances) {
        if (!trained.count(inst.positive)) continue;
        bool ok = true;
        for (int it : inst.prefix)
            if (!trained.count(it)) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(inst);
    }
    return kept;
}

EvalInstance sample_negatives(const EvalInstance& instance, size_t catalog_size, int n,
                              uint64_t seed) {
    check(n >= 0 && size_t(n) <= catalog_size - 1,
          "sample_negatives: n exceeds catalog size minus one");
    EvalInstance out = instance;
    out.negatives.clear();
    if (size_t(n) == catalog_size - 1) {
        for (size_t i = 0; i < catalog_size; ++i)
            if (int(i) != instance.positive) out.negatives.push_back(int(i));
        return out;
    }
    Rng rng(derive_seed(seed, uint64_t(instance.user) + 0x6e656761ULL));
    std::unordered_set<int> chosen;
    while (int(chosen.size()) < n) {
        int cand = int(rng.below(catalog_size));
        if (cand == instance.positive || chosen.count(cand)) continue;
        chosen.insert(cand);
        out.negatives.push_back(cand);
    }
    return out;
}

void freeze_negatives(std::vector<EvalInstance>& instances, size_t catalog_size, int n,
                      uint64_t seed) {
    for (auto& inst : instances) inst = sample_negatives(inst, catalog_size, n, seed);
}

std::pair<ItemCatalog, InteractionLog> generate_synthetic(const SynthParams& p, uint64_t seed) {
    check(p.intra_cluster_prob >= 0.0 && p.intra_cluster_prob <= 1.0,
          "generate_synthetic: intra_cluster_prob must be in [0,1]");
    check(p.k_clusters >= 1 && p.items_per_cluster >= 1 && p.users >= 1,
          "generate_synthetic: counts must be positive");
    check(p.seq_len_min >= 1 && p.seq_len_max >= p.seq_len_min,
          "generate_synthetic: bad sequence length range");
    Rng rng(derive_seed(seed, "synth"));

    // Cluster vocabularies drawn from a shared pool roughly half the total
    // size, so clusters overlap textually and text only partially reveals the
    // behavioral cluster.
    const int pool_size = std::max(p.vocab_per_cluster, p.vocab_per_cluster * p.k_clusters / 2);
    std::vector<std::vector<int>> cluster_vocab(p.k_clusters);
    for (int c = 0; c < p.k_clusters; ++c) {
        std::unordered_set<int> v;
        while (int(v.size()) < p.vocab_per_cluster) v.insert(int(rng.below(pool_size)));
        cluster_vocab[c].assign(v.begin(), v.end());
        std::sort(cluster_vocab[c].begin(), cluster_vocab[c].end());
    }

    ItemCatalog catalog;
    const int n_items = p.k_clusters * p.items_per_cluster;
    for (int i = 0; i < n_items; ++i) {
        const int c = i / p.items_per_cluster;
        std::ostringstream title, tags;
        title << "product u" << i;
        for (int t = 0; t < 3; ++t)
            title << " w" << cluster_vocab[c][rng.below(cluster_vocab[c].size())];
        for (int t = 0; t < 3; ++t)
            tags << (t ? " " : "") << "w" << cluster_vocab[c][rng.below(cluster_vocab[c].size())];
        catalog.items.push_back({{"title", title.str()}, {"tags", tags.str()}});
    }

    InteractionLog log;
    log.num_users = p.users;
    for (int u = 0; u < p.users; ++u) {
        const int len = p.seq_len_min + int(rng.below(uint64_t(p.seq_len_max - p.seq_len_min + 1)));
        int c = int(rng.below(uint64_t(p.k_clusters)));
        for (int t = 0; t < len; ++t) {
            if (t > 0 && rng.uniform() >= p.intra_cluster_prob && p.k_clusters > 1) {
                int next = int(rng.below(uint64_t(p.k_clusters - 1)));
                c = next >= c ? next + 1 : next;
            }
            const int item = c * p.items_per_cluster + int(rng.below(uint64_t(p.items_per_cluster)));
            log.records.push_back({u, item, int64_t(t)});
        }
    }
    return {std::move(catalog), std::move(log)};
}

SequenceDataset subsample_users(const SequenceDataset& dataset, double fraction, uint64_t seed) {
    check(fraction > 0.0 && fraction <= 1.0, "subsample_users: fraction must be in (0,1]");
    const size_t total = dataset.num_users();
    const size_t kept = size_t(fraction * double(total));
    check(kept >= 1, "subsample_users: fraction keeps zero users");
    if (kept == total) return dataset;
    Rng rng(derive_seed(seed, "subsample"));
    auto perm = rng.permutation(total);
    std::vector<size_t> idx(perm.begin(), perm.begin() + long(kept));
    std::sort(idx.begin(), idx.end());
    SequenceDataset out;
    for (size_t i : idx) {
        out.user_ids.push_back(dataset.user_ids[i]);
        out.sequences.push_back(dataset.sequences[i]);
    }
    return out;
}

void write_catalog(const ItemCatalog& catalog, const std::string& path) {
    std::ofstream out(path);
    check(bool(out), "write_catalog: cannot open " + path);
    for (size_t i = 0; i < catalog.items.size(); ++i) {
        out << i;
        for (const auto& kv : catalog.items[i]) out << "\t" << kv.first << "\t" << kv.second;
        out << "\n";
    }
}

void write_interactions(const InteractionLog& log, const std::string& path) {
    std::ofstream out(path);
    check(bool(out), "write_interactions: cannot open " + path);
    for (const auto& r : log.records)
        out << r.user << "\t" << r.item << "\t" << r.timestamp << "\n";
}

Checkpoint dataset_snapshot(const SequenceDataset& dataset) {
    Checkpoint ckpt;
    ckpt.kind = "dataset";
    auto users = make_tensor({int(dataset.num_users())});
    auto lengths = make_tensor({int(dataset.num_users())});
    size_t total = 0;
    for (const auto& s : dataset.sequences) total += s.size();
    auto items = make_tensor({int(total)});
    size_t k = 0;
    for (size_t u = 0; u < dataset.num_users(); ++u) {
        users->data[u] = float(dataset.user_ids[u]);
        lengths->data[u] = float(dataset.sequences[u].size());
        for (int it : dataset.sequences[u]) items->data[k++] = float(it);
    }
    ckpt.add("user_ids", users);
    ckpt.add("lengths", lengths);
    ckpt.add("items", items);
    return ckpt;
}

SequenceDataset dataset_from_snapshot(const Checkpoint& ckpt) {
    check(ckpt.kind == "dataset", "dataset_from_snapshot: wrong checkpoint kind");
    auto users = ckpt.find("user_ids");
    auto lengths = ckpt.find("lengths");
    auto items = ckpt.find("items");
    SequenceDataset ds;
    size_t k = 0;
    for (size_t u = 0; u < users->data.size(); ++u) {
        ds.user_ids.push_back(int(users->data[u]));
        std::vector<int> seq(static_cast<size_t>(lengths->data[u]));
        for (auto& it : seq) it = int(items->data[k++]);
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

}  // namespace rec
