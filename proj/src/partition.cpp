#include "fedu/partition.hpp"

#include <algorithm>

#include "fedu/errors.hpp"

namespace fedu {

void Partition::validate(const Dataset& data) const {
    if (client_indices.empty()) throw ContractError("partition: no clients");
    std::vector<char> seen(static_cast<std::size_t>(data.size()), 0);
    for (std::size_t k = 0; k < client_indices.size(); ++k) {
        if (client_indices[k].empty()) {
            throw ContractError("partition: client " + std::to_string(k) + " has no samples");
        }
        for (Index i : client_indices[k]) {
            if (i < 0 || i >= data.size()) {
                throw ContractError("partition: client " + std::to_string(k) +
                                    " references row " + std::to_string(i) + " out of range");
            }
            if (seen[static_cast<std::size_t>(i)]) {
                throw ContractError("partition: row " + std::to_string(i) +
                                    " assigned to more than one client");
            }
            seen[static_cast<std::size_t>(i)] = 1;
        }
    }
}

Partition partition_iid(const Dataset& data, int clients, Rng& rng) {
    data.validate();
    if (clients < 1) throw ConfigError("partition: clients must be >= 1");
    std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(data.class_count));
    for (Index i = 0; i < data.size(); ++i) {
        by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);
    }
    Partition p;
    p.client_indices.resize(static_cast<std::size_t>(clients));
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        if (static_cast<int>(rows.size()) < clients) {
            throw ConfigError("partition: class " + std::to_string(c) + " has " +
                              std::to_string(rows.size()) + " samples, fewer than " +
                              std::to_string(clients) + " clients");
        }
        rng.shuffle(rows);
        const std::size_t base = rows.size() / static_cast<std::size_t>(clients);
        const std::size_t rem = rows.size() % static_cast<std::size_t>(clients);
        std::size_t pos = 0;
        for (std::size_t k = 0; k < static_cast<std::size_t>(clients); ++k) {
            const std::size_t take = base + (k < rem ? 1 : 0);
            for (std::size_t i = 0; i < take; ++i) p.client_indices[k].push_back(rows[pos++]);
        }
    }
    for (auto& rows : p.client_indices) std::sort(rows.begin(), rows.end());
    p.validate(data);
    return p;
}

Partition partition_noniid(const Dataset& data, int clients, Rng& rng) {
    data.validate();
    if (clients < 1) throw ConfigError("partition: clients must be >= 1");
    if (data.class_count % clients != 0) {
        throw ConfigError("partition: class count " + std::to_string(data.class_count) +
                          " is not divisible by " + std::to_string(clients) +
                          " clients; disjoint class groups need class_count % clients == 0");
    }
    std::vector<int> class_order(static_cast<std::size_t>(data.class_count));
    for (int c = 0; c < data.class_count; ++c) class_order[static_cast<std::size_t>(c)] = c;
    rng.shuffle(class_order);
    const int per_client = data.class_count / clients;
    std::vector<int> owner(static_cast<std::size_t>(data.class_count));
    for (int g = 0; g < data.class_count; ++g) {
        owner[static_cast<std::size_t>(class_order[static_cast<std::size_t>(g)])] = g / per_client;
    }
    Partition p;
    p.client_indices.resize(static_cast<std::size_t>(clients));
    for (Index i = 0; i < data.size(); ++i) {
        const int k = owner[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])];
        p.client_indices[static_cast<std::size_t>(k)].push_back(i);
    }
    for (std::size_t k = 0; k < p.client_indices.size(); ++k) {
        if (p.client_indices[k].empty()) {
            throw ConfigError("partition: client " + std::to_string(k) +
                              " received classes with no samples");
        }
    }
    p.validate(data);
    return p;
}

std::vector<std::vector<Index>> partition_class_counts(const Dataset& data, const Partition& p) {
    std::vector<std::vector<Index>> counts(
        p.client_indices.size(), std::vector<Index>(static_cast<std::size_t>(data.class_count), 0));
    for (std::size_t k = 0; k < p.client_indices.size(); ++k) {
        for (Index i : p.client_indices[k]) {
            ++counts[k][static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])];
        }
    }
    return counts;
}

Matrix gather_rows(const Dataset& data, const std::vector<Index>& indices) {
    Matrix out(static_cast<Index>(indices.size()), data.dim());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.row(static_cast<Index>(i)) = data.features.row(indices[i]);
    }
    return out;
}

}  // namespace fedu
