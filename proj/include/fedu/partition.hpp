#pragma once

#include "fedu/dataset.hpp"

namespace fedu {

// Disjoint assignment of dataset rows to clients; every client non-empty.
struct Partition {
    std::vector<std::vector<Index>> client_indices;

    int client_count() const { return static_cast<int>(client_indices.size()); }

    void validate(const Dataset& data) const;
};

// Per class: shuffle, then deal out as evenly as possible (per-class counts
// across clients differ by at most one). Requires every class to have at
// least `clients` samples.
Partition partition_iid(const Dataset& data, int clients, Rng& rng);

// Shuffle the class list, split it into `clients` disjoint groups of equal
// size (class_count must be divisible by clients), and give each client all
// samples of its group.
Partition partition_noniid(const Dataset& data, int clients, Rng& rng);

// counts[k][c] = number of samples of class c held by client k.
std::vector<std::vector<Index>> partition_class_counts(const Dataset& data, const Partition& p);

// Client rows gathered into a matrix, in partition order.
Matrix gather_rows(const Dataset& data, const std::vector<Index>& indices);

}  // namespace fedu
