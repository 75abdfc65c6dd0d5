#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "fedu/dataset.hpp"
#include "fedu/errors.hpp"
#include "fedu/partition.hpp"

using namespace fedu;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

// Per-client label entropy in nats, averaged over clients.
Scalar mean_label_entropy(const Dataset& data, const Partition& p) {
    Scalar total = 0;
    for (const auto& rows : p.client_indices) {
        std::vector<Index> counts(static_cast<std::size_t>(data.class_count), 0);
        for (Index r : rows) ++counts[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(r)])];
        Scalar entropy = 0;
        for (Index c : counts) {
            if (c == 0) continue;
            const Scalar pr = static_cast<Scalar>(c) / static_cast<Scalar>(rows.size());
            entropy -= pr * std::log(pr);
        }
        total += entropy;
    }
    return total / static_cast<Scalar>(p.client_indices.size());
}

// One CIFAR record: label byte then 3072 pixel bytes (channel-major).
std::vector<unsigned char> cifar_record(unsigned char label, unsigned char fill) {
    std::vector<unsigned char> record(3073, fill);
    record[0] = label;
    return record;
}

}  // namespace

TEST_CASE("make_blobs: sample count, labels, and grouping") {
    Rng rng(1);
    Dataset data = make_blobs(5, 8, 50, 3.0, rng);
    CHECK(data.size() == 250);
    CHECK(data.dim() == 8);
    CHECK(data.class_count == 5);
    // Rows grouped by class: class c occupies rows [c*50, (c+1)*50).
    for (Index i = 0; i < data.size(); ++i) {
        CHECK(data.labels[static_cast<std::size_t>(i)] == static_cast<int>(i / 50));
    }
    CHECK_NOTHROW(data.validate());
}

TEST_CASE("make_blobs: fixed seed replays bitwise") {
    Rng a(7), b(7);
    Dataset da = make_blobs(3, 5, 10, 2.0, a);
    Dataset db = make_blobs(3, 5, 10, 2.0, b);
    CHECK(da.features == db.features);
    CHECK(da.labels == db.labels);
}

TEST_CASE("make_blobs: separation controls cluster spread vs distance") {
    Rng rng(3);
    Dataset data = make_blobs(2, 16, 40, 8.0, rng);
    // With separation 8 in 16 dims, class means are far relative to unit noise:
    // the nearest-class-mean classifier should be nearly perfect.
    Vector mean0 = data.features.topRows(40).colwise().mean().transpose();
    Vector mean1 = data.features.bottomRows(40).colwise().mean().transpose();
    int correct = 0;
    for (Index i = 0; i < data.size(); ++i) {
        const Vector x = data.features.row(i).transpose();
        const int pred = (x - mean0).squaredNorm() <= (x - mean1).squaredNorm() ? 0 : 1;
        if (pred == data.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    CHECK(static_cast<Scalar>(correct) / static_cast<Scalar>(data.size()) >= 0.99);
}

TEST_CASE("partition_iid: K=1 owns everything") {
    Rng drng(4), prng(5);
    Dataset data = make_blobs(3, 4, 10, 3.0, drng);
    Partition p = partition_iid(data, 1, prng);
    REQUIRE(p.client_count() == 1);
    CHECK(p.client_indices[0].size() == 30);
    CHECK_NOTHROW(p.validate(data));
}

TEST_CASE("partition_iid: 10 classes x 100 samples over 5 clients gives 20 of each") {
    Rng drng(6), prng(7);
    Dataset data = make_blobs(10, 4, 100, 3.0, drng);
    Partition p = partition_iid(data, 5, prng);
    const auto counts = partition_class_counts(data, p);
    REQUIRE(counts.size() == 5);
    for (const auto& per_class : counts) {
        REQUIRE(per_class.size() == 10);
        for (Index c : per_class) CHECK(c == 20);
    }
    CHECK_NOTHROW(p.validate(data));
}

TEST_CASE("partition_iid: uneven division differs by at most one per class") {
    Rng drng(8), prng(9);
    Dataset data = make_blobs(2, 4, 11, 3.0, drng);  // 11 samples per class, 3 clients
    Partition p = partition_iid(data, 3, prng);
    const auto counts = partition_class_counts(data, p);
    for (int c = 0; c < 2; ++c) {
        Index lo = counts[0][static_cast<std::size_t>(c)], hi = lo;
        Index total = 0;
        for (const auto& per_class : counts) {
            lo = std::min(lo, per_class[static_cast<std::size_t>(c)]);
            hi = std::max(hi, per_class[static_cast<std::size_t>(c)]);
            total += per_class[static_cast<std::size_t>(c)];
        }
        CHECK(hi - lo <= 1);
        CHECK(total == 11);
    }
}

TEST_CASE("partition_iid: a class smaller than the client count is an error") {
    Rng drng(10), prng(11);
    Dataset data = make_blobs(2, 4, 3, 3.0, drng);
    CHECK_THROWS_AS(partition_iid(data, 4, prng), ConfigError);
}

TEST_CASE("partition_noniid: 10 classes over 5 clients -> disjoint pairs covering all") {
    Rng drng(12), prng(13);
    Dataset data = make_blobs(10, 4, 20, 3.0, drng);
    Partition p = partition_noniid(data, 5, prng);
    REQUIRE(p.client_count() == 5);
    std::set<int> seen;
    for (const auto& rows : p.client_indices) {
        std::set<int> classes;
        for (Index r : rows) classes.insert(data.labels[static_cast<std::size_t>(r)]);
        CHECK(classes.size() == 2);  // 10 / 5
        for (int c : classes) {
            CHECK(!seen.count(c));  // pairwise disjoint class sets
            seen.insert(c);
        }
        CHECK(rows.size() == 40);  // both classes in full
    }
    CHECK(seen.size() == 10);  // union covers every class
    CHECK_NOTHROW(p.validate(data));
}

TEST_CASE("partition_noniid: K=1 is the whole dataset") {
    Rng drng(14), prng(15);
    Dataset data = make_blobs(4, 4, 5, 3.0, drng);
    Partition p = partition_noniid(data, 1, prng);
    REQUIRE(p.client_count() == 1);
    CHECK(p.client_indices[0].size() == 20);
}

TEST_CASE("partition_noniid: class count not divisible by clients is an explicit error") {
    Rng drng(16), prng(17);
    Dataset data = make_blobs(10, 4, 5, 3.0, drng);
    CHECK_THROWS_WITH_AS(partition_noniid(data, 3, prng), doctest::Contains("divisible"),
                         ConfigError);
}

TEST_CASE("non-IID label entropy is strictly below IID on the same dataset") {
    Rng drng(18);
    Dataset data = make_blobs(10, 4, 30, 3.0, drng);
    Rng p1(19), p2(19);
    const Scalar iid = mean_label_entropy(data, partition_iid(data, 5, p1));
    const Scalar noniid = mean_label_entropy(data, partition_noniid(data, 5, p2));
    CHECK(noniid < iid);
}

TEST_CASE("partitions are deterministic given the stream") {
    Rng drng(20);
    Dataset data = make_blobs(4, 4, 10, 3.0, drng);
    Rng a(21), b(21);
    CHECK(partition_noniid(data, 2, a).client_indices ==
          partition_noniid(data, 2, b).client_indices);
}

TEST_CASE("gather_rows collects client samples in partition order") {
    Rng drng(22);
    Dataset data = make_blobs(2, 3, 4, 3.0, drng);
    std::vector<Index> rows = {5, 0, 2};
    Matrix gathered = gather_rows(data, rows);
    REQUIRE(gathered.rows() == 3);
    CHECK(gathered.row(0) == data.features.row(5));
    CHECK(gathered.row(1) == data.features.row(0));
    CHECK(gathered.row(2) == data.features.row(2));
}

TEST_CASE("cifar: hand-built two-record file decodes to exact floats") {
    const std::string path = temp_path("fedu_test_cifar.bin");
    std::vector<unsigned char> bytes = cifar_record(3, 0);
    // Record 0: label 3, first pixel 255, second 128, rest 0.
    bytes[1] = 255;
    bytes[2] = 128;
    // Record 1: label 9, all pixels 51.
    const auto second = cifar_record(9, 51);
    bytes.insert(bytes.end(), second.begin(), second.end());
    write_bytes(path, bytes);

    Dataset data = load_cifar10(path);
    REQUIRE(data.size() == 2);
    CHECK(data.dim() == 3072);
    CHECK(data.class_count == 10);
    CHECK(data.labels == std::vector<int>{3, 9});
    CHECK(data.features(0, 0) == 1.0);  // 255/255
    CHECK(data.features(0, 1) == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
    CHECK(data.features(0, 2) == 0.0);
    CHECK(data.features(1, 0) == doctest::Approx(51.0 / 255.0).epsilon(1e-15));
    CHECK(data.features(1, 3071) == doctest::Approx(51.0 / 255.0).epsilon(1e-15));
    std::remove(path.c_str());
}

TEST_CASE("cifar: empty file loads as a size-0 dataset") {
    const std::string path = temp_path("fedu_test_cifar_empty.bin");
    write_bytes(path, {});
    Dataset data = load_cifar10(path);
    CHECK(data.size() == 0);
    std::remove(path.c_str());
}

TEST_CASE("cifar: truncated record reports the offset of the incomplete record") {
    const std::string path = temp_path("fedu_test_cifar_trunc.bin");
    std::vector<unsigned char> bytes = cifar_record(1, 7);
    const auto partial = cifar_record(2, 9);
    bytes.insert(bytes.end(), partial.begin(), partial.begin() + 100);
    write_bytes(path, bytes);
    try {
        load_cifar10(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.byte_offset() == 3073);
    }
    std::remove(path.c_str());
}

TEST_CASE("cifar: out-of-range label reports the record offset") {
    const std::string path = temp_path("fedu_test_cifar_label.bin");
    std::vector<unsigned char> bytes = cifar_record(0, 1);
    const auto bad = cifar_record(10, 1);
    bytes.insert(bytes.end(), bad.begin(), bad.end());
    write_bytes(path, bytes);
    try {
        load_cifar10(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.byte_offset() == 3073);
    }
    std::remove(path.c_str());
}

TEST_CASE("cifar: downsampling average-pools and preserves the per-image mean") {
    const std::string path = temp_path("fedu_test_cifar_down.bin");
    std::vector<unsigned char> bytes = cifar_record(2, 0);
    Rng rng(23);
    for (std::size_t i = 1; i < bytes.size(); ++i) {
        bytes[i] = static_cast<unsigned char>(rng.uniform_index(256));
    }
    write_bytes(path, bytes);

    Dataset full = load_cifar10(path, 1);
    Dataset down = load_cifar10(path, 4);
    CHECK(down.dim() == 3 * 8 * 8);
    CHECK(std::abs(full.features.row(0).mean() - down.features.row(0).mean()) < 1e-12);

    CHECK_THROWS_AS(load_cifar10(path, 5), ConfigError);  // 5 does not divide 32
    std::remove(path.c_str());
}

TEST_CASE("cifar: unopenable file is a config error naming the path") {
    CHECK_THROWS_WITH_AS(load_cifar10(temp_path("fedu_no_such_file.bin")),
                         doctest::Contains("fedu_no_such_file.bin"), ConfigError);
}

TEST_CASE("filter_classes keeps and remaps the requested labels in order") {
    Rng drng(24);
    Dataset data = make_blobs(4, 3, 5, 3.0, drng);
    Dataset filtered = filter_classes(data, {3, 1});
    CHECK(filtered.size() == 10);
    CHECK(filtered.class_count == 2);
    // Rows keep dataset order (class 1 block precedes class 3); labels are
    // remapped by position in the keep list: 3 -> 0, 1 -> 1.
    for (std::size_t i = 0; i < 5; ++i) CHECK(filtered.labels[i] == 1);
    for (std::size_t i = 5; i < 10; ++i) CHECK(filtered.labels[i] == 0);

    CHECK_THROWS_AS(filter_classes(data, {0, 0}), ConfigError);
    CHECK_THROWS_AS(filter_classes(data, {4}), ConfigError);
}

TEST_CASE("split_tail_per_class holds out the last k of every class") {
    Rng drng(25);
    Dataset data = make_blobs(3, 3, 10, 3.0, drng);
    auto [train, test] = split_tail_per_class(data, 2);
    CHECK(train.size() == 24);
    CHECK(test.size() == 6);
    for (int label : test.labels) {
        CHECK(std::count(test.labels.begin(), test.labels.end(), label) == 2);
    }
    // Holding out an entire class is rejected.
    CHECK_THROWS_AS(split_tail_per_class(data, 10), ConfigError);
}

TEST_CASE("stratified_split draws floor(fraction * n_c) per class") {
    Rng drng(26);
    Dataset data = make_blobs(4, 3, 10, 3.0, drng);
    Rng rng(27);
    auto [labeled, rest] = stratified_split(data, 0.25, rng);
    CHECK(labeled.size() == 8);  // floor(0.25 * 10) per class minimum 2 each
    CHECK(rest.size() == 32);
    std::set<Index> all(labeled.begin(), labeled.end());
    all.insert(rest.begin(), rest.end());
    CHECK(all.size() == 40);  // disjoint and covering

    Rng rng2(28);
    CHECK_THROWS_AS(stratified_split(data, 0.01, rng2), ConfigError);  // floor -> 0 per class
}

TEST_CASE("dataset CSV export round-trips features and labels") {
    Rng drng(29);
    Dataset data = make_blobs(2, 3, 4, 3.0, drng);
    const std::string path = temp_path("fedu_test_export.csv");
    export_dataset_csv(data, path);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "f_0,f_1,f_2,label");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 8);
    std::remove(path.c_str());
}
