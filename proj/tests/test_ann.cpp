#include "seqrec/ann.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "doctest.h"
#include "seqrec/vecmath.hpp"
#include "test_util.hpp"

using namespace seqrec;

namespace {

EmbeddingTable random_table(std::size_t n_items, std::size_t dim, std::uint64_t seed) {
    std::vector<std::string> items;
    std::vector<float> data(n_items * dim);
    Rng rng(seed);
    for (std::size_t i = 0; i < n_items; ++i) {
        items.push_back("i" + std::to_string(i));
        for (std::size_t j = 0; j < dim; ++j) data[i * dim + j] = static_cast<float>(rng.gaussian());
    }
    return EmbeddingTable(std::move(items), dim, std::move(data));
}

std::string file_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

double recall_at(const QueryResult& approx, const QueryResult& exact) {
    std::set<ItemIndex> truth;
    for (const auto& scored : exact) truth.insert(scored.item);
    std::size_t hits = 0;
    for (const auto& scored : approx) hits += truth.count(scored.item);
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double mean_recall(const RpForest& forest, const EmbeddingTable& table, std::size_t queries,
                   std::size_t top_n, std::size_t budget, std::uint64_t seed) {
    Rng rng(seed);
    double total = 0.0;
    for (std::size_t q = 0; q < queries; ++q) {
        const auto query_vec = testutil::random_vector(rng, table.dim());
        total += recall_at(forest.query(query_vec, top_n, budget), exact_query(table, query_vec, top_n));
    }
    return total / static_cast<double>(queries);
}

}  // namespace

TEST_CASE("build: catalogs at or below leaf_size make single-leaf trees") {
    const EmbeddingTable table = random_table(20, 8, 1);
    const RpForest forest = RpForest::build(table, 4, 32, 7);
    for (const auto& tree : forest.trees()) {
        REQUIRE(tree.nodes.size() == 1);
        CHECK(tree.nodes[0].left == -1);
        CHECK(tree.leaf_items.size() == 20);
    }
}

TEST_CASE("build: fixed seed gives a bit-identical serialized forest") {
    const EmbeddingTable table = random_table(300, 16, 2);
    const auto dir = std::filesystem::temp_directory_path();
    const auto path_a = dir / "seqrec_test_forest_a.bin";
    const auto path_b = dir / "seqrec_test_forest_b.bin";
    RpForest::build(table, 8, 16, 123).save(path_a);
    RpForest::build(table, 8, 16, 123).save(path_b);
    CHECK(file_bytes(path_a) == file_bytes(path_b));
    // different seed, different forest
    const auto path_c = dir / "seqrec_test_forest_c.bin";
    RpForest::build(table, 8, 16, 124).save(path_c);
    CHECK(file_bytes(path_a) != file_bytes(path_c));
    for (const auto& p : {path_a, path_b, path_c}) std::filesystem::remove(p);
}

TEST_CASE("build: every item lands in exactly one leaf per tree (coverage audit)") {
    const EmbeddingTable table = random_table(1000, 32, 3);
    const RpForest forest = RpForest::build(table, 16, 32, 9);
    for (const auto& tree : forest.trees()) {
        std::vector<int> seen(1000, 0);
        for (const ItemIndex item : tree.leaf_items) ++seen[item];
        std::size_t leaf_total = 0;
        for (const auto& node : tree.nodes) {
            if (node.left < 0) {
                leaf_total += node.items_end - node.items_begin;
                CHECK(node.items_end - node.items_begin <= 32);
            }
        }
        CHECK(leaf_total == 1000);
        for (const int count : seen) CHECK(count == 1);
    }
}

TEST_CASE("build: duplicate-heavy catalogs still terminate") {
    std::vector<std::string> items;
    std::vector<float> data;
    for (int i = 0; i < 200; ++i) {
        items.push_back("i" + std::to_string(i));
        data.push_back(1.0f);  // identical rows
        data.push_back(0.0f);
    }
    const EmbeddingTable table(std::move(items), 2, std::move(data));
    const RpForest forest = RpForest::build(table, 4, 16, 5);
    for (const auto& tree : forest.trees()) {
        CHECK(tree.leaf_items.size() == 200);
    }
}

TEST_CASE("query: an indexed vector retrieves itself first") {
    const EmbeddingTable table = random_table(500, 16, 4);
    const RpForest forest = RpForest::build(table, 8, 16, 11);
    for (const ItemIndex probe : {ItemIndex{0}, ItemIndex{123}, ItemIndex{499}}) {
        const auto q = to_double(table.row(probe));
        const QueryResult result = forest.query(q, 5);
        REQUIRE(!result.empty());
        CHECK(result[0].item == probe);
        CHECK(result[0].similarity == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("query: unlimited budget equals the exact scan") {
    Rng rng(5);
    const EmbeddingTable table = random_table(400, 12, 6);
    const RpForest forest = RpForest::build(table, 6, 16, 13);
    for (int trial = 0; trial < 20; ++trial) {
        const auto q = testutil::random_vector(rng, 12);
        const QueryResult approx = forest.query(q, 10, 400);
        const QueryResult exact = exact_query(table, q, 10);
        REQUIRE(approx.size() == exact.size());
        for (std::size_t i = 0; i < approx.size(); ++i) {
            CHECK(approx[i].item == exact[i].item);
            CHECK(approx[i].similarity == exact[i].similarity);
        }
    }
}

TEST_CASE("query: zero vector rejected, top_n validated") {
    const EmbeddingTable table = random_table(50, 8, 7);
    const RpForest forest = RpForest::build(table, 4, 8, 17);
    const std::vector<double> zero(8, 0.0);
    CHECK_THROWS_AS(forest.query(zero, 5), SeqrecError);
    CHECK_THROWS_AS(exact_query(table, zero, 5), SeqrecError);
    const std::vector<double> q(8, 0.5);
    CHECK_THROWS_AS(forest.query(q, 0), SeqrecError);
}

TEST_CASE("query: recall at default budget on 2000 random 32-d points") {
    const EmbeddingTable table = random_table(2000, 32, 8);
    const RpForest forest = RpForest::build(table, 16, 32, 19);
    const double recall = mean_recall(forest, table, 100, 10, 0, 77);
    CHECK(recall >= 0.9);
}

TEST_CASE("query: recall non-decreasing in search budget and tree count") {
    const EmbeddingTable table = random_table(800, 16, 9);
    const RpForest few_trees = RpForest::build(table, 2, 16, 23);
    const RpForest more_trees = RpForest::build(table, 8, 16, 23);

    const double budget_small = mean_recall(few_trees, table, 100, 10, 40, 31);
    const double budget_large = mean_recall(few_trees, table, 100, 10, 400, 31);
    CHECK(budget_large >= budget_small);

    const double trees_small = mean_recall(few_trees, table, 100, 10, 160, 37);
    const double trees_large = mean_recall(more_trees, table, 100, 10, 160, 37);
    CHECK(trees_large >= trees_small);
}

TEST_CASE("exact_query: two-item ordering follows the similarity sign") {
    std::vector<std::string> items = {"a", "b"};
    std::vector<float> data = {1.0f, 0.0f, -1.0f, 0.0f};
    const EmbeddingTable table(std::move(items), 2, std::move(data));
    const std::vector<double> q = {1.0, 0.0};
    const QueryResult result = exact_query(table, q, 2);
    CHECK(result[0].item == 0);
    CHECK(result[1].item == 1);
    CHECK(result[0].similarity > result[1].similarity);
}

TEST_CASE("exact_query: duplicate vectors tie-break by lower index") {
    std::vector<std::string> items = {"a", "b", "c"};
    std::vector<float> data = {0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f};
    const EmbeddingTable table(std::move(items), 2, std::move(data));
    const std::vector<double> q = {1.0, 1.0};
    const QueryResult result = exact_query(table, q, 3);
    CHECK(result[0].item == 0);
    CHECK(result[1].item == 1);
    CHECK(result[2].item == 2);
}

TEST_CASE("serialization: round-trip preserves query results bit-exactly") {
    const EmbeddingTable table = random_table(600, 16, 10);
    const RpForest forest = RpForest::build(table, 8, 16, 29);
    const auto path = std::filesystem::temp_directory_path() / "seqrec_test_forest_rt.bin";
    forest.save(path);
    const RpForest loaded = RpForest::load(path);

    Rng rng(41);
    for (int trial = 0; trial < 25; ++trial) {
        const auto q = testutil::random_vector(rng, 16);
        const QueryResult a = forest.query(q, 10);
        const QueryResult b = loaded.query(q, 10);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].item == b[i].item);
            CHECK(a[i].similarity == b[i].similarity);
        }
    }
    std::filesystem::remove(path);
}
