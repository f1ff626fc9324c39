#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gnnstrat/dataset.hpp"
#include "support.hpp"

using namespace gnnstrat;
namespace fs = std::filesystem;

namespace {

class DatasetDir : public ::testing::Test {
   protected:
    fs::path dir;

    void SetUp() override {
        dir = fs::temp_directory_path() / ("gnnstrat_ds_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                           "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir);
        save_dataset(small(), dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    static Dataset small() {
        Dataset ds;
        ds.name = "tiny";
        const std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}};
        ds.graph = CsrGraph::from_undirected_edges(5, edges);
        ds.features = Matrix::from_rows({{1, 0, 0.5}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {0.25, 0, 0}});
        ds.labels = {0, 1, 1, 0, 1};
        ds.num_classes = 2;
        ds.split = {{0, 1}, {2}, {3, 4}};
        return ds;
    }

    void append(const std::string& file, std::string_view bytes) {
        std::ofstream f(dir / file, std::ios::binary | std::ios::app);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }

    void overwrite(const std::string& file, const std::string& text) {
        std::ofstream f(dir / file, std::ios::binary | std::ios::trunc);
        f << text;
    }

    std::string load_error() {
        try {
            load_dataset(dir);
        } catch (const LoadError& e) {
            return e.what();
        }
        return "";
    }
};

}  // namespace

TEST_F(DatasetDir, RoundTrips) {
    const auto ds = load_dataset(dir);
    const auto ref = small();
    EXPECT_EQ(ds.name, ref.name);
    EXPECT_EQ(ds.graph.edge_list(), ref.graph.edge_list());
    EXPECT_EQ(ds.features, ref.features);
    EXPECT_EQ(ds.labels, ref.labels);
    EXPECT_EQ(ds.split.train, ref.split.train);
    EXPECT_EQ(ds.split.test, ref.split.test);
}

TEST_F(DatasetDir, TruncatedFeaturesAreASizeMismatch) {
    const auto p = dir / "features.f32le";
    fs::resize_file(p, fs::file_size(p) - 4);
    EXPECT_NE(load_error().find("size mismatch"), std::string::npos);
}

TEST_F(DatasetDir, TrailingBytesAreASizeMismatch) {
    append("labels.u32le", std::string(4, '\0'));
    EXPECT_NE(load_error().find("size mismatch"), std::string::npos);
}

TEST_F(DatasetDir, DuplicateEdgeIsRejected) {
    // Replace the last edge (0, 4) with a copy of the first (0, 1).
    std::ifstream in(dir / "edges.u32le", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    bytes.replace(bytes.size() - 8, 8, bytes.substr(0, 8));
    overwrite("edges.u32le", bytes);
    EXPECT_NE(load_error().find("duplicate"), std::string::npos);
}

TEST_F(DatasetDir, OverlappingSplitsAreRejected) {
    overwrite("split.json", R"({"train": [0, 1], "val": [1], "test": [3]})");
    EXPECT_NE(load_error().find("overlapping splits: node 1"), std::string::npos);
}

TEST_F(DatasetDir, MetaCountsMustMatch) {
    overwrite("meta.json", R"({"name": "tiny", "num_nodes": 5, "num_features": 3, "num_classes": 2, "num_undirected_edges": 6})");
    EXPECT_FALSE(load_error().empty());
}

TEST_F(DatasetDir, LabelOutOfRangeIsRejected) {
    overwrite("meta.json", R"({"name": "tiny", "num_nodes": 5, "num_features": 3, "num_classes": 1, "num_undirected_edges": 5})");
    EXPECT_NE(load_error().find("label"), std::string::npos);
}

TEST(DatasetFixture, CoraCounts) {
    const auto ds = load_dataset(GNNSTRAT_CORA_DIR);
    EXPECT_EQ(ds.num_nodes(), 2708u);
    EXPECT_EQ(ds.graph.num_undirected_edges(), 5278u);
    EXPECT_EQ(ds.num_features(), 1433u);
    EXPECT_EQ(ds.num_classes, 7u);
    EXPECT_EQ(ds.split.train.size(), 140u);
    EXPECT_EQ(ds.split.val.size(), 500u);
    EXPECT_EQ(ds.split.test.size(), 1000u);
    EXPECT_NO_THROW(validate(ds));
}
