#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "amosl/dataset.hpp"
#include "amosl/errors.hpp"
#include "amosl/matrix.hpp"

using namespace amosl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "amosl_dataset_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

// Two graphs: a 2-node single edge (label 1) and a 3-node path (label -1).
fs::path write_fixture(const std::string& dir_name) {
    const fs::path dir = fresh_dir(dir_name);
    write_file(dir / "FIX_graph_indicator.txt", "1\n1\n2\n2\n2\n");
    write_file(dir / "FIX_graph_labels.txt", "1\n-1\n");
    write_file(dir / "FIX_A.txt", "1, 2\n3, 4\n4, 5\n");
    write_file(dir / "FIX_node_labels.txt", "0\n1\n0\n1\n0\n");
    return dir;
}

}  // namespace

TEST_CASE("fixture parses to the expected counts") {
    const fs::path dir = write_fixture("parse_ok");
    const RawDataset raw = parse_tudataset(dir.string(), "FIX");
    CHECK(raw.graph_count == 2);
    CHECK(raw.node_count() == 5);
    CHECK(raw.edges.size() == 3);
    CHECK(raw.class_count() == 2);
    CHECK(raw.mean_vertices() == doctest::Approx(2.5));
    CHECK(raw.graph_nodes[0] == std::vector<std::size_t>{0, 1});
    CHECK(raw.graph_nodes[1] == std::vector<std::size_t>{2, 3, 4});
}

TEST_CASE("files are also found in a nested <name>/ directory") {
    const fs::path dir = fresh_dir("parse_nested");
    fs::create_directories(dir / "FIX");
    write_file(dir / "FIX" / "FIX_graph_indicator.txt", "1\n1\n");
    write_file(dir / "FIX" / "FIX_graph_labels.txt", "1\n");
    write_file(dir / "FIX" / "FIX_A.txt", "1, 2\n");
    write_file(dir / "FIX" / "FIX_node_labels.txt", "0\n0\n");
    CHECK(parse_tudataset(dir.string(), "FIX").graph_count == 1);
}

TEST_CASE("missing mandatory file is reported by name") {
    const fs::path dir = fresh_dir("parse_missing");
    CHECK_THROWS_WITH_AS(parse_tudataset(dir.string(), "FIX"),
                         doctest::Contains("FIX_graph_indicator.txt"), DataError);
}

TEST_CASE("malformed numeric token is reported with file and line") {
    const fs::path dir = write_fixture("parse_badnum");
    write_file(dir / "FIX_A.txt", "1, 2\n3, x\n");
    try {
        parse_tudataset(dir.string(), "FIX");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("FIX_A.txt") != std::string::npos);
        CHECK(msg.find(":2:") != std::string::npos);
    }
}

TEST_CASE("edges crossing graph boundaries are rejected") {
    const fs::path dir = write_fixture("parse_cross");
    write_file(dir / "FIX_A.txt", "1, 2\n2, 3\n");
    CHECK_THROWS_WITH_AS(parse_tudataset(dir.string(), "FIX"),
                         doctest::Contains("crosses graph boundaries"), DataError);
}

TEST_CASE("one-hot features over the dataset-wide label alphabet") {
    const fs::path dir = write_fixture("features");
    const RawDataset raw = parse_tudataset(dir.string(), "FIX");
    const std::vector<Matrix> x = build_features(raw);
    REQUIRE(x.size() == 2);
    CHECK(x[0] == Matrix::from_rows({{1, 0}, {0, 1}}));
    CHECK(x[1] == Matrix::from_rows({{1, 0}, {0, 1}, {1, 0}}));
}

TEST_CASE("attributes append after the one-hot block") {
    const fs::path dir = write_fixture("features_attr");
    write_file(dir / "FIX_node_attributes.txt", "0.5\n1.5\n2.5\n3.5\n4.5\n");
    const std::vector<Matrix> x = build_features(parse_tudataset(dir.string(), "FIX"));
    CHECK(x[0] == Matrix::from_rows({{1, 0, 0.5}, {0, 1, 1.5}}));
}

TEST_CASE("a dataset without labels or attributes is unsupported") {
    const fs::path dir = write_fixture("features_none");
    fs::remove(dir / "FIX_node_labels.txt");
    CHECK_THROWS_WITH_AS(build_features(parse_tudataset(dir.string(), "FIX")),
                         doctest::Contains("neither node labels nor node attributes"), DataError);
}

TEST_CASE("identity-metric similarity evaluates to exp(-1)") {
    const Matrix x = Matrix::from_rows({{0}, {2}});
    const Matrix s = modality_from_metric(x, Matrix::identity(1));
    CHECK(s(0, 0) == 1.0);
    CHECK(s(1, 1) == 1.0);
    CHECK(s(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(s(0, 1) == s(1, 0));
    CHECK_THROWS_AS(modality_from_metric(x, Matrix(2, 1)), ShapeError);
}

TEST_CASE("identical rows synthesize the all-ones similarity") {
    const Matrix x = Matrix::from_rows({{1, 2}, {1, 2}, {1, 2}});
    const Matrix s = synthesize_modality(x, 5);
    CHECK(s == Matrix(3, 3, 1.0));
}

TEST_CASE("synthesized similarity is a deterministic positive symmetric matrix") {
    const Matrix x = Matrix::from_rows({{0.5, 1}, {2, -1}, {0, 0}, {1, 1}});
    const Matrix s = synthesize_modality(x, 42);
    CHECK(s == synthesize_modality(x, 42));
    CHECK_FALSE(s == synthesize_modality(x, 43));
    for (std::size_t i = 0; i < s.rows(); ++i) {
        CHECK(s(i, i) == 1.0);
        for (std::size_t j = 0; j < s.cols(); ++j) {
            CHECK(s(i, j) > 0.0);
            CHECK(s(i, j) == s(j, i));
        }
    }
}

TEST_CASE("prepared fixture maps labels by sorted raw value") {
    const fs::path dir = write_fixture("prepare");
    const PreparedDataset ds = prepare_dataset(parse_tudataset(dir.string(), "FIX"), 9);
    CHECK(ds.classes == 2);
    CHECK(ds.feature_dim == 2);
    REQUIRE(ds.graphs.size() == 2);
    CHECK(ds.graphs[0].label == 1);  // raw label 1 sorts after -1
    CHECK(ds.graphs[1].label == 0);
    CHECK(ds.labels() == std::vector<std::size_t>{1, 0});

    const GraphSample& path3 = ds.graphs[1];
    CHECK(path3.a == Matrix::from_rows({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}}));
    for (std::size_t i = 0; i < path3.s.rows(); ++i) CHECK(path3.s(i, i) == 1.0);
}

TEST_CASE("fold sizes obey the pigeonhole bound") {
    std::vector<std::size_t> labels;
    for (int i = 0; i < 125; ++i) labels.push_back(0);
    for (int i = 0; i < 63; ++i) labels.push_back(1);
    const FoldSplit split = make_folds(labels, 10, 3);
    REQUIRE(split.fold_of.size() == 188);
    std::vector<std::size_t> size(10, 0), class1(10, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++size[split.fold_of[i]];
        if (labels[i] == 1) ++class1[split.fold_of[i]];
    }
    for (std::size_t f = 0; f < 10; ++f) {
        CHECK(size[f] >= 18);
        CHECK(size[f] <= 19);
    }
    // Stratification: per-class fold counts differ by at most one.
    for (std::size_t f = 0; f < 10; ++f) {
        for (std::size_t g = 0; g < 10; ++g) {
            CHECK(std::llabs(static_cast<long long>(class1[f]) -
                             static_cast<long long>(class1[g])) <= 1);
        }
    }
}

TEST_CASE("round-robin fills one sample per fold") {
    const FoldSplit split = make_folds(std::vector<std::size_t>(10, 0), 10, 1);
    std::vector<std::size_t> size(10, 0);
    for (std::size_t f : split.fold_of) ++size[f];
    for (std::size_t f = 0; f < 10; ++f) CHECK(size[f] == 1);
}

TEST_CASE("fold assignment is seed-deterministic") {
    std::vector<std::size_t> labels(37);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 3;
    CHECK(make_folds(labels, 5, 11).fold_of == make_folds(labels, 5, 11).fold_of);
    CHECK(make_folds(labels, 5, 11).fold_of != make_folds(labels, 5, 12).fold_of);
}

TEST_CASE("fold split exposes train and test index views") {
    const FoldSplit split = make_folds({0, 0, 1, 1, 0, 1}, 2, 4);
    for (std::size_t f = 0; f < 2; ++f) {
        const auto test = split.test_indices(f);
        const auto train = split.train_indices(f);
        CHECK(test.size() + train.size() == 6);
        for (std::size_t idx : test) CHECK(split.fold_of[idx] == f);
        for (std::size_t idx : train) CHECK(split.fold_of[idx] != f);
    }
}

TEST_CASE("make_folds validates its arguments") {
    CHECK_THROWS_AS(make_folds({0, 1}, 1, 0), ValueError);
    CHECK_THROWS_AS(make_folds({0, 1}, 3, 0), ValueError);
}

TEST_CASE("prepared round-trip is bit-exact") {
    const fs::path dir = write_fixture("roundtrip");
    const PreparedDataset ds = prepare_dataset(parse_tudataset(dir.string(), "FIX"), 77);
    const fs::path file = dir / "prepared.bin";
    save_prepared(ds, file.string());
    const PreparedDataset back = load_prepared(file.string());
    CHECK(back.name == ds.name);
    CHECK(back.classes == ds.classes);
    CHECK(back.feature_dim == ds.feature_dim);
    REQUIRE(back.graphs.size() == ds.graphs.size());
    for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
        CHECK(back.graphs[g].x == ds.graphs[g].x);
        CHECK(back.graphs[g].a == ds.graphs[g].a);
        CHECK(back.graphs[g].s == ds.graphs[g].s);
        CHECK(back.graphs[g].label == ds.graphs[g].label);
    }
}

TEST_CASE("wrong magic and truncation are distinct load errors") {
    const fs::path dir = write_fixture("load_errors");
    const PreparedDataset ds = prepare_dataset(parse_tudataset(dir.string(), "FIX"), 1);
    const fs::path good = dir / "good.bin";
    save_prepared(ds, good.string());

    const fs::path bad_magic = dir / "bad_magic.bin";
    write_file(bad_magic, "NOT-A-DATASET 1\n");
    CHECK_THROWS_WITH_AS(load_prepared(bad_magic.string()),
                         doctest::Contains("bad magic"), DataError);

    const fs::path cut = dir / "truncated.bin";
    std::ifstream in(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    write_file(cut, bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_prepared(cut.string()), DataError);
}
