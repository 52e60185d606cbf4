#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "amosl/matrix.hpp"

namespace amosl {

/// TUDataset flat files, 0-based internal indices.
struct RawDataset {
    std::string name;
    std::size_t graph_count = 0;
    std::vector<std::size_t> graph_of_node;                   // node -> graph
    std::vector<std::vector<std::size_t>> graph_nodes;        // graph -> nodes (ascending)
    std::vector<std::pair<std::size_t, std::size_t>> edges;   // global node pairs
    std::vector<long> graph_labels;                           // raw labels
    std::vector<long> node_labels;                            // empty if absent
    std::vector<std::vector<double>> node_attributes;         // empty if absent

    std::size_t node_count() const { return graph_of_node.size(); }
    std::size_t class_count() const;
    double mean_vertices() const;
};

/// One object's two modalities plus its class index.
struct GraphSample {
    Matrix x;  // n x d node features
    Matrix a;  // n x n adjacency, symmetric 0/1, zero diagonal
    Matrix s;  // n x n synthesized similarity, symmetric, unit diagonal
    std::size_t label = 0;

    std::size_t nodes() const { return x.rows(); }
};

struct PreparedDataset {
    std::string name;
    std::size_t classes = 0;
    std::size_t feature_dim = 0;
    std::vector<GraphSample> graphs;

    std::vector<std::size_t> labels() const;
};

struct FoldSplit {
    std::size_t k = 0;
    std::vector<std::size_t> fold_of;  // graph index -> fold id

    std::vector<std::size_t> test_indices(std::size_t fold) const;
    std::vector<std::size_t> train_indices(std::size_t fold) const;
};

/// Parses `<NAME>_A.txt` (comma-separated 1-based edges),
/// `<NAME>_graph_indicator.txt`, `<NAME>_graph_labels.txt` and the optional
/// `<NAME>_node_labels.txt` / `<NAME>_node_attributes.txt`. The files are
/// looked up in `directory` itself, then in `directory/<NAME>/`.
RawDataset parse_tudataset(const std::string& directory, const std::string& name);

/// Per-graph feature matrices: one-hot over the dataset-wide node-label
/// alphabet, then real attributes appended when present.
std::vector<Matrix> build_features(const RawDataset& raw);

/// Similarity from an explicit Mahalanobis metric M (test hook):
/// D_ij = sqrt((x_i - x_j)^T M (x_i - x_j)), off-diagonal z-scoring (skipped
/// when their std < 1e-12), S = exp(-D/2) with unit diagonal.
Matrix modality_from_metric(const Matrix& x, const Matrix& m);

/// Draws R (d x d, standard normal entries) from the seed, sets M = R^T R and
/// applies modality_from_metric.
Matrix synthesize_modality(const Matrix& x, std::uint64_t seed);

/// Full preparation: features, adjacency, per-graph synthesized modality
/// (graph g uses stream mix_seed(seed, g)), labels mapped to [0, C) by sorted
/// raw value.
PreparedDataset prepare_dataset(const RawDataset& raw, std::uint64_t seed);

/// Stratified fold assignment: per class, samples are shuffled by seed and
/// dealt round-robin, continuing the fold cursor across classes so global fold
/// sizes also differ by at most one.
FoldSplit make_folds(const std::vector<std::size_t>& labels, std::size_t k, std::uint64_t seed);

void save_prepared(const PreparedDataset& dataset, const std::string& path);
PreparedDataset load_prepared(const std::string& path);

}  // namespace amosl
