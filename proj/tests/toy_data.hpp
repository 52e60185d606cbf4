#pragma once

#include <cstdint>

#include "amosl/dataset.hpp"
#include "amosl/rng.hpp"

// Linearly separable synthetic set: every class-1 graph contains exactly one
// node carrying the second one-hot feature, class-0 graphs never do. Paths of
// 4 and 5 nodes keep the per-graph shapes varied.
inline amosl::PreparedDataset toy_dataset(std::size_t per_class = 10, std::uint64_t seed = 5) {
    amosl::PreparedDataset ds;
    ds.name = "toy";
    ds.classes = 2;
    ds.feature_dim = 2;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const std::size_t label = i % 2;
        const std::size_t n = 4 + (i % 3 == 0 ? 1 : 0);
        amosl::GraphSample g;
        g.label = label;
        g.x = amosl::Matrix(n, 2);
        for (std::size_t r = 0; r < n; ++r) g.x(r, 0) = 1.0;
        if (label == 1) {
            const std::size_t marked = (i / 2) % n;
            g.x(marked, 0) = 0.0;
            g.x(marked, 1) = 1.0;
        }
        g.a = amosl::Matrix(n, n);
        for (std::size_t r = 0; r + 1 < n; ++r) {
            g.a(r, r + 1) = 1.0;
            g.a(r + 1, r) = 1.0;
        }
        g.s = amosl::synthesize_modality(g.x, amosl::mix_seed(seed, i));
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}
