#pragma once

#include <cstddef>
#include <vector>

#include "amosl/matrix.hpp"
#include "amosl/types.hpp"

namespace amosl {

/// Symmetric normalized Laplacian L = I - D^{-1/2} A D^{-1/2}.
/// Isolated nodes use the convention D_ii^{-1/2} = 0, so their Laplacian row is
/// the identity row. Requires a square matrix with nonnegative entries.
Matrix normalized_laplacian(const Matrix& adjacency);

/// Scaled Laplacian L~ = (2 / lambda_max) L - I with the fixed bound
/// lambda_max = 2, i.e. L~ = L - I.
Matrix scaled_laplacian(const Matrix& laplacian);

/// Chebyshev polynomial stack [T_0(L~), ..., T_{K-1}(L~)] via the recurrence
/// T_k = 2 L~ T_{k-1} - T_{k-2}, T_0 = I, T_1 = L~. Requires order >= 1.
std::vector<Matrix> cheb_basis(const Matrix& scaled_laplacian, std::size_t order);

/// GCN propagation matrix D~^{-1/2} (A + I) D~^{-1/2} where D~ is the degree
/// of A + I (always positive, so no isolated-node special case remains).
Matrix gcn_norm_adjacency(const Matrix& adjacency);

/// Spectral filter of one convolution layer without the nonlinearity:
/// sum_k basis[k] * x * theta[k].
Matrix cheb_conv(const std::vector<Matrix>& basis, const Matrix& x,
                 const std::vector<Matrix>& theta);

/// One GCN layer without the nonlinearity: norm_adj * x * weight.
Matrix gcn_conv(const Matrix& norm_adj, const Matrix& x, const Matrix& weight);

}  // namespace amosl
