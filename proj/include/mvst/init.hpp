#pragma once

// Starting values for ECME: a k-means partition of Vec(Y_i), moment estimates of
// M, Sigma and Psi within each cluster, uniform random Lambda and a fixed nu.

#include "mvst/config.hpp"
#include "mvst/mixture.hpp"
#include "mvst/types.hpp"

namespace mvst {

/// Best of `spec.kmeans_restarts` seeded Lloyd runs (k-means++ seeding, at most 100
/// iterations, empty clusters reseeded at the farthest point). Returns an N x G 0/1
/// matrix. Ties in SSE go to the lowest restart index.
Matrix kmeans_partition(const Dataset& data, std::size_t groups, const InitSpec& spec);

/// Within-cluster sum of squared distances to the cluster means of `z0`.
double within_cluster_sse(const Dataset& data, const Matrix& z0);

/// Moment-based starting parameters from a hard partition:
///
///   M_g     = mean of the members
///   Sigma_g = sum_i sum_j (y_ij - m_gj)(y_ij - m_gj)^T / (p n_g)    (columns j)
///   Psi_g   = sum_i sum_r (y_ir - m_gr)^T(y_ir - m_gr) / (n n_g)    (rows r)
///
/// Lambda_g entries are uniform on the spec's range (one stream per component), nu_g is
/// spec.nu_init and pi_g = n_g / N. Zero scatters are jittered.
MixtureParams initial_params(const Dataset& data, const Matrix& z0, const InitSpec& spec, Variant variant);

}  // namespace mvst
