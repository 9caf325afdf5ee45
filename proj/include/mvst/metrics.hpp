#pragma once

#include "mvst/types.hpp"

#include <cstddef>
#include <vector>

namespace mvst {

/// Hubert-Arabie adjusted Rand index.
double ari(const LabelVector& a, const LabelVector& b);

/// Misclassification rate minimized over relabelings of `predicted`, by exhaustive search.
/// At most 8 distinct labels on either side.
double mcr(const LabelVector& truth, const LabelVector& predicted);

/// perm[k] = truth label (1-based) matched to predicted label k + 1, for the MCR-optimal
/// matching. `groups` is the label count on both sides.
std::vector<int> best_permutation(const LabelVector& truth, const LabelVector& predicted, std::size_t groups);

/// -2 loglik + m ln N.
double bic(double loglik, long m, std::size_t count);

}  // namespace mvst
