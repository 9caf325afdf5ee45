#include "mvst/metrics.hpp"

#include "mvst/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace mvst {

namespace {

void check_lengths(const LabelVector& a, const LabelVector& b) {
    if (a.size() != b.size()) {
        throw DimensionError("label vectors differ in length: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
}

// Dense 0-based codes in order of sorted label value.
std::vector<std::size_t> encode(const LabelVector& labels, std::size_t& distinct) {
    std::map<int, std::size_t> codes;
    for (int l : labels) codes.emplace(l, 0);
    std::size_t k = 0;
    for (auto& [label, code] : codes) code = k++;
    distinct = k;
    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = codes[labels[i]];
    return out;
}

double choose2(double x) { return 0.5 * x * (x - 1.0); }

constexpr std::size_t max_labels = 8;

// counts[t][p]: observations with truth code t and predicted code p. Returns the
// permutation perm (predicted code -> truth code) maximizing the matched count.
std::vector<std::size_t> best_matching(const std::vector<std::vector<long>>& counts, long& matched) {
    const std::size_t k = counts.size();
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> best = perm;
    matched = -1;
    do {
        long total = 0;
        for (std::size_t p = 0; p < k; ++p) total += counts[perm[p]][p];
        if (total > matched) {
            matched = total;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

double ari(const LabelVector& a, const LabelVector& b) {
    check_lengths(a, b);
    const double n = static_cast<double>(a.size());
    if (a.size() < 2) return 1.0;
    std::size_t ka = 0;
    std::size_t kb = 0;
    const auto ca = encode(a, ka);
    const auto cb = encode(b, kb);
    std::vector<double> table(ka * kb, 0.0);
    std::vector<double> rows(ka, 0.0);
    std::vector<double> cols(kb, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[ca[i] * kb + cb[i]] += 1.0;
        rows[ca[i]] += 1.0;
        cols[cb[i]] += 1.0;
    }
    double index = 0.0;
    for (double c : table) index += choose2(c);
    double sum_rows = 0.0;
    for (double r : rows) sum_rows += choose2(r);
    double sum_cols = 0.0;
    for (double c : cols) sum_cols += choose2(c);
    const double expected = sum_rows * sum_cols / choose2(n);
    const double maximum = 0.5 * (sum_rows + sum_cols);
    if (maximum == expected) return 1.0;  // both partitions trivial
    return (index - expected) / (maximum - expected);
}

double mcr(const LabelVector& truth, const LabelVector& predicted) {
    check_lengths(truth, predicted);
    if (truth.empty()) return 0.0;
    std::size_t kt = 0;
    std::size_t kp = 0;
    const auto ct = encode(truth, kt);
    const auto cp = encode(predicted, kp);
    const std::size_t k = std::max(kt, kp);
    if (k > max_labels) {
        throw DomainError("mcr supports at most " + std::to_string(max_labels) + " distinct labels, got " +
                          std::to_string(k));
    }
    std::vector<std::vector<long>> counts(k, std::vector<long>(k, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) ++counts[ct[i]][cp[i]];
    long matched = 0;
    best_matching(counts, matched);
    return 1.0 - static_cast<double>(matched) / static_cast<double>(truth.size());
}

std::vector<int> best_permutation(const LabelVector& truth, const LabelVector& predicted, std::size_t groups) {
    check_lengths(truth, predicted);
    if (groups == 0 || groups > max_labels) {
        throw DomainError("best_permutation supports 1 to " + std::to_string(max_labels) + " groups");
    }
    const int g = static_cast<int>(groups);
    std::vector<std::vector<long>> counts(groups, std::vector<long>(groups, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 1 || truth[i] > g || predicted[i] < 1 || predicted[i] > g) {
            throw DomainError("labels must lie in 1.." + std::to_string(groups));
        }
        ++counts[static_cast<std::size_t>(truth[i] - 1)][static_cast<std::size_t>(predicted[i] - 1)];
    }
    long matched = 0;
    const auto perm = best_matching(counts, matched);
    std::vector<int> out(groups);
    for (std::size_t p = 0; p < groups; ++p) out[p] = static_cast<int>(perm[p]) + 1;
    return out;
}

double bic(double loglik, long m, std::size_t count) {
    if (count < 1) throw DomainError("bic: N must be positive");
    return -2.0 * loglik + static_cast<double>(m) * std::log(static_cast<double>(count));
}

}  // namespace mvst
