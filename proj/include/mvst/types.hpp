#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mvst {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One n x p observation.
using MatrixObservation = Matrix;

/// 1-based cluster labels.
using LabelVector = std::vector<int>;

enum class Variant { Mvst, Rmvsn, Mvt, Mvn };

/// True when the variant carries a finite degrees-of-freedom parameter.
constexpr bool has_nu(Variant v) noexcept { return v == Variant::Mvst || v == Variant::Mvt; }

/// True when the variant carries a skewness matrix.
constexpr bool has_skew(Variant v) noexcept { return v == Variant::Mvst || v == Variant::Rmvsn; }

std::string_view to_string(Variant v) noexcept;

/// Accepts "mvst", "rmvsn", "mvt", "mvn" (case-insensitive).
Variant parse_variant(std::string_view name);

/// A collection of equally-shaped matrix observations.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}
    explicit Dataset(std::vector<Matrix> samples);

    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    const Matrix& operator[](std::size_t i) const { return samples_[i]; }
    const std::vector<Matrix>& samples() const noexcept { return samples_; }

    void push_back(Matrix y);

    auto begin() const noexcept { return samples_.begin(); }
    auto end() const noexcept { return samples_.end(); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Matrix> samples_;
};

}  // namespace mvst
