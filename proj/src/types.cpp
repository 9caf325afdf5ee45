#include "mvst/types.hpp"

#include "mvst/errors.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace mvst {

std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::Mvst: return "mvst";
        case Variant::Rmvsn: return "rmvsn";
        case Variant::Mvt: return "mvt";
        case Variant::Mvn: return "mvn";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "mvst") return Variant::Mvst;
    if (lower == "rmvsn") return Variant::Rmvsn;
    if (lower == "mvt") return Variant::Mvt;
    if (lower == "mvn") return Variant::Mvn;
    throw DomainError("unknown model variant '" + std::string(name) + "' (expected mvn, mvt, rmvsn or mvst)");
}

Dataset::Dataset(std::vector<Matrix> samples) {
    for (auto& y : samples) push_back(std::move(y));
}

void Dataset::push_back(Matrix y) {
    if (samples_.empty() && rows_ == 0 && cols_ == 0) {
        rows_ = static_cast<std::size_t>(y.rows());
        cols_ = static_cast<std::size_t>(y.cols());
    }
    if (static_cast<std::size_t>(y.rows()) != rows_ || static_cast<std::size_t>(y.cols()) != cols_) {
        throw DimensionError("Dataset: sample " + std::to_string(samples_.size() + 1) + " is " +
                             std::to_string(y.rows()) + "x" + std::to_string(y.cols()) + ", expected " +
                             std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    samples_.push_back(std::move(y));
}

}  // namespace mvst
