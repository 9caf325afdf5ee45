#pragma once

// File formats.
//
// Datasets are long CSV with the exact header `sample,row,col,value`, one record per
// matrix cell; sample, row and col are 1-based and sample ids run contiguously from 1.
// Label files have the header `sample,label`.
//
// Parameters and fit results are JSON. Matrices are arrays of rows. Floats are written
// in shortest round-trip form, so reading and re-writing a file reproduces it byte for
// byte. A nu of null means the variant has no nu.

#include "mvst/mixture.hpp"
#include "mvst/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace mvst {

using Json = nlohmann::ordered_json;

Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

/// `expected_count` = 0 skips the length check.
LabelVector read_labels(std::istream& in, std::size_t expected_count = 0);
LabelVector read_labels(const std::filesystem::path& path, std::size_t expected_count = 0);
void write_labels(std::ostream& out, const LabelVector& labels);
void write_labels(const std::filesystem::path& path, const LabelVector& labels);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const std::string& what);

Json params_to_json(const MixtureParams& theta);
/// Throws ValidationError on schema violations; parameter errors propagate.
MixtureParams params_from_json(const Json& j);

Json config_to_json(const FitConfig& config);
FitConfig config_from_json(const Json& j);

Json fit_result_to_json(const FitResult& result);
FitResult fit_result_from_json(const Json& j);

/// Reads a JSON document; ValidationError on parse failure.
Json read_json(const std::filesystem::path& path);
/// Writes `j.dump(2)` and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace mvst
