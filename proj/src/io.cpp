#include "mvst/io.hpp"

#include "mvst/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace mvst {

namespace {

constexpr double infinity = std::numeric_limits<double>::infinity();

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "' for reading", 0);
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing", 0);
    return out;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t") == std::string::npos; }

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

long parse_index(const std::string& raw, const char* what, std::size_t line) {
    const std::string s = trim(raw);
    long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ValidationError(std::string("non-integer ") + what + " '" + raw + "'", line);
    }
    if (v < 1) throw ValidationError(std::string(what) + " must be a positive integer, got " + s, line);
    return v;
}

double parse_value(const std::string& raw, std::size_t line) {
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
        throw ValidationError("non-numeric value '" + raw + "'", line);
    }
    return v;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void check_header(std::istream& in, const std::string& expected) {
    std::string header;
    if (!std::getline(in, header)) throw ValidationError("empty file; expected header '" + expected + "'", 1);
    strip_cr(header);
    if (header != expected) throw ValidationError("header must be '" + expected + "', got '" + header + "'", 1);
}

Json require(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing JSON field '") + key + "'", 0);
    return j.at(key);
}

template <class T>
T get_as(const Json& j, const char* key) {
    try {
        return require(j, key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("JSON field '") + key + "' has the wrong type: " + e.what(), 0);
    }
}

double get_double_or_inf(const Json& j, const char* key) {
    const Json v = require(j, key);
    if (v.is_null()) return infinity;
    if (!v.is_number()) throw ValidationError(std::string("JSON field '") + key + "' must be a number or null", 0);
    return v.get<double>();
}

Json double_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

// ---------------------------------------------------------------------------

Dataset read_dataset(std::istream& in) {
    check_header(in, "sample,row,col,value");
    struct SampleInfo {
        std::size_t first_line = 0;
        long max_row = 0;
        long max_col = 0;
        std::size_t extent_line = 0;
        std::map<std::pair<long, long>, double> cells;
    };
    std::map<long, SampleInfo> samples;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (blank(line)) continue;
        const auto fields = split(line);
        if (fields.size() != 4) {
            throw ValidationError("expected 4 fields, got " + std::to_string(fields.size()), lineno);
        }
        const long s = parse_index(fields[0], "sample", lineno);
        const long r = parse_index(fields[1], "row", lineno);
        const long c = parse_index(fields[2], "col", lineno);
        const double v = parse_value(fields[3], lineno);
        SampleInfo& info = samples[s];
        if (info.first_line == 0) info.first_line = lineno;
        if (!info.cells.emplace(std::make_pair(r, c), v).second) {
            throw ValidationError("duplicate cell (sample " + std::to_string(s) + ", row " + std::to_string(r) +
                                      ", col " + std::to_string(c) + ")",
                                  lineno);
        }
        if (r > info.max_row || c > info.max_col) {
            info.max_row = std::max(info.max_row, r);
            info.max_col = std::max(info.max_col, c);
            info.extent_line = lineno;
        }
    }
    if (samples.empty()) throw ValidationError("dataset has no records", lineno);

    long expected_id = 1;
    for (const auto& [id, info] : samples) {
        if (id != expected_id) {
            throw ValidationError("sample ids must be contiguous from 1; sample " + std::to_string(expected_id) +
                                      " is missing",
                                  info.first_line);
        }
        ++expected_id;
    }
    const long n = samples.begin()->second.max_row;
    const long p = samples.begin()->second.max_col;
    Dataset data(static_cast<std::size_t>(n), static_cast<std::size_t>(p));
    for (const auto& [id, info] : samples) {
        if (info.max_row != n || info.max_col != p) {
            throw ValidationError("ragged dimensions: sample " + std::to_string(id) + " spans " +
                                      std::to_string(info.max_row) + "x" + std::to_string(info.max_col) +
                                      " but sample 1 is " + std::to_string(n) + "x" + std::to_string(p),
                                  info.extent_line);
        }
        Matrix y(n, p);
        for (long r = 1; r <= n; ++r) {
            for (long c = 1; c <= p; ++c) {
                const auto it = info.cells.find({r, c});
                if (it == info.cells.end()) {
                    throw ValidationError("missing cell (sample " + std::to_string(id) + ", row " +
                                              std::to_string(r) + ", col " + std::to_string(c) + ")",
                                          info.first_line);
                }
                y(r - 1, c - 1) = it->second;
            }
        }
        data.push_back(std::move(y));
    }
    return data;
}

Dataset read_dataset(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_dataset(in);
}

void write_dataset(std::ostream& out, const Dataset& data) {
    out << "sample,row,col,value\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Matrix& y = data[i];
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            for (Eigen::Index c = 0; c < y.cols(); ++c) {
                out << i + 1 << ',' << r + 1 << ',' << c + 1 << ',' << format_double(y(r, c)) << '\n';
            }
        }
    }
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    auto out = open_out(path);
    write_dataset(out, data);
}

LabelVector read_labels(std::istream& in, std::size_t expected_count) {
    check_header(in, "sample,label");
    std::map<long, std::pair<int, std::size_t>> entries;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (blank(line)) continue;
        const auto fields = split(line);
        if (fields.size() != 2) throw ValidationError("expected 2 fields, got " + std::to_string(fields.size()), lineno);
        const long s = parse_index(fields[0], "sample", lineno);
        const long l = parse_index(fields[1], "label", lineno);
        if (!entries.emplace(s, std::make_pair(static_cast<int>(l), lineno)).second) {
            throw ValidationError("duplicate label for sample " + std::to_string(s), lineno);
        }
    }
    LabelVector labels;
    long expected_id = 1;
    for (const auto& [id, entry] : entries) {
        if (id != expected_id) {
            throw ValidationError("label sample ids must be contiguous from 1; sample " +
                                      std::to_string(expected_id) + " is missing",
                                  entry.second);
        }
        ++expected_id;
        labels.push_back(entry.first);
    }
    if (expected_count != 0 && labels.size() != expected_count) {
        throw ValidationError("label file has " + std::to_string(labels.size()) + " entries for " +
                                  std::to_string(expected_count) + " samples",
                              0);
    }
    return labels;
}

LabelVector read_labels(const std::filesystem::path& path, std::size_t expected_count) {
    auto in = open_in(path);
    return read_labels(in, expected_count);
}

void write_labels(std::ostream& out, const LabelVector& labels) {
    out << "sample,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out << i + 1 << ',' << labels[i] << '\n';
}

void write_labels(const std::filesystem::path& path, const LabelVector& labels) {
    auto out = open_out(path);
    write_labels(out, labels);
}

// ---------------------------------------------------------------------------

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const std::string& what) {
    if (!j.is_array() || j.size() != rows) {
        throw ValidationError(what + " must be an array of " + std::to_string(rows) + " rows", 0);
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        const Json& row = j[r];
        if (!row.is_array() || row.size() != cols) {
            throw ValidationError(what + " row " + std::to_string(r + 1) + " must have " + std::to_string(cols) +
                                      " entries",
                                  0);
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!row[c].is_number()) throw ValidationError(what + " entries must be numbers", 0);
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
        }
    }
    return m;
}

Json params_to_json(const MixtureParams& theta) {
    Json j;
    j["variant"] = std::string(to_string(theta.variant()));
    j["n"] = theta.rows();
    j["p"] = theta.cols();
    j["groups"] = theta.groups();
    j["weights"] = theta.weights();
    Json comps = Json::array();
    for (const auto& c : theta.components()) {
        Json cj;
        cj["M"] = matrix_to_json(c.location());
        cj["Sigma"] = matrix_to_json(c.sigma());
        cj["Psi"] = matrix_to_json(c.psi());
        cj["Lambda"] = matrix_to_json(c.lambda());
        cj["nu"] = double_or_null(c.nu());
        comps.push_back(std::move(cj));
    }
    j["components"] = std::move(comps);
    return j;
}

MixtureParams params_from_json(const Json& j) {
    Variant variant;
    try {
        variant = parse_variant(get_as<std::string>(j, "variant"));
    } catch (const DomainError& e) {
        throw ValidationError(e.what(), 0);
    }
    const auto n = get_as<std::size_t>(j, "n");
    const auto p = get_as<std::size_t>(j, "p");
    const auto g = get_as<std::size_t>(j, "groups");
    if (n < 1 || p < 1 || g < 1) throw ValidationError("n, p and groups must be positive", 0);
    const auto weights = get_as<std::vector<double>>(j, "weights");
    const Json comps = require(j, "components");
    if (weights.size() != g || !comps.is_array() || comps.size() != g) {
        throw ValidationError("weights and components must each have 'groups' entries", 0);
    }
    std::vector<MvstParams> components;
    for (std::size_t k = 0; k < g; ++k) {
        const Json& cj = comps[k];
        const std::string tag = "component " + std::to_string(k + 1) + " ";
        Matrix m = matrix_from_json(require(cj, "M"), n, p, tag + "M");
        Matrix sigma = matrix_from_json(require(cj, "Sigma"), n, n, tag + "Sigma");
        Matrix psi = matrix_from_json(require(cj, "Psi"), p, p, tag + "Psi");
        Matrix lambda = matrix_from_json(require(cj, "Lambda"), n, p, tag + "Lambda");
        const double nu = get_double_or_inf(cj, "nu");
        if (has_nu(variant) && !std::isfinite(nu)) throw ValidationError(tag + "needs a finite nu", 0);
        components.emplace_back(std::move(m), std::move(sigma), std::move(psi), std::move(lambda), nu, variant);
    }
    return MixtureParams(weights, std::move(components));
}

Json config_to_json(const FitConfig& config) {
    Json j;
    j["variant"] = std::string(to_string(config.variant));
    j["tol"] = double_or_null(config.tol);
    j["max_iter"] = config.max_iter;
    j["nu_min"] = config.nu_bounds.lower;
    j["nu_max"] = config.nu_bounds.upper;
    j["seed"] = config.seed;
    j["rescale"] = config.rescale_timing == RescaleTiming::AtConvergence ? "at_convergence" : "per_iteration";
    j["kmeans_restarts"] = config.init.kmeans_restarts;
    j["lambda_init_range"] = {config.init.lambda_lower, config.init.lambda_upper};
    j["nu_init"] = config.init.nu_init;
    return j;
}

FitConfig config_from_json(const Json& j) {
    FitConfig c;
    try {
        c.variant = parse_variant(get_as<std::string>(j, "variant"));
    } catch (const DomainError& e) {
        throw ValidationError(e.what(), 0);
    }
    c.tol = get_double_or_inf(j, "tol");
    c.max_iter = get_as<int>(j, "max_iter");
    c.nu_bounds.lower = get_as<double>(j, "nu_min");
    c.nu_bounds.upper = get_as<double>(j, "nu_max");
    c.seed = get_as<std::uint64_t>(j, "seed");
    const auto rescale = get_as<std::string>(j, "rescale");
    if (rescale == "at_convergence") {
        c.rescale_timing = RescaleTiming::AtConvergence;
    } else if (rescale == "per_iteration") {
        c.rescale_timing = RescaleTiming::PerIteration;
    } else {
        throw ValidationError("rescale must be 'at_convergence' or 'per_iteration'", 0);
    }
    c.init.kmeans_restarts = get_as<int>(j, "kmeans_restarts");
    const auto range = get_as<std::vector<double>>(j, "lambda_init_range");
    if (range.size() != 2) throw ValidationError("lambda_init_range must have two entries", 0);
    c.init.lambda_lower = range[0];
    c.init.lambda_upper = range[1];
    c.init.nu_init = get_as<double>(j, "nu_init");
    c.init.seed = c.seed;
    return c;
}

Json fit_result_to_json(const FitResult& result) {
    Json j;
    j["variant"] = std::string(to_string(result.params.variant()));
    j["n"] = result.params.rows();
    j["p"] = result.params.cols();
    j["groups"] = result.params.groups();
    j["N"] = result.labels.size();
    j["loglik"] = result.loglik;
    j["bic"] = result.bic;
    j["parameter_count"] = result.parameter_count;
    j["params"] = params_to_json(result.params);
    Json trace;
    trace["initial_loglik"] = result.trace.initial_loglik;
    trace["loglik_per_iter"] = result.trace.loglik_per_iter;
    trace["iterations"] = result.trace.iterations;
    trace["converged"] = result.trace.converged;
    trace["tail_underflows"] = result.trace.tail_underflows;
    j["trace"] = std::move(trace);
    j["labels"] = result.labels;
    j["responsibilities"] = matrix_to_json(result.resp.z_hat);
    j["config"] = config_to_json(result.config);
    return j;
}

FitResult fit_result_from_json(const Json& j) {
    MixtureParams params = params_from_json(require(j, "params"));
    const auto count = get_as<std::size_t>(j, "N");
    FitTrace trace;
    const Json tj = require(j, "trace");
    trace.initial_loglik = get_as<double>(tj, "initial_loglik");
    trace.loglik_per_iter = get_as<std::vector<double>>(tj, "loglik_per_iter");
    trace.iterations = get_as<int>(tj, "iterations");
    trace.converged = get_as<bool>(tj, "converged");
    trace.tail_underflows = get_as<long>(tj, "tail_underflows");
    Responsibilities resp{matrix_from_json(require(j, "responsibilities"), count, params.groups(), "responsibilities")};
    auto labels = get_as<LabelVector>(j, "labels");
    if (labels.size() != count) throw ValidationError("labels must have N entries", 0);
    FitResult result{std::move(params), std::move(trace), std::move(resp), std::move(labels),
                     get_as<double>(j, "loglik"), get_as<double>(j, "bic"), get_as<long>(j, "parameter_count"),
                     config_from_json(require(j, "config"))};
    return result;
}

Json read_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("invalid JSON in '" + path.string() + "': " + e.what(), 0);
    }
}

void write_json(const std::filesystem::path& path, const Json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace mvst
