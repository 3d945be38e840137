#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "feddag/admm.hpp"
#include "feddag/synthgen.hpp"
#include "feddag/types.hpp"

namespace feddag {

// CSV cells are written with enough digits to round-trip doubles exactly.
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// Numeric site file: header row of variable names, one sample per row.
Matrix read_numeric_csv(const std::filesystem::path& path, std::vector<std::string>* names);
void write_numeric_csv(const std::filesystem::path& path, const Matrix& values,
                       const std::vector<std::string>& names);

// Loads site_*.csv from a directory in natural (numeric-suffix) order.
// With standardize set, columns are shifted/scaled to zero mean and unit
// variance per site.
std::vector<SiteDataset> ingest_csv_sites(const std::filesystem::path& directory,
                                          bool standardize = false);

// site_{k}.csv + truth_{k}.csv + meta.json
void export_problem(const SynthProblem& problem, const SynthConfig& config,
                    const std::filesystem::path& directory);

struct StoredFitResult {
    int dim = 0;
    std::vector<std::string> site_ids;
    std::vector<Matrix> z_final;
    std::vector<IntMatrix> graphs;
    std::vector<double> h_values;
    int iterations_used = 0;
    bool converged = false;
    double edge_threshold = 0.0;
    std::string estimator;
};

void save_fit_result(const std::filesystem::path& path, const FitResult& result,
                     const std::vector<std::string>& site_ids, const EstimatorConfig& config);
StoredFitResult load_fit_result(const std::filesystem::path& path);

std::vector<std::string> read_labels(const std::filesystem::path& path);

// key = value file with [section] headers; section keys override the
// common section. Unknown keys are rejected.
struct ConfigFile {
    std::map<std::string, std::map<std::string, std::string>> sections;

    std::optional<std::string> lookup(const std::string& section, const std::string& key) const;
};

ConfigFile parse_config_file(const std::filesystem::path& path);

// Applies [common] and [<estimator>] sections onto a config.
void apply_config_file(const ConfigFile& file, EstimatorConfig& config);

}  // namespace feddag
