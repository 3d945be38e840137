#include "feddag/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace feddag {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, const fs::path& path, std::size_t row,
                  std::size_t col) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        std::ostringstream os;
        os << path.string() << ": row " << row << ", column " << col << ": not a number: '"
           << cell << "'";
        throw ParseError(os.str());
    }
    return value;
}

std::ifstream open_for_read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return in;
}

std::ofstream open_for_write(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write " + path.string());
    return out;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& rows) {
    if (!rows.is_array() || rows.empty()) throw ParseError("expected matrix rows");
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw ParseError("ragged matrix rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows[i][j].get<double>();
    }
    return m;
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
    auto in = open_for_read(path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            table.header = split_line(line);
            first = false;
        } else {
            table.rows.push_back(split_line(line));
        }
    }
    return table;
}

void write_csv(const fs::path& path, const CsvTable& table) {
    auto out = open_for_write(path);
    auto write_row = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& row : table.rows) write_row(row);
}

Matrix read_numeric_csv(const fs::path& path, std::vector<std::string>* names) {
    const CsvTable table = read_csv(path);
    if (table.header.empty()) throw ParseError(path.string() + ": missing header row");
    if (names) *names = table.header;
    const std::size_t cols = table.header.size();
    Matrix values(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() != cols) {
            std::ostringstream os;
            os << path.string() << ": row " << r + 2 << " has " << table.rows[r].size()
               << " cells, expected " << cols;
            throw ParseError(os.str());
        }
        for (std::size_t c = 0; c < cols; ++c)
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                parse_cell(table.rows[r][c], path, r + 2, c + 1);
    }
    return values;
}

void write_numeric_csv(const fs::path& path, const Matrix& values,
                       const std::vector<std::string>& names) {
    if (static_cast<Eigen::Index>(names.size()) != values.cols())
        throw LabelMismatch("write_numeric_csv: header width mismatch");
    auto out = open_for_write(path);
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out << ',';
        out << names[i];
    }
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            if (c) out << ',';
            out << format_double(values(r, c));
        }
        out << '\n';
    }
}

namespace {

// site_10 sorts after site_2: order by trailing number when both have one.
bool natural_less(const std::string& a, const std::string& b) {
    auto split_suffix = [](const std::string& s) -> std::pair<std::string, long> {
        std::size_t pos = s.size();
        while (pos > 0 && std::isdigit(static_cast<unsigned char>(s[pos - 1]))) --pos;
        if (pos == s.size()) return {s, -1};
        return {s.substr(0, pos), std::stol(s.substr(pos))};
    };
    const auto [pa, na] = split_suffix(a);
    const auto [pb, nb] = split_suffix(b);
    if (pa == pb && na >= 0 && nb >= 0) return na < nb;
    return a < b;
}

}  // namespace

std::vector<SiteDataset> ingest_csv_sites(const fs::path& directory, bool standardize) {
    if (!fs::is_directory(directory))
        throw ParseError("not a directory: " + directory.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        const std::string name = entry.path().filename().string();
        if (name.starts_with("site_") && name.ends_with(".csv")) files.push_back(entry.path());
    }
    if (files.empty()) throw ParseError("no site_*.csv files in " + directory.string());
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return natural_less(a.stem().string(), b.stem().string());
    });

    std::vector<SiteDataset> datasets;
    for (const auto& file : files) {
        Matrix data = read_numeric_csv(file, nullptr);
        if (standardize) {
            for (Eigen::Index c = 0; c < data.cols(); ++c) {
                const double mean = data.col(c).mean();
                data.col(c).array() -= mean;
                const double var = data.col(c).squaredNorm() / static_cast<double>(data.rows());
                if (var > 1e-30) data.col(c) /= std::sqrt(var);
            }
        }
        datasets.emplace_back(file.stem().string(), std::move(data));
    }
    validate_problem(datasets);
    return datasets;
}

void export_problem(const SynthProblem& problem, const SynthConfig& config,
                    const fs::path& directory) {
    fs::create_directories(directory);
    std::vector<std::string> names;
    for (int j = 0; j < config.dim; ++j) names.push_back("x" + std::to_string(j + 1));

    for (std::size_t k = 0; k < problem.datasets.size(); ++k) {
        write_numeric_csv(directory / ("site_" + std::to_string(k) + ".csv"),
                          problem.datasets[k].data(), names);
        write_numeric_csv(directory / ("truth_" + std::to_string(k) + ".csv"),
                          problem.weights[k].values(), names);
    }

    json meta;
    meta["dim"] = config.dim;
    meta["sites"] = config.sites;
    meta["perturbation_level"] = config.perturbation_level;
    if (config.n_total) meta["n_total"] = *config.n_total;
    if (config.n_per_site) meta["n_per_site"] = *config.n_per_site;
    meta["edge_probability"] = config.edge_probability();
    meta["noise_std"] = config.noise_std;
    meta["seed"] = config.seed;
    meta["weight_range"] = {config.weight_min, config.weight_max};
    meta["realized_perturbations"] = problem.realized_perturbations;
    meta["truth"] = json::array();
    for (int i = 0; i < problem.truth.dim(); ++i) {
        json row = json::array();
        for (int j = 0; j < problem.truth.dim(); ++j) row.push_back(problem.truth.adj()(i, j));
        meta["truth"].push_back(std::move(row));
    }
    auto out = open_for_write(directory / "meta.json");
    out << meta.dump(2) << '\n';
}

void save_fit_result(const fs::path& path, const FitResult& result,
                     const std::vector<std::string>& site_ids, const EstimatorConfig& config) {
    json doc;
    doc["dim"] = result.z_final.empty() ? 0 : result.z_final[0].dim();
    doc["site_ids"] = site_ids;
    doc["estimator"] = to_string(config.mode);
    doc["edge_threshold"] = config.penalties.edge_threshold;
    doc["lambda1"] = config.penalties.lambda1;
    doc["lambda2"] = config.penalties.lambda2;
    doc["iterations_used"] = result.iterations_used;
    doc["converged"] = result.converged;
    doc["rho_capped"] = result.rho_capped;
    doc["h_values"] = result.h_values;
    doc["z_final"] = json::array();
    for (const auto& z : result.z_final) doc["z_final"].push_back(matrix_to_json(z.values()));
    doc["graphs"] = json::array();
    for (const auto& g : result.graphs) {
        json rows = json::array();
        for (int i = 0; i < g.dim(); ++i) {
            json row = json::array();
            for (int j = 0; j < g.dim(); ++j) row.push_back(g.adj()(i, j));
            rows.push_back(std::move(row));
        }
        doc["graphs"].push_back(std::move(rows));
    }
    auto out = open_for_write(path);
    out << doc.dump(2) << '\n';
}

StoredFitResult load_fit_result(const fs::path& path) {
    auto in = open_for_read(path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    StoredFitResult out;
    try {
        out.dim = doc.at("dim").get<int>();
        out.site_ids = doc.at("site_ids").get<std::vector<std::string>>();
        out.h_values = doc.at("h_values").get<std::vector<double>>();
        out.iterations_used = doc.at("iterations_used").get<int>();
        out.converged = doc.at("converged").get<bool>();
        out.edge_threshold = doc.at("edge_threshold").get<double>();
        out.estimator = doc.at("estimator").get<std::string>();
        for (const auto& z : doc.at("z_final")) out.z_final.push_back(matrix_from_json(z));
        for (const auto& g : doc.at("graphs")) {
            const Matrix m = matrix_from_json(g);
            out.graphs.push_back(m.cast<int>());
        }
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return out;
}

std::vector<std::string> read_labels(const fs::path& path) {
    auto in = open_for_read(path);
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) labels.push_back(line);
    }
    return labels;
}

std::optional<std::string> ConfigFile::lookup(const std::string& section,
                                              const std::string& key) const {
    if (const auto sec = sections.find(section); sec != sections.end()) {
        if (const auto it = sec->second.find(key); it != sec->second.end()) return it->second;
    }
    return std::nullopt;
}

ConfigFile parse_config_file(const fs::path& path) {
    auto in = open_for_read(path);
    ConfigFile file;
    std::string line, section = "common";
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto notspace = [](unsigned char c) { return !std::isspace(c); };
        s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
        s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
        return s;
    };
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": expected key = value");
        file.sections[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return file;
}

namespace {

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
    }
}

int to_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
    }
}

}  // namespace

void apply_config_file(const ConfigFile& file, EstimatorConfig& config) {
    const std::string estimator = to_string(config.mode);
    auto get = [&](const std::string& key) -> std::optional<std::string> {
        if (auto v = file.lookup(estimator, key)) return v;
        return file.lookup("common", key);
    };

    static const std::vector<std::string> known = {
        "lambda1", "lambda2",   "admm_tol", "admm_max_iter", "dipa_tol",  "dipa_max_iter",
        "h_tol",   "edge_threshold", "rho1_init", "rho2_init", "gamma1",  "gamma2",
        "rho_cap", "inner_prox_steps", "inner_prox_tol", "seed"};
    for (const auto& [section, keys] : file.sections) {
        if (section != "common" && section != "pfl" && section != "sig" && section != "avg" &&
            section != "admm")
            throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, value] : keys) {
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
        }
    }

    if (auto v = get("lambda1")) config.penalties.lambda1 = to_double(*v, "lambda1");
    if (auto v = get("lambda2")) config.penalties.lambda2 = to_double(*v, "lambda2");
    if (auto v = get("admm_tol")) config.penalties.admm_tol = to_double(*v, "admm_tol");
    if (auto v = get("admm_max_iter"))
        config.penalties.admm_max_iter = to_int(*v, "admm_max_iter");
    if (auto v = get("dipa_tol")) config.penalties.dipa_tol = to_double(*v, "dipa_tol");
    if (auto v = get("dipa_max_iter"))
        config.penalties.dipa_max_iter = to_int(*v, "dipa_max_iter");
    if (auto v = get("h_tol")) config.penalties.h_tol = to_double(*v, "h_tol");
    if (auto v = get("edge_threshold"))
        config.penalties.edge_threshold = to_double(*v, "edge_threshold");
    if (auto v = get("rho1_init")) config.rho1_init = to_double(*v, "rho1_init");
    if (auto v = get("rho2_init")) config.rho2_init = to_double(*v, "rho2_init");
    if (auto v = get("gamma1")) config.gamma1 = to_double(*v, "gamma1");
    if (auto v = get("gamma2")) config.gamma2 = to_double(*v, "gamma2");
    if (auto v = get("rho_cap")) config.rho_cap = to_double(*v, "rho_cap");
    if (auto v = get("inner_prox_steps"))
        config.inner_prox_steps = to_int(*v, "inner_prox_steps");
    if (auto v = get("inner_prox_tol"))
        config.inner_prox_tol = to_double(*v, "inner_prox_tol");
    if (auto v = get("seed")) config.seed = static_cast<std::uint64_t>(std::stoull(*v));
}

}  // namespace feddag
