#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "feddag/errors.hpp"

namespace feddag {

using Matrix = Eigen::MatrixXd;
using IntMatrix = Eigen::MatrixXi;

// What to do with a nonzero diagonal at construction time.
enum class DiagonalPolicy { Reject, ZeroOut };

// Square edge-weight matrix with a hard zero diagonal. Entry (i, j) is the
// weight of edge i -> j; off-diagonal values are preserved bit-exactly.
class WeightedAdjacency {
  public:
    explicit WeightedAdjacency(Matrix values, DiagonalPolicy policy = DiagonalPolicy::ZeroOut);

    static WeightedAdjacency zero(int dim);

    int dim() const { return static_cast<int>(values_.rows()); }
    const Matrix& values() const { return values_; }

    double operator()(int i, int j) const { return values_(i, j); }

  private:
    Matrix values_;
};

// {0,1} adjacency with zero diagonal, used by metrics and graph analyses.
class BinaryGraph {
  public:
    explicit BinaryGraph(int dim);
    explicit BinaryGraph(IntMatrix adj);

    int dim() const { return static_cast<int>(adj_.rows()); }
    const IntMatrix& adj() const { return adj_; }

    bool has_edge(int i, int j) const { return adj_(i, j) != 0; }
    void set_edge(int i, int j, bool present);
    int edge_count() const { return adj_.sum(); }

  private:
    IntMatrix adj_;
};

// One site's observations plus the Gram matrix U = (1/n) X^T X, computed
// once at load.
class SiteDataset {
  public:
    SiteDataset(std::string site_id, Matrix data);

    const std::string& site_id() const { return site_id_; }
    int n() const { return static_cast<int>(data_.rows()); }
    int dim() const { return static_cast<int>(data_.cols()); }
    const Matrix& data() const { return data_; }
    const Matrix& gram() const { return gram_; }

  private:
    std::string site_id_;
    Matrix data_;
    Matrix gram_;
};

struct ProblemDescriptor {
    int site_count = 0;
    int dim = 0;
    std::vector<int> samples_per_site;
};

// Checks that the sites form one consistent problem (same width, no empty
// site) and reports its shape.
ProblemDescriptor validate_problem(std::span<const SiteDataset> datasets);

// Solver knobs shared by every estimator.
struct PenaltyConfig {
    double lambda1 = 0.02;       // L1 sparsity
    double lambda2 = 0.05;       // group-fused cross-site similarity
    double admm_tol = 1e-4;      // stopping rule epsilon
    int admm_max_iter = 200;     // T
    double dipa_tol = 1e-10;
    int dipa_max_iter = 500;     // N
    double h_tol = 1e-5;         // acyclicity acceptance
    double edge_threshold = 0.35; // omega

    void validate() const;
};

// Center-side ADMM state: consensus matrices, duals, penalties.
struct AdmmState {
    int site_count = 0;
    std::vector<Matrix> z;       // consensus Z^k, zero diagonal
    std::vector<double> alpha;   // acyclicity duals
    std::vector<Matrix> beta;    // equality duals
    double rho1 = 1.0;
    double rho2 = 1.0;
    double gamma1 = 1.25;
    double gamma2 = 1.25;
    int iteration = 0;
};

}  // namespace feddag
