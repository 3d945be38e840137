#include "feddag/types.hpp"

#include <sstream>

namespace feddag {

namespace {

void require_square_finite(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        std::ostringstream os;
        os << what << ": matrix must be square, got " << m.rows() << "x" << m.cols();
        throw ShapeMismatch(os.str());
    }
    if (!m.allFinite()) throw NonFinite(std::string(what) + ": non-finite entries");
}

}  // namespace

WeightedAdjacency::WeightedAdjacency(Matrix values, DiagonalPolicy policy)
    : values_(std::move(values)) {
    require_square_finite(values_, "WeightedAdjacency");
    for (int i = 0; i < values_.rows(); ++i) {
        if (values_(i, i) != 0.0) {
            if (policy == DiagonalPolicy::Reject) {
                std::ostringstream os;
                os << "WeightedAdjacency: nonzero diagonal at (" << i << "," << i << ")";
                throw ShapeMismatch(os.str());
            }
            values_(i, i) = 0.0;
        }
    }
}

WeightedAdjacency WeightedAdjacency::zero(int dim) {
    return WeightedAdjacency(Matrix::Zero(dim, dim));
}

BinaryGraph::BinaryGraph(int dim) : adj_(IntMatrix::Zero(dim, dim)) {
    if (dim <= 0) throw ShapeMismatch("BinaryGraph: dim must be positive");
}

BinaryGraph::BinaryGraph(IntMatrix adj) : adj_(std::move(adj)) {
    if (adj_.rows() != adj_.cols()) throw ShapeMismatch("BinaryGraph: adjacency must be square");
    for (int i = 0; i < adj_.rows(); ++i) {
        for (int j = 0; j < adj_.cols(); ++j) {
            if (adj_(i, j) != 0 && adj_(i, j) != 1)
                throw ShapeMismatch("BinaryGraph: entries must be 0 or 1");
        }
        adj_(i, i) = 0;
    }
}

void BinaryGraph::set_edge(int i, int j, bool present) {
    if (i < 0 || j < 0 || i >= dim() || j >= dim())
        throw IndexOutOfRange("BinaryGraph::set_edge: index out of range");
    if (i == j) return;
    adj_(i, j) = present ? 1 : 0;
}

SiteDataset::SiteDataset(std::string site_id, Matrix data)
    : site_id_(std::move(site_id)), data_(std::move(data)) {
    if (data_.rows() == 0) throw EmptyDataset("SiteDataset '" + site_id_ + "': no samples");
    if (data_.cols() == 0) throw EmptyDataset("SiteDataset '" + site_id_ + "': no variables");
    if (!data_.allFinite()) throw NonFinite("SiteDataset '" + site_id_ + "': non-finite entries");
    gram_ = data_.transpose() * data_ / static_cast<double>(data_.rows());
    gram_ = ((gram_ + gram_.transpose()) / 2.0).eval();  // exact symmetry
}

ProblemDescriptor validate_problem(std::span<const SiteDataset> datasets) {
    if (datasets.empty()) throw EmptyDataset("validate_problem: no sites");
    ProblemDescriptor desc;
    desc.site_count = static_cast<int>(datasets.size());
    desc.dim = datasets[0].dim();
    for (const auto& ds : datasets) {
        if (ds.dim() != desc.dim) {
            std::ostringstream os;
            os << "site '" << ds.site_id() << "' has " << ds.dim() << " variables, expected "
               << desc.dim;
            throw DimensionMismatch(os.str());
        }
        desc.samples_per_site.push_back(ds.n());
    }
    return desc;
}

void PenaltyConfig::validate() const {
    if (lambda1 < 0 || lambda2 < 0) throw ConfigError("penalties must be >= 0");
    if (admm_tol <= 0 || dipa_tol <= 0 || h_tol <= 0)
        throw ConfigError("tolerances must be > 0");
    if (admm_max_iter < 1 || dipa_max_iter < 1) throw ConfigError("iteration caps must be >= 1");
    if (edge_threshold <= 0) throw ConfigError("edge_threshold must be > 0");
}

}  // namespace feddag
