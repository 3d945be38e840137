#pragma once

#include <string>
#include <vector>

#include "feddag/types.hpp"

namespace feddag {

struct ConfusionCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;

    long total() const { return tp + fp + fn + tn; }
};

// Directed comparison over all ordered off-diagonal pairs.
ConfusionCounts confusion(const BinaryGraph& learned, const BinaryGraph& truth);

struct EdgeMetrics {
    double error = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double fscore = 0.0;
};

// Error = (FP+FN)/(TP+TN+FP+FN); precision and F default to 0 on empty
// denominators.
EdgeMetrics error_precision_recall_f1(const ConfusionCounts& c);

// Structural Hamming distance: one unit per unordered pair that needs an
// add, delete, or reverse.
int shd(const BinaryGraph& learned, const BinaryGraph& truth);

struct DegreeReport {
    std::vector<int> out_degree;
    std::vector<int> in_degree;
    // (node index, degree) sorted by degree descending, ties by node index.
    std::vector<std::pair<int, int>> top_out;
    std::vector<std::pair<int, int>> top_in;
};

DegreeReport connection_degrees(const BinaryGraph& g, const std::vector<std::string>& labels,
                                int top_m = 10);

// Edges present in every graph.
BinaryGraph overlapping_connections(const std::vector<BinaryGraph>& graphs);

// Edges of graph k present in no other graph.
BinaryGraph site_specific_connections(const std::vector<BinaryGraph>& graphs, int k);

// Two-sided pooled z-test of proportions x1/n1 vs x2/n2. Degenerate pooled
// proportions (0 or 1) give p = 1 by convention.
double two_sample_proportion_test(long x1, long n1, long x2, long n2);

// Standard normal CDF via erf.
double normal_cdf(double x);

}  // namespace feddag
