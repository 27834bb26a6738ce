#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcvae/labels.hpp"
#include "rcvae/matrix.hpp"

namespace rcvae {

// NOTE: unlike the network code, points here live in ROWS (N x D input,
// N x 2 output) — the natural orientation of an embedding table.

struct TsneConfig {
    double perplexity = 30;
    std::size_t iterations = 1000;
    double early_exaggeration = 12;   // multiplies P for the opening stretch
    std::size_t exaggeration_iters = 250;
    double learning_rate = 200;
    std::uint64_t seed = 0;
};

struct TsneResult {
    Matrix points;           // N x 2
    std::vector<double> kl;  // true (unexaggerated) KL divergence per iteration
    bool degenerate_fallback = false;  // all-identical input -> seeded noise layout
};

// Row-normalized conditional affinities: P[i][j] = p_{j|i}, zero diagonal,
// each row summing to 1. The per-row precision is found by binary search
// until the row entropy is within 1e-5 of ln(perplexity) (natural log).
// betas, when given, receives the precision of every row.
Matrix tsne_affinities(const Matrix& x, double perplexity, std::vector<double>* betas = nullptr);

// Exact O(N^2) t-SNE with symmetrized affinities, early exaggeration, and
// momentum 0.5 switching to 0.8 after the exaggeration phase. Requires
// N >= 4 and perplexity < (N-1)/3.
TsneResult tsne_2d(const Matrix& x, const TsneConfig& config);

// Lloyd's algorithm with k-means++ seeding; at most 300 iterations or until
// centroids move less than 1e-8. An emptied cluster is reseeded with the
// point farthest from its centroid. SpecError on k < 1 or k > N.
std::vector<std::size_t> kmeans(const Matrix& points, std::size_t k, std::uint64_t seed);

struct ClusterAnnotation {
    std::size_t cluster = 0;
    std::vector<LabelKey> members;
    double mean_eol = 0;
    double mean_ecl = 0;
    // Distance of the cluster mean from the all-zero condition:
    // weight * mean_eol + (1 - weight) * mean_ecl.
    double origin_distance = 0;
};

// assignments[i] clusters vocab entry i. Empty clusters produce no
// annotation (callers can tell by comparing sizes).
std::vector<ClusterAnnotation> annotate(const std::vector<std::size_t>& assignments,
                                        const LabelVocab& vocab, double weight);

// `label,x,y,cluster` rows, vocab order.
std::string points_csv(const LabelVocab& vocab, const Matrix& points,
                       const std::vector<std::size_t>& assignments);

// `cluster,mean_eol,mean_ecl,origin_distance,size` rows.
std::string annotations_csv(const std::vector<ClusterAnnotation>& annotations);

// Self-contained scatter plot, one color per cluster, annotation boxes with
// the per-cluster means.
std::string scatter_svg(const Matrix& points, const std::vector<std::size_t>& assignments,
                        const std::vector<ClusterAnnotation>& annotations);

}  // namespace rcvae
