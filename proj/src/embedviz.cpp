#include "rcvae/embedviz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "rcvae/errors.hpp"
#include "rcvae/rng.hpp"

namespace rcvae {

namespace {

// Squared Euclidean distances between rows, N x N.
std::vector<double> pairwise_sq(const Matrix& x) {
    std::size_t n = x.rows;
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0;
            for (std::size_t c = 0; c < x.cols; ++c) {
                double t = x.at(i, c) - x.at(j, c);
                acc += t * t;
            }
            d[i * n + j] = acc;
            d[j * n + i] = acc;
        }
    return d;
}

// Shannon entropy (nats) and row fill for one precision value.
double row_entropy(const std::vector<double>& d2, std::size_t n, std::size_t i, double beta,
                   std::vector<double>& row) {
    double sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
            row[j] = 0;
            continue;
        }
        row[j] = std::exp(-beta * d2[i * n + j]);
        sum += row[j];
    }
    if (sum <= 0) return -1;  // degenerate row: every neighbor infinitely far
    double h = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        row[j] /= sum;
        if (row[j] > 1e-300) h -= row[j] * std::log(row[j]);
    }
    return h;
}

}  // namespace

Matrix tsne_affinities(const Matrix& x, double perplexity, std::vector<double>* betas) {
    std::size_t n = x.rows;
    if (n < 4) throw ConfigError("tsne: need at least 4 points");
    if (perplexity <= 0 || perplexity >= (static_cast<double>(n) - 1.0) / 3.0)
        throw ConfigError("tsne: perplexity " + std::to_string(perplexity) +
                          " outside (0, (N-1)/3) for N=" + std::to_string(n));
    const double target = std::log(perplexity);
    std::vector<double> d2 = pairwise_sq(x);

    Matrix p(n, n, 0.0);
    if (betas) betas->assign(n, 0.0);
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double h = row_entropy(d2, n, i, beta, row);
        for (int it = 0; it < 200 && h >= 0 && std::abs(h - target) > 1e-5; ++it) {
            if (h > target) {  // too flat -> sharpen
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = row_entropy(d2, n, i, beta, row);
        }
        for (std::size_t j = 0; j < n; ++j) p.at(i, j) = row[j];
        if (betas) (*betas)[i] = beta;
    }
    return p;
}

TsneResult tsne_2d(const Matrix& x, const TsneConfig& config) {
    std::size_t n = x.rows;
    if (config.iterations < 1) throw ConfigError("tsne: iterations must be >= 1");
    TsneResult res;

    // All-identical input has no geometry to embed; hand back a seeded
    // near-zero layout instead of chasing an unreachable entropy target.
    std::vector<double> d2 = pairwise_sq(x);
    double dmax = 0;
    for (double v : d2) dmax = std::max(dmax, v);
    if (dmax < 1e-12) {
        Rng rng(config.seed);
        res.points = Matrix(n, 2);
        for (auto& v : res.points.data) v = 1e-4 * rng.next_normal();
        res.degenerate_fallback = true;
        return res;
    }

    Matrix cond = tsne_affinities(x, config.perplexity);
    // Symmetrize; entries sum to 1 across the whole matrix.
    Matrix p(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            p.at(i, j) = (cond.at(i, j) + cond.at(j, i)) / (2.0 * static_cast<double>(n));

    Rng rng(config.seed);
    Matrix y(n, 2);
    for (auto& v : y.data) v = 1e-4 * rng.next_normal();
    Matrix vel(n, 2, 0.0);
    // Per-coordinate adaptive gains keep the fixed learning rate stable:
    // grow a gain while the gradient fights the current velocity, shrink it
    // while they agree.
    Matrix gain(n, 2, 1.0);
    // A configured rate far above N/(4*exaggeration) shatters small layouts
    // during the lying phase, so cap it by the usual auto heuristic.
    double auto_lr = std::max(static_cast<double>(n) /
                                  (4.0 * std::max(config.early_exaggeration, 1.0)),
                              50.0);
    double lr = std::min(config.learning_rate, auto_lr);

    std::vector<double> num(n * n);
    res.kl.reserve(config.iterations);
    for (std::size_t iter = 0; iter < config.iterations; ++iter) {
        bool exaggerate = iter < config.exaggeration_iters;
        double pscale = exaggerate ? config.early_exaggeration : 1.0;
        double momentum = exaggerate ? 0.5 : 0.8;

        // Student-t numerators and their total.
        double zsum = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) {
                    num[i * n + j] = 0;
                    continue;
                }
                double dx = y.at(i, 0) - y.at(j, 0);
                double dy = y.at(i, 1) - y.at(j, 1);
                num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
                zsum += num[i * n + j];
            }

        double kl = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                double pij = p.at(i, j);
                if (pij > 1e-300) {
                    double qij = std::max(num[i * n + j] / zsum, 1e-300);
                    kl += pij * std::log(pij / qij);
                }
            }
        res.kl.push_back(kl);

        for (std::size_t i = 0; i < n; ++i) {
            double gx = 0, gy = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                double pij = pscale * p.at(i, j);
                double qij = num[i * n + j] / zsum;
                double mult = 4.0 * (pij - qij) * num[i * n + j];
                gx += mult * (y.at(i, 0) - y.at(j, 0));
                gy += mult * (y.at(i, 1) - y.at(j, 1));
            }
            for (std::size_t c = 0; c < 2; ++c) {
                double g = c == 0 ? gx : gy;
                double& gn = gain.at(i, c);
                gn = ((g > 0) == (vel.at(i, c) > 0)) ? gn * 0.8 : gn + 0.2;
                if (gn < 0.01) gn = 0.01;
                vel.at(i, c) = momentum * vel.at(i, c) - lr * gn * g;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            y.at(i, 0) += vel.at(i, 0);
            y.at(i, 1) += vel.at(i, 1);
        }
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += y.at(i, 0);
            my += y.at(i, 1);
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y.at(i, 0) -= mx;
            y.at(i, 1) -= my;
        }
    }
    res.points = std::move(y);
    return res;
}

std::vector<std::size_t> kmeans(const Matrix& points, std::size_t k, std::uint64_t seed) {
    std::size_t n = points.rows;
    if (k < 1) throw SpecError("kmeans: k must be >= 1");
    if (k > n) throw SpecError("kmeans: k " + std::to_string(k) + " > points " + std::to_string(n));

    Rng rng(seed);
    auto sq_dist = [&](std::size_t i, const std::vector<double>& c) {
        double acc = 0;
        for (std::size_t d = 0; d < points.cols; ++d) {
            double t = points.at(i, d) - c[d];
            acc += t * t;
        }
        return acc;
    };

    // k-means++: first centroid uniform, then proportional to squared
    // distance from the nearest centroid so far.
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    std::size_t first = static_cast<std::size_t>(rng.next_below(n));
    centroids.push_back(std::vector<double>(points.cols));
    for (std::size_t d = 0; d < points.cols; ++d) centroids[0][d] = points.at(first, d);
    std::vector<double> best_d(n);
    while (centroids.size() < k) {
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double b = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) b = std::min(b, sq_dist(i, c));
            best_d[i] = b;
            total += b;
        }
        std::size_t pick;
        if (total <= 0) {
            pick = static_cast<std::size_t>(rng.next_below(n));
        } else {
            double r = rng.next_unit() * total;
            pick = n - 1;
            double acc = 0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += best_d[i];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(std::vector<double>(points.cols));
        for (std::size_t d = 0; d < points.cols; ++d) centroids.back()[d] = points.at(pick, d);
    }

    std::vector<std::size_t> assign(n, 0);
    for (int iter = 0; iter < 300; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double b = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double d = sq_dist(i, centroids[c]);
                if (d < b) {
                    b = d;
                    assign[i] = c;
                }
            }
        }
        // Refill any emptied cluster with the farthest point from its own
        // centroid, then recompute.
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) ++counts[assign[i]];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = 0;
            double fd = -1;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[assign[i]] <= 1) continue;
                double d = sq_dist(i, centroids[assign[i]]);
                if (d > fd) {
                    fd = d;
                    far = i;
                }
            }
            --counts[assign[far]];
            assign[far] = c;
            counts[c] = 1;
        }

        double moved = 0;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> m(points.cols, 0.0);
            std::size_t cnt = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (assign[i] != c) continue;
                ++cnt;
                for (std::size_t d = 0; d < points.cols; ++d) m[d] += points.at(i, d);
            }
            for (std::size_t d = 0; d < points.cols; ++d) {
                m[d] /= static_cast<double>(cnt);
                moved = std::max(moved, std::abs(m[d] - centroids[c][d]));
            }
            centroids[c] = std::move(m);
        }
        if (moved < 1e-8) break;
    }
    return assign;
}

std::vector<ClusterAnnotation> annotate(const std::vector<std::size_t>& assignments,
                                        const LabelVocab& vocab, double weight) {
    if (assignments.size() != vocab.size())
        throw DimensionError("annotate: " + std::to_string(assignments.size()) +
                             " assignments for " + std::to_string(vocab.size()) + " labels");
    if (vocab.size() == 0) throw DataError("annotate: empty vocab");
    std::size_t k = *std::max_element(assignments.begin(), assignments.end()) + 1;
    std::vector<ClusterAnnotation> out;
    for (std::size_t c = 0; c < k; ++c) {
        ClusterAnnotation a;
        a.cluster = c;
        double eol = 0, ecl = 0;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (assignments[i] != c) continue;
            a.members.push_back(vocab.at(i));
            eol += static_cast<double>(vocab.at(i).eol);
            ecl += static_cast<double>(vocab.at(i).ecl);
        }
        if (a.members.empty()) continue;  // dropped; caller can warn
        a.mean_eol = eol / static_cast<double>(a.members.size());
        a.mean_ecl = ecl / static_cast<double>(a.members.size());
        a.origin_distance = weight * a.mean_eol + (1.0 - weight) * a.mean_ecl;
        out.push_back(std::move(a));
    }
    return out;
}

namespace {

std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

std::string points_csv(const LabelVocab& vocab, const Matrix& points,
                       const std::vector<std::size_t>& assignments) {
    if (points.rows != vocab.size() || assignments.size() != vocab.size())
        throw DimensionError("points_csv: size mismatch");
    if (points.cols != 2) throw DimensionError("points_csv: points must be N x 2");
    std::ostringstream out;
    out << "label,x,y,cluster\n";
    for (std::size_t i = 0; i < vocab.size(); ++i)
        out << vocab.at(i).str() << ',' << fmt_num(points.at(i, 0)) << ','
            << fmt_num(points.at(i, 1)) << ',' << assignments[i] << '\n';
    return out.str();
}

std::string annotations_csv(const std::vector<ClusterAnnotation>& annotations) {
    std::ostringstream out;
    out << "cluster,mean_eol,mean_ecl,origin_distance,size\n";
    for (const auto& a : annotations)
        out << a.cluster << ',' << fmt_num(a.mean_eol) << ',' << fmt_num(a.mean_ecl) << ','
            << fmt_num(a.origin_distance) << ',' << a.members.size() << '\n';
    return out.str();
}

std::string scatter_svg(const Matrix& points, const std::vector<std::size_t>& assignments,
                        const std::vector<ClusterAnnotation>& annotations) {
    if (points.cols != 2 || points.rows != assignments.size())
        throw DimensionError("scatter_svg: bad inputs");
    static const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                     "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
                                     "#ccb974", "#64b5cd"};
    constexpr int kW = 720, kH = 540, kPad = 48;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (std::size_t i = 0; i < points.rows; ++i) {
        xmin = std::min(xmin, points.at(i, 0));
        xmax = std::max(xmax, points.at(i, 0));
        ymin = std::min(ymin, points.at(i, 1));
        ymax = std::max(ymax, points.at(i, 1));
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1;
    if (ymax - ymin < 1e-12) ymax = ymin + 1;
    auto sx = [&](double x) { return kPad + (x - xmin) / (xmax - xmin) * (kW - 2 * kPad); };
    auto sy = [&](double y) { return kH - kPad - (y - ymin) / (ymax - ymin) * (kH - 2 * kPad); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < points.rows; ++i) {
        const char* color = kPalette[assignments[i] % 10];
        svg << "<circle cx=\"" << fmt_num(sx(points.at(i, 0))) << "\" cy=\""
            << fmt_num(sy(points.at(i, 1))) << "\" r=\"4\" fill=\"" << color
            << "\" fill-opacity=\"0.75\"/>\n";
    }
    for (const auto& a : annotations) {
        // Text anchored at the cluster's 2-D mean.
        double mx = 0, my = 0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < points.rows; ++i) {
            if (assignments[i] != a.cluster) continue;
            mx += points.at(i, 0);
            my += points.at(i, 1);
            ++cnt;
        }
        if (!cnt) continue;
        mx /= static_cast<double>(cnt);
        my /= static_cast<double>(cnt);
        char text[160];
        std::snprintf(text, sizeof text, "EOL %.0f / ECL %.0f / d %.0f", a.mean_eol, a.mean_ecl,
                      a.origin_distance);
        svg << "<text x=\"" << fmt_num(sx(mx)) << "\" y=\"" << fmt_num(sy(my) - 8)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << text
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace rcvae
