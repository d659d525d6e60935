#include "qrd/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "qrd/errors.hpp"

namespace qrd {

namespace {

double off_diagonal_norm(const SymMatrix& a) {
    double s = 0.0;
    for (int i = 0; i < a.n; ++i) {
        for (int j = i + 1; j < a.n; ++j) s += a.at(i, j) * a.at(i, j);
    }
    return std::sqrt(2.0 * s);
}

}  // namespace

JacobiResult jacobi_eigen_sym(SymMatrix a, double tol, int max_sweeps) {
    const int n = a.n;
    if (n < 1) throw NumericError("jacobi_eigen_sym: empty matrix");

    // V starts as identity; rows of v are the working eigenvector estimates.
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) v[i][i] = 1.0;

    int sweeps = 0;
    while (off_diagonal_norm(a) > tol) {
        if (sweeps >= max_sweeps) {
            throw NumericError("jacobi_eigen_sym did not converge in " +
                               std::to_string(max_sweeps) + " sweeps");
        }
        ++sweeps;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double app = a.at(p, p);
                const double aqq = a.at(q, q);
                const double theta = 0.5 * (aqq - app) / apq;
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (int k = 0; k < n; ++k) {
                    const double akp = a.at(k, p);
                    const double akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a.at(p, k);
                    const double aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vpk = v[p][k];
                    const double vqk = v[q][k];
                    v[p][k] = c * vpk - s * vqk;
                    v[q][k] = s * vpk + c * vqk;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (int i = 0; i < n; ++i) diag[i] = a.at(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return diag[x] < diag[y]; });

    JacobiResult result;
    result.sweeps = sweeps;
    result.eigenvalues.resize(n);
    result.vectors.resize(n);
    for (int k = 0; k < n; ++k) {
        result.eigenvalues[k] = diag[order[k]];
        result.vectors[k] = v[order[k]];
    }
    return result;
}

KMeansResult kmeans3(const std::vector<std::array<double, 3>>& rows, PhiloxRng& rng,
                     int max_iters) {
    const std::size_t m = rows.size();
    constexpr int k = 3;
    if (m < k) throw DataError("kmeans3 needs at least 3 rows");

    auto dist2 = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
        const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
        return d0 * d0 + d1 * d1 + d2 * d2;
    };

    // k-means++ seeding
    KMeansResult res;
    res.centers.resize(k);
    res.centers[0] = rows[rng.uniform_below(m)];
    std::vector<double> best_d2(m);
    for (std::size_t i = 0; i < m; ++i) best_d2[i] = dist2(rows[i], res.centers[0]);
    for (int c = 1; c < k; ++c) {
        double total = std::accumulate(best_d2.begin(), best_d2.end(), 0.0);
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = m - 1;
            for (std::size_t i = 0; i < m; ++i) {
                acc += best_d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.uniform_below(m);
        }
        res.centers[c] = rows[pick];
        for (std::size_t i = 0; i < m; ++i) {
            best_d2[i] = std::min(best_d2[i], dist2(rows[i], res.centers[c]));
        }
    }

    res.assignment.assign(m, -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        double objective = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            int best = 0;
            double best_dist = dist2(rows[i], res.centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = dist2(rows[i], res.centers[c]);
                if (d < best_dist) {
                    best_dist = d;
                    best = c;
                }
            }
            objective += best_dist;
            if (res.assignment[i] != best) {
                res.assignment[i] = best;
                changed = true;
            }
        }
        res.objective = objective;
        res.objective_history.push_back(objective);
        if (!changed) break;

        std::array<std::array<double, 3>, k> sums{};
        std::array<std::size_t, k> counts{};
        for (std::size_t i = 0; i < m; ++i) {
            const int c = res.assignment[i];
            for (int d = 0; d < 3; ++d) sums[c][d] += rows[i][d];
            ++counts[c];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seed an empty cluster at the point farthest from its center.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double d = dist2(rows[i], res.centers[res.assignment[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                res.centers[c] = rows[far];
            } else {
                for (int d = 0; d < 3; ++d) {
                    res.centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
                }
            }
        }
    }
    return res;
}

SpectralResult spectral_cluster(const std::vector<Complex>& points, int subsample,
                                std::uint64_t key, std::uint64_t stream_base,
                                const SpectralParams& params) {
    const std::size_t n = points.size();
    if (n < 3) throw DataError("spectral_cluster needs at least 3 points");
    if (subsample < 3 || static_cast<std::size_t>(subsample) > n) {
        throw ConfigError("subsample size must lie in [3, n]");
    }
    {
        std::set<std::pair<double, double>> distinct;
        for (const auto& p : points) {
            distinct.emplace(p.real(), p.imag());
            if (distinct.size() >= 3) break;
        }
        if (distinct.size() < 3) throw DataError("fewer than 3 distinct points");
    }

    // Uniform subsample without replacement (partial Fisher-Yates).
    const int m = subsample;
    std::vector<int> indices(n);
    std::iota(indices.begin(), indices.end(), 0);
    PhiloxRng sub_rng(key, stream_base);
    for (int i = 0; i < m; ++i) {
        const std::size_t j = i + sub_rng.uniform_below(n - i);
        std::swap(indices[i], indices[j]);
    }
    indices.resize(m);

    SpectralResult result;
    result.subsample_indices = indices;

    std::vector<Complex> sub(m);
    for (int i = 0; i < m; ++i) sub[i] = points[indices[i]];

    // Bandwidth: median pairwise distance of the subsample.
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) dists.push_back(std::abs(sub[i] - sub[j]));
    }
    std::sort(dists.begin(), dists.end());
    double sigma;
    if (dists.size() % 2 == 1) {
        sigma = dists[dists.size() / 2];
    } else {
        sigma = 0.5 * (dists[dists.size() / 2 - 1] + dists[dists.size() / 2]);
    }
    if (sigma <= 0.0) {
        // Over half the pairs coincide; fall back to the mean positive distance.
        double sum = 0.0;
        std::size_t cnt = 0;
        for (const double d : dists) {
            if (d > 0.0) {
                sum += d;
                ++cnt;
            }
        }
        if (cnt == 0) throw DataError("fewer than 3 distinct points");
        sigma = sum / static_cast<double>(cnt);
    }
    result.bandwidth = sigma;

    // Normalized symmetric Laplacian L = I - D^{-1/2} A D^{-1/2}.
    SymMatrix lap(m);
    {
        SymMatrix aff(m);
        const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
        for (int i = 0; i < m; ++i) {
            aff.at(i, i) = 1.0;
            for (int j = i + 1; j < m; ++j) {
                const double d = std::abs(sub[i] - sub[j]);
                const double w = std::exp(-d * d * inv_two_sigma2);
                aff.at(i, j) = w;
                aff.at(j, i) = w;
            }
        }
        std::vector<double> inv_sqrt_deg(m);
        for (int i = 0; i < m; ++i) {
            double deg = 0.0;
            for (int j = 0; j < m; ++j) deg += aff.at(i, j);
            inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
        }
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                const double norm = inv_sqrt_deg[i] * aff.at(i, j) * inv_sqrt_deg[j];
                lap.at(i, j) = (i == j ? 1.0 : 0.0) - norm;
            }
        }
        // symmetrize exactly against rounding asymmetry
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j) {
                const double mean = 0.5 * (lap.at(i, j) + lap.at(j, i));
                lap.at(i, j) = mean;
                lap.at(j, i) = mean;
            }
        }
    }

    const JacobiResult eig = jacobi_eigen_sym(std::move(lap), params.jacobi_tol,
                                              params.jacobi_max_sweeps);

    // Row-normalized M x 3 embedding from the 3 smallest eigenvectors.
    std::vector<std::array<double, 3>> embedding(m);
    for (int i = 0; i < m; ++i) {
        double norm2 = 0.0;
        for (int c = 0; c < 3; ++c) {
            embedding[i][c] = eig.vectors[c][i];
            norm2 += embedding[i][c] * embedding[i][c];
        }
        if (norm2 > 0.0) {
            const double inv = 1.0 / std::sqrt(norm2);
            for (int c = 0; c < 3; ++c) embedding[i][c] *= inv;
        }
    }

    // Restarted k-means; winner by (objective, restart index).
    KMeansResult best;
    bool have_best = false;
    for (int r = 0; r < params.kmeans_restarts; ++r) {
        PhiloxRng rng(key, stream_base + 1 + static_cast<std::uint64_t>(r));
        KMeansResult candidate = kmeans3(embedding, rng, params.kmeans_max_iters);
        if (!have_best || candidate.objective < best.objective) {
            best = std::move(candidate);
            have_best = true;
        }
    }

    // Cluster centroids in MTV space from subsample members.
    std::array<Complex, 3> centroid_sum{};
    std::array<std::size_t, 3> counts{};
    for (int i = 0; i < m; ++i) {
        centroid_sum[best.assignment[i]] += sub[i];
        ++counts[best.assignment[i]];
    }
    for (int c = 0; c < 3; ++c) {
        if (counts[c] == 0) throw NumericError("spectral clustering produced an empty cluster");
        result.centroids[c] = centroid_sum[c] / static_cast<double>(counts[c]);
    }

    // Out-of-sample assignment by nearest centroid; subsample members keep
    // their k-means cluster.
    result.assignment.assign(n, -1);
    for (int i = 0; i < m; ++i) result.assignment[indices[i]] = best.assignment[i];
    for (std::size_t p = 0; p < n; ++p) {
        if (result.assignment[p] >= 0) continue;
        int bc = 0;
        double bd = std::abs(points[p] - result.centroids[0]);
        for (int c = 1; c < 3; ++c) {
            const double d = std::abs(points[p] - result.centroids[c]);
            if (d < bd) {
                bd = d;
                bc = c;
            }
        }
        result.assignment[p] = bc;
    }
    for (std::size_t p = 0; p < n; ++p) ++result.sizes[result.assignment[p]];
    return result;
}

int QubitClusterModel::assign_level(const Complex& point) const {
    int best = 0;
    double bd = std::abs(point - centroids[0]);
    for (int c = 1; c < 3; ++c) {
        const double d = std::abs(point - centroids[c]);
        if (d < bd) {
            bd = d;
            best = c;
        }
    }
    return cluster_to_level[best];
}

std::array<int, 3> assign_labels(const SpectralResult& clusters,
                                 const std::vector<Complex>& points,
                                 const std::vector<int>& prep_levels) {
    if (points.size() != clusters.assignment.size() || prep_levels.size() != points.size()) {
        throw DataError("assign_labels: size mismatch");
    }
    for (int c = 0; c < 3; ++c) {
        if (clusters.sizes[c] == 0) throw DataError("assign_labels: empty cluster");
    }

    // prep-level counts per cluster and dataset-wide
    std::array<std::array<std::size_t, 3>, 3> counts{};  // [cluster][level]
    std::array<std::size_t, 3> total_per_level{};
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int level = prep_levels[i];
        if (level < 0 || level > 2) continue;
        ++counts[clusters.assignment[i]][level];
        ++total_per_level[level];
    }

    // order clusters by size descending, index ascending
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return clusters.sizes[x] > clusters.sizes[y];
    });
    const int big0 = order[0], big1 = order[1], small = order[2];

    auto claim = [&](int cluster) -> int {
        const std::size_t c0 = counts[cluster][0];
        const std::size_t c1 = counts[cluster][1];
        if (c0 == 0 && c1 == 0) return -1;
        if (c0 > c1) return 0;
        if (c1 > c0) return 1;
        // tie: the level with the larger share of its preparations here wins
        const double share0 = total_per_level[0] ? static_cast<double>(c0) / total_per_level[0] : 0.0;
        const double share1 = total_per_level[1] ? static_cast<double>(c1) / total_per_level[1] : 0.0;
        if (share0 > share1) return 0;
        if (share1 > share0) return 1;
        return -1;
    };

    std::array<int, 3> cluster_to_level = {-1, -1, -1};
    const int claim0 = claim(big0);
    const int claim1 = claim(big1);
    if (claim0 >= 0 && claim1 >= 0 && claim0 != claim1) {
        cluster_to_level[big0] = claim0;
        cluster_to_level[big1] = claim1;
        cluster_to_level[small] = 2;
        return cluster_to_level;
    }

    // Conflict fallback: match cluster centroids to per-preparation MTV means.
    std::array<Complex, 3> prep_mean{};
    std::array<bool, 3> have_mean{};
    {
        std::array<Complex, 3> sums{};
        std::array<std::size_t, 3> cnt{};
        for (std::size_t i = 0; i < points.size(); ++i) {
            const int level = prep_levels[i];
            if (level < 0 || level > 2) continue;
            sums[level] += points[i];
            ++cnt[level];
        }
        for (int s = 0; s < 3; ++s) {
            have_mean[s] = cnt[s] > 0;
            if (have_mean[s]) prep_mean[s] = sums[s] / static_cast<double>(cnt[s]);
        }
    }
    if (!have_mean[0] || !have_mean[1]) {
        throw DataError("assign_labels needs prep labels for the computational levels");
    }

    // Best injective map over all cluster permutations; levels without a
    // preparation mean contribute nothing and absorb leftover clusters.
    std::array<int, 3> perm = {0, 1, 2};
    std::array<int, 3> best_map{};
    double best_cost = std::numeric_limits<double>::infinity();
    std::sort(perm.begin(), perm.end());
    do {
        double cost = 0.0;
        for (int c = 0; c < 3; ++c) {
            const int level = perm[c];
            if (have_mean[level]) cost += std::abs(clusters.centroids[c] - prep_mean[level]);
        }
        if (cost < best_cost) {
            best_cost = cost;
            for (int c = 0; c < 3; ++c) best_map[c] = perm[c];
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best_map;
}

}  // namespace qrd
