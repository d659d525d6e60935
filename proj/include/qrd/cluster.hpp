#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "qrd/sim.hpp"

namespace qrd {

// Dense symmetric matrix, row-major.
struct SymMatrix {
    int n = 0;
    std::vector<double> a;

    explicit SymMatrix(int size = 0) : n(size), a(static_cast<std::size_t>(size) * size, 0.0) {}
    double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
    double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

struct JacobiResult {
    std::vector<double> eigenvalues;          // ascending
    std::vector<std::vector<double>> vectors; // vectors[k] is the k-th eigenvector
    int sweeps = 0;
};

// Cyclic Jacobi for symmetric matrices; converges when the off-diagonal
// Frobenius norm drops below `tol`. Throws NumericError past `max_sweeps`.
JacobiResult jacobi_eigen_sym(SymMatrix a, double tol = 1e-10, int max_sweeps = 50);

struct KMeansResult {
    std::vector<int> assignment;
    std::vector<std::array<double, 3>> centers;
    double objective = 0.0;
    std::vector<double> objective_history;  // one entry per Lloyd iteration
};

// k-means (k = 3) on 3-d rows with k-means++ seeding from the given stream;
// iterates until the assignment is fixed.
KMeansResult kmeans3(const std::vector<std::array<double, 3>>& rows, PhiloxRng& rng,
                     int max_iters = 200);

struct SpectralParams {
    int kmeans_restarts = 100;
    int kmeans_max_iters = 200;
    double jacobi_tol = 1e-10;
    int jacobi_max_sweeps = 50;
};

struct SpectralResult {
    std::vector<int> assignment;              // cluster id per input point
    std::array<Complex, 3> centroids{};       // subsample-member means, MTV space
    std::vector<int> subsample_indices;
    double bandwidth = 0.0;                   // RBF sigma (median pairwise distance)
    std::array<std::size_t, 3> sizes{};
};

// Spectral clustering of MTV points into 3 clusters: subsample M points,
// RBF affinity with median-distance bandwidth, normalized symmetric
// Laplacian, 3 smallest eigenvectors (cyclic Jacobi), row-normalized
// embedding, restarted k-means; out-of-sample points go to the nearest
// cluster centroid in MTV space. Streams used: `stream_base` for the
// subsample draw, `stream_base + 1 + r` for k-means restart r.
SpectralResult spectral_cluster(const std::vector<Complex>& points, int subsample,
                                std::uint64_t key, std::uint64_t stream_base = 0,
                                const SpectralParams& params = {});

struct QubitClusterModel {
    std::array<Complex, 3> centroids{};   // indexed by cluster id
    std::array<int, 3> cluster_to_level{}; // bijection onto {0,1,2}
    std::vector<int> subsample_indices;
    double bandwidth = 0.0;
    int subsample = 0;
    std::uint64_t seed = 0;

    int level_of(int cluster) const { return cluster_to_level[cluster]; }
    // Nearest-centroid level assignment for a new MTV point.
    int assign_level(const Complex& point) const;
};

struct ClusterModel {
    std::vector<QubitClusterModel> qubits;
};

// Labels the three clusters: the two largest take the majority computational
// preparation among their members; the remaining cluster is the leaked level
// 2. Voting conflicts fall back to matching cluster centroids against
// per-preparation MTV means. prep_levels uses -1 for unknown.
std::array<int, 3> assign_labels(const SpectralResult& clusters,
                                 const std::vector<Complex>& points,
                                 const std::vector<int>& prep_levels);

}  // namespace qrd
