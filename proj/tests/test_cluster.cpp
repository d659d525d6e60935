#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "qrd/cluster.hpp"
#include "qrd/errors.hpp"
#include "qrd/rng.hpp"

using namespace qrd;

namespace {

std::vector<Complex> three_blobs(int per_blob, double blob_std, PhiloxRng& rng,
                                 std::vector<int>* truth = nullptr) {
    const Complex centers[3] = {{0.0, 0.0}, {10.0, 0.0}, {5.0, 8.0}};
    std::vector<Complex> pts;
    for (int b = 0; b < 3; ++b) {
        for (int i = 0; i < per_blob; ++i) {
            pts.emplace_back(centers[b].real() + blob_std * rng.normal(),
                             centers[b].imag() + blob_std * rng.normal());
            if (truth) truth->push_back(b);
        }
    }
    return pts;
}

// partition as a canonical set-of-sets, independent of cluster ids
std::set<std::set<int>> partition_of(const std::vector<int>& assignment) {
    std::map<int, std::set<int>> groups;
    for (std::size_t i = 0; i < assignment.size(); ++i) groups[assignment[i]].insert(i);
    std::set<std::set<int>> out;
    for (auto& [id, members] : groups) out.insert(members);
    return out;
}

}  // namespace

TEST_CASE("jacobi solves a 2x2 exactly") {
    SymMatrix a(2);
    a.at(0, 0) = 2.0;
    a.at(0, 1) = 1.0;
    a.at(1, 0) = 1.0;
    a.at(1, 1) = 2.0;
    JacobiResult r = jacobi_eigen_sym(a);
    CHECK(r.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.eigenvalues[1] == doctest::Approx(3.0).epsilon(1e-12));
    // eigenvector of lambda=1 is (1,-1)/sqrt(2) up to sign
    CHECK(std::abs(r.vectors[0][0] * r.vectors[0][1]) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(r.vectors[0][0] * r.vectors[0][1] < 0.0);
}

TEST_CASE("jacobi eigendecomposition reconstructs random symmetric matrices") {
    PhiloxRng rng(12, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 50;
        SymMatrix a(n);
        for (int i = 0; i < n; ++i) {
            for (int j = i; j < n; ++j) {
                const double v = 2.0 * rng.uniform() - 1.0;
                a.at(i, j) = v;
                a.at(j, i) = v;
            }
        }
        JacobiResult r = jacobi_eigen_sym(a);
        double frob2 = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                double rec = 0.0;
                for (int k = 0; k < n; ++k) {
                    rec += r.eigenvalues[k] * r.vectors[k][i] * r.vectors[k][j];
                }
                const double diff = rec - a.at(i, j);
                frob2 += diff * diff;
            }
        }
        CHECK(std::sqrt(frob2) < 1e-8);
        // ascending order
        for (int k = 1; k < n; ++k) CHECK(r.eigenvalues[k] >= r.eigenvalues[k - 1]);
    }
}

TEST_CASE("kmeans objective is non-increasing") {
    PhiloxRng rng(5, 0);
    std::vector<std::array<double, 3>> rows;
    for (int i = 0; i < 300; ++i) {
        rows.push_back({rng.normal(), rng.normal(), rng.normal()});
    }
    PhiloxRng krng(6, 0);
    KMeansResult r = kmeans3(rows, krng);
    REQUIRE(r.objective_history.size() >= 1);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
        CHECK(r.objective_history[i] <= r.objective_history[i - 1] + 1e-12);
    }
}

TEST_CASE("well-separated blobs are recovered") {
    PhiloxRng rng(42, 0);
    std::vector<int> truth;
    // separation 10x the blob standard deviation
    std::vector<Complex> pts = three_blobs(200, 0.8, rng, &truth);
    SpectralResult r = spectral_cluster(pts, 300, 1234);

    // majority mapping cluster -> blob
    std::map<int, std::array<int, 3>> votes;
    for (std::size_t i = 0; i < pts.size(); ++i) votes[r.assignment[i]][truth[i]]++;
    int correct = 0;
    std::map<int, int> mapping;
    for (auto& [c, v] : votes) {
        mapping[c] = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (mapping[r.assignment[i]] == truth[i]) ++correct;
    }
    CHECK(static_cast<double>(correct) / pts.size() >= 0.99);
}

TEST_CASE("identical points are rejected") {
    std::vector<Complex> pts(50, Complex{1.0, 1.0});
    CHECK_THROWS_AS(spectral_cluster(pts, 10, 7), DataError);
}

TEST_CASE("three singletons become three clusters") {
    std::vector<Complex> pts = {{0.0, 0.0}, {5.0, 0.0}, {0.0, 5.0}};
    SpectralResult r = spectral_cluster(pts, 3, 7);
    std::set<int> ids(r.assignment.begin(), r.assignment.end());
    CHECK(ids.size() == 3);
}

TEST_CASE("clustering is deterministic in (points, M, seed)") {
    PhiloxRng rng(43, 0);
    std::vector<Complex> pts = three_blobs(100, 0.8, rng);
    SpectralResult a = spectral_cluster(pts, 150, 99);
    SpectralResult b = spectral_cluster(pts, 150, 99);
    CHECK(a.assignment == b.assignment);
    CHECK(a.subsample_indices == b.subsample_indices);
    CHECK(a.bandwidth == b.bandwidth);

    SpectralResult c = spectral_cluster(pts, 150, 100);
    // different seed may pick a different subsample; the partition on
    // separable data still matches
    CHECK(partition_of(a.assignment) == partition_of(c.assignment));
}

TEST_CASE("permuting point order permutes but does not change the partition") {
    PhiloxRng rng(44, 0);
    std::vector<int> truth;
    std::vector<Complex> pts = three_blobs(80, 0.7, rng, &truth);
    SpectralResult base = spectral_cluster(pts, static_cast<int>(pts.size()), 11);

    // reverse order
    std::vector<Complex> rev(pts.rbegin(), pts.rend());
    SpectralResult r = spectral_cluster(rev, static_cast<int>(rev.size()), 11);
    std::vector<int> undone(r.assignment.rbegin(), r.assignment.rend());
    CHECK(partition_of(base.assignment) == partition_of(undone));
}

TEST_CASE("label assignment by majority preparation") {
    // sizes 950 / 900 / 20 with prep labels 1 and 0 on the big clusters
    SpectralResult clusters;
    std::vector<Complex> pts;
    std::vector<int> preps;
    auto add = [&](int count, int cluster, int prep, Complex where) {
        for (int i = 0; i < count; ++i) {
            clusters.assignment.push_back(cluster);
            pts.push_back(where);
            preps.push_back(prep);
        }
    };
    add(950, 0, 1, Complex{0, 1});
    add(900, 1, 0, Complex{1, 0});
    add(20, 2, 0, Complex{-1, -1});  // leaked traces were prepared computational
    clusters.sizes = {950, 900, 20};
    clusters.centroids = {Complex{0, 1}, Complex{1, 0}, Complex{-1, -1}};

    const auto map = assign_labels(clusters, pts, preps);
    CHECK(map[0] == 1);
    CHECK(map[1] == 0);
    CHECK(map[2] == 2);
}

TEST_CASE("equal explicit three-level preparations resolve via centroid fallback") {
    SpectralResult clusters;
    std::vector<Complex> pts;
    std::vector<int> preps;
    PhiloxRng rng(3, 1);
    const Complex centers[3] = {{0.0, 0.0}, {4.0, 0.0}, {-2.0, -3.0}};
    for (int level = 0; level < 3; ++level) {
        for (int i = 0; i < 100; ++i) {
            clusters.assignment.push_back((level + 1) % 3);  // cluster ids scrambled
            pts.push_back(centers[level] + Complex{0.01 * rng.normal(), 0.01 * rng.normal()});
            preps.push_back(level);
        }
    }
    clusters.sizes = {100, 100, 100};
    clusters.centroids[1] = centers[0];
    clusters.centroids[2] = centers[1];
    clusters.centroids[0] = centers[2];

    const auto map = assign_labels(clusters, pts, preps);
    CHECK(map[1] == 0);
    CHECK(map[2] == 1);
    CHECK(map[0] == 2);
}

TEST_CASE("empty cluster is rejected") {
    SpectralResult clusters;
    clusters.assignment = {0, 0, 1, 1};
    clusters.sizes = {2, 2, 0};
    std::vector<Complex> pts(4, Complex{0, 0});
    std::vector<int> preps = {0, 0, 1, 1};
    CHECK_THROWS_AS(assign_labels(clusters, pts, preps), DataError);
}

TEST_CASE("subsample bounds are validated") {
    std::vector<Complex> pts = {{0, 0}, {1, 0}, {2, 0}, {3, 0}};
    CHECK_THROWS_AS(spectral_cluster(pts, 2, 1), ConfigError);
    CHECK_THROWS_AS(spectral_cluster(pts, 5, 1), ConfigError);
}
