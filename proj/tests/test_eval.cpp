#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qrd/errors.hpp"
#include "qrd/eval.hpp"
#include "qrd/rng.hpp"

using namespace qrd;

TEST_CASE("fidelity of simple confusion matrices") {
    Confusion ident{};
    for (int i = 0; i < 3; ++i) ident[i][i] = 10;
    CHECK(fidelity(ident) == 1.0);

    Confusion uniform{};
    for (auto& row : uniform)
        for (auto& c : row) c = 1;
    CHECK(fidelity(uniform) == doctest::Approx(1.0 / 3).epsilon(1e-12));

    Confusion mixed = {{{9, 1, 0}, {0, 8, 2}, {1, 0, 9}}};
    CHECK(fidelity(mixed) == doctest::Approx(26.0 / 30.0).epsilon(1e-12));

    Confusion zero{};
    CHECK_THROWS_AS(fidelity(zero), DataError);
}

TEST_CASE("fidelity composed with a confusion equals direct accuracy") {
    PhiloxRng rng(8, 0);
    std::vector<int> pred, truth;
    Confusion confusion{};
    int correct = 0;
    for (int i = 0; i < 5000; ++i) {
        const int t = static_cast<int>(rng.uniform_below(3));
        const int p = rng.uniform() < 0.8 ? t : static_cast<int>(rng.uniform_below(3));
        truth.push_back(t);
        pred.push_back(p);
        confusion[t][p] += 1;
        if (t == p) ++correct;
    }
    CHECK(fidelity(confusion) ==
          doctest::Approx(static_cast<double>(correct) / 5000.0).epsilon(1e-12));
}

TEST_CASE("geometric mean reproduces the published cumulative accuracies") {
    CHECK(std::abs(geomean_fidelity({0.971, 0.745, 0.923, 0.939, 0.969}) - 0.9052) <= 1e-4);
    CHECK(std::abs(geomean_fidelity({0.967, 0.728, 0.928, 0.932, 0.962}) - 0.8985) <= 1e-4);
    CHECK(geomean_fidelity({1.0, 1.0, 1.0, 1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(geomean_fidelity({0.9, 0.0}), DataError);
    CHECK_THROWS_AS(geomean_fidelity({0.9, -0.1}), DataError);
}

TEST_CASE("geometric mean is permutation invariant and agrees on equal entries") {
    CHECK(geomean_fidelity({0.7, 0.9, 0.8}) ==
          doctest::Approx(geomean_fidelity({0.9, 0.8, 0.7})).epsilon(1e-14));
    CHECK(geomean_fidelity({0.85, 0.85, 0.85, 0.85}) == doctest::Approx(0.85).epsilon(1e-12));
}

TEST_CASE("leakage precision and recall") {
    CHECK(leakage_metrics({2, 0, 2, 1}, {2, 0, 2, 1}) == std::pair{1.0, 1.0});
    CHECK(leakage_metrics({0, 1, 0}, {2, 1, 0}) == std::pair{1.0, 0.0});
    CHECK(leakage_metrics({2, 2, 0}, {2, 0, 2}) == std::pair{0.5, 0.5});
    // no true 2s and a false prediction: recall collapses to 0 by convention
    CHECK(leakage_metrics({2, 0}, {0, 0}).second == 0.0);
    CHECK(leakage_metrics({0, 0}, {0, 0}) == std::pair{1.0, 1.0});
    CHECK_THROWS_AS(leakage_metrics({0}, {0, 1}), DataError);
}

TEST_CASE("exact big-integer powers") {
    CHECK(pow_bigint(3, 0) == "1");
    CHECK(pow_bigint(3, 5) == "243");
    CHECK(pow_bigint(3, 10) == "59049");
    CHECK(pow_bigint(2, 5) == "32");
    CHECK(pow_bigint(3, 40) == "12157665459056928801");
    CHECK(pow_bigint(10, 30) == "1000000000000000000000000000000");
}

TEST_CASE("scaling table rows") {
    const auto rows = scaling_report({1, 5, 10}, {2, 3});
    REQUIRE(rows.size() == 6);

    // (1,2): single pair, one QMF + one RMF + one EMF
    CHECK(rows[0].input_size == 3);
    // (5,3)
    const auto& r53 = rows[4];
    CHECK(r53.input_size == 45);
    CHECK(r53.per_qubit_params == 1301);
    CHECK(r53.total_params == 6505);
    CHECK(r53.monolithic_outputs == "243");
    CHECK(r53.reference_params == 686000);
    const double ratio = static_cast<double>(r53.reference_params) / r53.total_params;
    CHECK(ratio >= 100.0);
    CHECK(ratio <= 110.0);
    // (10,3): per-qubit growth is quadratic in n
    const auto& r103 = rows[5];
    CHECK(r103.input_size == 90);
    CHECK(r103.per_qubit_params == 5176);
    CHECK(r103.monolithic_outputs == "59049");
    CHECK(r103.reference_params == 0);
    const double growth = static_cast<double>(r103.per_qubit_params) / r53.per_qubit_params;
    CHECK(growth >= 3.5);
    CHECK(growth <= 4.5);
}

TEST_CASE("per-qubit parameter count ratio approaches 4 as n doubles") {
    for (const int n : {8, 16, 32}) {
        const auto rows = scaling_report({n, 2 * n}, {3});
        const double ratio =
            static_cast<double>(rows[1].per_qubit_params) / rows[0].per_qubit_params;
        CHECK(ratio > 3.5);
        CHECK(ratio < 4.5);
    }
}
