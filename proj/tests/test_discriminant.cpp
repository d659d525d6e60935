#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "qrd/discriminant.hpp"
#include "qrd/errors.hpp"
#include "qrd/rng.hpp"

using namespace qrd;

TEST_CASE("well-separated unit blobs classify almost perfectly") {
    PhiloxRng rng(21, 0);
    std::vector<std::array<double, 2>> x;
    std::vector<int> y;
    auto blob = [&](double cx, double cy, int label, int count) {
        for (int i = 0; i < count; ++i) {
            x.push_back({cx + rng.normal(), cy + rng.normal()});
            y.push_back(label);
        }
    };
    blob(-5.0, 0.0, 0, 2000);
    blob(5.0, 0.0, 1, 2000);

    for (const auto kind : {DiscriminantKind::Lda, DiscriminantKind::Qda}) {
        DiscriminantModel m = train_discriminant(kind, x, y, 2);
        // decision boundary crosses near x = 0
        CHECK(classify(m, {-0.5, 0.0}) == 0);
        CHECK(classify(m, {0.5, 0.0}) == 1);

        // held-out accuracy
        int correct = 0;
        const int held = 4000;
        for (int i = 0; i < held; ++i) {
            const int label = i % 2;
            const double cx = label == 0 ? -5.0 : 5.0;
            const std::array<double, 2> p = {cx + rng.normal(), rng.normal()};
            if (classify(m, p) == label) ++correct;
        }
        CHECK(static_cast<double>(correct) / held >= 0.999);
    }
}

TEST_CASE("QDA reproduces LDA labels when per-class covariances are identical") {
    // class B is class A translated, so the sample covariances match exactly
    PhiloxRng rng(33, 0);
    std::vector<std::array<double, 2>> base;
    for (int i = 0; i < 500; ++i) {
        base.push_back({rng.normal() * 1.3, rng.normal() * 0.4 + 0.2 * rng.normal()});
    }
    std::vector<std::array<double, 2>> x;
    std::vector<int> y;
    for (const auto& p : base) {
        x.push_back(p);
        y.push_back(0);
        x.push_back({p[0] + 3.0, p[1] + 1.0});
        y.push_back(1);
    }
    DiscriminantModel lda = train_discriminant(DiscriminantKind::Lda, x, y, 2);
    DiscriminantModel qda = train_discriminant(DiscriminantKind::Qda, x, y, 2);
    PhiloxRng probe(34, 0);
    for (int i = 0; i < 2000; ++i) {
        const std::array<double, 2> p = {4.0 * probe.normal(), 4.0 * probe.normal()};
        CHECK(classify(lda, p) == classify(qda, p));
    }
}

TEST_CASE("a class with one sample is rejected") {
    std::vector<std::array<double, 2>> x = {{0, 0}, {0.1, 0}, {5, 5}};
    std::vector<int> y = {0, 0, 1};
    CHECK_THROWS_AS(train_discriminant(DiscriminantKind::Lda, x, y, 2), DataError);
}

TEST_CASE("three-class priors influence near-boundary points") {
    PhiloxRng rng(55, 0);
    std::vector<std::array<double, 2>> x;
    std::vector<int> y;
    auto blob = [&](double cx, double cy, int label, int count) {
        for (int i = 0; i < count; ++i) {
            x.push_back({cx + 0.5 * rng.normal(), cy + 0.5 * rng.normal()});
            y.push_back(label);
        }
    };
    blob(0, 0, 0, 300);
    blob(4, 0, 1, 300);
    blob(0, 4, 2, 30);
    DiscriminantModel m = train_discriminant(DiscriminantKind::Qda, x, y, 3);
    CHECK(classify(m, {0.1, 0.1}) == 0);
    CHECK(classify(m, {3.9, -0.1}) == 1);
    CHECK(classify(m, {0.0, 4.1}) == 2);
}
