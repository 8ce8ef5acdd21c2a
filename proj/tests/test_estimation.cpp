#include <doctest.h>

#include <vector>

#include "sae/errors.hpp"
#include "sae/estimation.hpp"
#include "test_support.hpp"

using namespace sae;
using namespace sae::testing;

namespace {

// Independent straight-line version of the two-stage estimator for p = 2
// (intercept + slope), using explicit 2x2 algebra only.
struct OracleFit {
    double b0, b1, s;
};

OracleFit oracle_fit(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& D) {
    const std::size_t m = x.size();
    double sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sx += x[i];
        sxx += x[i] * x[i];
        sy += y[i];
        sxy += x[i] * y[i];
    }
    const double det = m * sxx - sx * sx;
    const double ob1 = (m * sxy - sx * sy) / det;
    const double ob0 = (sy - ob1 * sx) / m;
    double rss = 0, adj = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double e = y[i] - ob0 - ob1 * x[i];
        rss += e * e;
        const double lev = (sxx - 2 * x[i] * sx + m * x[i] * x[i]) / det;
        adj += D[i] * (1 - lev);
    }
    double s = (rss - adj) / (m - 2.0);
    if (s < 0) s = 0;
    double w = 0, wx = 0, wxx = 0, wy = 0, wxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double wi = 1.0 / (s + D[i]);
        w += wi;
        wx += wi * x[i];
        wxx += wi * x[i] * x[i];
        wy += wi * y[i];
        wxy += wi * x[i] * y[i];
    }
    const double wdet = w * wxx - wx * wx;
    return {(wxx * wy - wx * wxy) / wdet, (w * wxy - wx * wy) / wdet, s};
}

OracleFit oracle_fit(const AreaDataset& data) {
    std::vector<double> x, y, D;
    for (const auto& a : data.areas()) {
        x.push_back(a.x(1));
        y.push_back(a.y);
        D.push_back(a.D);
    }
    return oracle_fit(x, y, D);
}

}  // namespace

TEST_SUITE("estimation") {

TEST_CASE("fit: exact regression line truncates sigma at zero") {
    std::vector<AreaObservation> areas;
    for (int i = 0; i < 8; ++i) areas.push_back(area(i + 1, 2.0 + 0.5 * i, {1.0, double(i)}, 3.0));
    const FitResult f = fit(AreaDataset(areas));
    CHECK(f.delta_hat.sigma_u2 == 0.0);
    CHECK(f.sigma_truncated);
    CHECK(f.delta_hat.beta(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.delta_hat.beta(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fit: intercept-only equal D gives the sample mean") {
    const std::vector<double> y = {3, 9, 1, 14, 6, 7, 2};
    const FitResult f = fit(balanced_intercept(y, 2.0));
    double mean = 0;
    for (double v : y) mean += v;
    mean /= y.size();
    CHECK(f.delta_hat.beta(0) == doctest::Approx(mean).epsilon(1e-13));
    CHECK(f.delta_hat.sigma_u2 > 0.0);
    CHECK_FALSE(f.sigma_truncated);
    CHECK(f.gls_cov_beta(0, 0) == doctest::Approx((f.delta_hat.sigma_u2 + 2.0) / 7.0).epsilon(1e-12));
}

TEST_CASE("fit: preconditions") {
    std::vector<AreaObservation> areas;
    for (int i = 0; i < 5; ++i) areas.push_back(area(i + 1, i, {1.0, 2.0}, 1.0));  // collinear
    CHECK_THROWS_AS(fit(AreaDataset(areas)), NumericError);
}

TEST_CASE("fit matches the straight-line oracle on simulated corn data") {
    const auto design = corn_design();
    const RandomStream root(31);
    const std::size_t N = 2000;
    double sum = 0, sum_oracle = 0, sq_oracle = 0;
    for (std::size_t r = 0; r < N; ++r) {
        RandomStream rng = root.child(r);
        const auto sim = simulate_dataset(corn_truth(), design, rng);
        const FitResult f = fit(sim.data);
        const OracleFit o = oracle_fit(sim.data);
        CHECK(f.delta_hat.sigma_u2 == doctest::Approx(o.s).epsilon(1e-9).scale(1.0));
        CHECK(f.delta_hat.beta(0) == doctest::Approx(o.b0).epsilon(1e-9));
        CHECK(f.delta_hat.beta(1) == doctest::Approx(o.b1).epsilon(1e-9).scale(1.0));
        CHECK(f.delta_hat.sigma_u2 >= 0.0);
        sum += f.delta_hat.sigma_u2;
        sum_oracle += o.s;
        sq_oracle += o.s * o.s;
    }
    const double mean_oracle = sum_oracle / N;
    const double se = std::sqrt((sq_oracle / N - mean_oracle * mean_oracle) / N);
    CHECK(std::abs(sum / N - mean_oracle) <= 3.0 * se);
}

TEST_CASE("fit: GLS equals OLS when sigma_u2 + D is constant") {
    // Any response, equal D: GLS weights are constant.
    std::vector<AreaObservation> areas;
    RandomStream rng(4);
    for (int i = 0; i < 9; ++i) areas.push_back(area(i + 1, rng.normal(0, 10), {1.0, double(i * i)}, 5.0));
    const AreaDataset data(areas);
    const FitResult f = fit(data);
    const MatrixXd X = data.design_matrix();
    const VectorXd ols = (X.transpose() * X).ldlt().solve(X.transpose() * data.response());
    CHECK((f.delta_hat.beta - ols).norm() <= 1e-10 * ols.norm());
}

TEST_CASE("fit: shift equivariance with an intercept") {
    RandomStream rng(6);
    for (int t = 0; t < 20; ++t) {
        std::vector<AreaObservation> areas;
        for (int i = 0; i < 10; ++i) {
            areas.push_back(area(i + 1, rng.normal(20, 15), {1.0, rng.normal(0, 2)}, 1.0 + i));
        }
        const AreaDataset data(areas);
        const double c = rng.normal(0, 50);
        const FitResult a = fit(data);
        const FitResult b = fit(data.with_response(data.response().array() + c));
        CHECK(b.delta_hat.beta(0) == doctest::Approx(a.delta_hat.beta(0) + c).epsilon(1e-10));
        CHECK(b.delta_hat.beta(1) == doctest::Approx(a.delta_hat.beta(1)).epsilon(1e-8).scale(1.0));
        CHECK(b.delta_hat.sigma_u2 == doctest::Approx(a.delta_hat.sigma_u2).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("jackknife_fits: one refit per deleted area, bit-for-bit") {
    RandomStream rng(12);
    const auto sim = simulate_dataset(corn_truth(), corn_design(), rng);
    const auto jack = jackknife_fits(sim.data);
    REQUIRE(jack.size() == sim.data.m());
    for (std::size_t u = 0; u < jack.size(); ++u) {
        CHECK(jack[u] == fit(sim.data.without(u)).delta_hat);
        const OracleFit o = oracle_fit(sim.data.without(u));
        CHECK(jack[u].sigma_u2 == doctest::Approx(o.s).epsilon(1e-9).scale(1.0));
        CHECK(jack[u].beta(1) == doctest::Approx(o.b1).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("jackknife_fits: exchangeable areas give identical refits") {
    std::vector<AreaObservation> areas;
    for (int i = 0; i < 6; ++i) areas.push_back(area(i + 1, 4.0, {1.0}, 2.0));
    const AreaDataset data(areas);
    const auto jack = jackknife_fits(data);
    for (const auto& d : jack) CHECK(d == jack.front());
    std::vector<AreaObservation> fewer(areas.begin(), areas.end() - 1);
    CHECK(jack.front() == fit(AreaDataset(fewer)).delta_hat);
}

TEST_CASE("jackknife_fits: m = p + 3 boundary and below") {
    const AreaDataset ok = balanced_intercept({1, 5, 2, 7}, 1.0);  // p = 1, m = 4
    CHECK(jackknife_fits(ok).size() == 4);
    const AreaDataset small = balanced_intercept({1, 5, 2}, 1.0);
    CHECK_THROWS_AS(jackknife_fits(small), DataError);
}

}
