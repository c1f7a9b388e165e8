#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "selfnorm/applications.hpp"
#include "selfnorm/bounds.hpp"
#include "selfnorm/errors.hpp"

using namespace selfnorm;

namespace {

McConfig mc(std::uint64_t n_rep, std::uint64_t seed = 1) {
    McConfig c;
    c.n_rep = n_rep;
    c.master_seed = seed;
    return c;
}

PointSet points(std::vector<double> coords) { return PointSet{2, std::move(coords)}; }

}  // namespace

TEST_CASE("t statistic") {
    const std::vector<double> s{1.0, 2.0, 3.0};
    CHECK(t_statistic(s) == doctest::Approx(2.0 * std::sqrt(3.0)));
    CHECK_THROWS_AS(t_statistic(std::vector<double>{1.0}), DomainError);
    CHECK_THROWS_AS(t_statistic(std::vector<double>{2.0, 2.0, 2.0}), DegenerateError);
    CHECK(t_ratio_level(1.0, 10) == doctest::Approx(1.0));
    CHECK(t_ratio_level(2.0, 10) == doctest::Approx(2.0 * std::sqrt(10.0 / 13.0)));
}

TEST_CASE("t event equals the self-normalized event") {
    const std::vector<double> s{0.5, 1.5, -0.2, 0.9};
    const auto pair = t_event_equivalence(s, 1.0);
    CHECK(pair.t_event == pair.ratio_event);
    CHECK_THROWS_AS(t_event_equivalence(s, 2.0), DomainError);   // x >= sqrt(n)
    CHECK_THROWS_AS(t_event_equivalence(s, -1.0), DomainError);
    CHECK_THROWS_AS(t_event_equivalence(std::vector<double>{0.0, 0.0}, 0.5), DegenerateError);

    const std::vector<double> grid{0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    const auto sweep = t_equivalence_sweep(10, grid, 20000, 5);
    CHECK(sweep.samples == 20000);
    CHECK(sweep.checks == 20000 * grid.size());
    CHECK(sweep.disagreements == 0);
    CHECK(sweep.t_hits > 0);
}

TEST_CASE("verify_tstat") {
    const std::vector<double> xs{1.0, 2.0, 3.0}, Ms{1.0, 2.0};
    const auto pts = verify_tstat(DifferenceModel::rademacher(), 20, xs, Ms, 2.0, mc(20000));
    CHECK(pts.size() == xs.size() * Ms.size());
    for (const auto& p : pts) {
        CHECK(p.verdict.status != VerdictStatus::violation_evidence);
        RateInputs in;
        in.x = p.x;
        in.n = 20;
        in.M = p.M;
        CHECK(p.bound == doctest::Approx(evaluate_bound(BoundSpec(BoundKind::thm31_tstat, in))));
    }
    CHECK_THROWS_AS(verify_tstat(DifferenceModel::scaled_two_point(2.0 / 3.0, 1.0, -2.0), 20, xs, Ms, 2.0, mc(1000)),
                    ValidationError);
}

TEST_CASE("least squares") {
    const auto run = make_regression_run(0.7, {1.0, -0.5, 0.25}, {0.1, -0.2, 0.05});
    CHECK(run.obs[0] == doctest::Approx(0.8));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        num += run.phi[i] * run.eps[i];
        den += run.phi[i] * run.phi[i];
    }
    CHECK(std::abs((ls_estimate(run) - 0.7) - num / den) <= 1e-12);
    CHECK_THROWS_AS(ls_estimate(make_regression_run(0.7, {0.0, 0.0}, {0.1, 0.2})), DegenerateError);

    RegressionConfig cfg;
    cfg.theta = 0.3;
    cfg.eps = DifferenceModel::gaussian(0.5);
    cfg.n = 40;
    for (std::uint64_t r = 0; r < 50; ++r) {
        const auto sim = simulate_regression(cfg, ReplicateId{2, r});
        double nm = 0.0, dn = 0.0;
        for (std::size_t i = 0; i < cfg.n; ++i) {
            CHECK(std::abs(sim.phi[i]) <= 1.0);
            nm += sim.phi[i] * sim.eps[i];
            dn += sim.phi[i] * sim.phi[i];
        }
        CHECK(std::abs((ls_estimate(sim) - cfg.theta) - nm / dn) <= 1e-12);
    }
}

TEST_CASE("regression validation") {
    RegressionConfig cfg;
    cfg.eps = DifferenceModel::gaussian(1.0);  // not bounded above
    cfg.phi = RegressorModel::constant(2.0);
    cfg.n = 0;
    try {
        cfg.validate();
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.issues().size() == 3);
    }
}

TEST_CASE("verify_regression") {
    RegressionConfig cfg;
    cfg.theta = 0.5;
    cfg.eps = DifferenceModel::symmetric_mixture({1.0}, {0.1});
    cfg.phi = RegressorModel::constant(1.0);
    cfg.n = 10;
    CHECK(cfg.sigma() == doctest::Approx(0.1));
    CHECK(cfg.y() == doctest::Approx(0.1));

    RegressionGrid grid;
    grid.x = {0.0, 0.015, 0.035};  // off the lattice |sum eps| / n
    const auto p32 = verify_regression(RegressionTheorem::thm32, cfg, grid, mc(20000));
    REQUIRE(p32.size() == 3);
    CHECK(p32[0].bound == doctest::Approx(2.0));
    CHECK(p32[0].verdict.status == VerdictStatus::vacuous);
    for (const auto& p : p32) {
        REQUIRE(p.exact.has_value());
        CHECK(p.verdict.estimate.ci_lo <= *p.exact);
        CHECK(p.verdict.estimate.ci_hi >= *p.exact);
        CHECK(p.verdict.status != VerdictStatus::violation_evidence);
    }
    // |theta_hat - theta| = |mean of eps| with phi = 1
    CHECK(*p32[1].exact == doctest::Approx(exact_regression_tail(10, 0.1, 0.015)));

    grid.x = {0.05, 0.1, 0.2};
    grid.b = std::sqrt(10.0);
    const auto p33 = verify_regression(RegressionTheorem::thm33, cfg, grid, mc(20000));
    CHECK(p33.size() == grid.x.size() * grid.M.size());
    for (const auto& p : p33) {
        REQUIRE(p.exact.has_value());
        CHECK(p.verdict.estimate.ci_lo <= *p.exact);
        CHECK(p.verdict.estimate.ci_hi >= *p.exact);
        CHECK(p.verdict.status != VerdictStatus::violation_evidence);
    }
}

TEST_CASE("tour lengths") {
    CHECK(held_karp_tour(points({0, 0, 1, 0, 0, 1})) == doctest::Approx(2.0 + std::sqrt(2.0)));
    CHECK(held_karp_tour(points({0, 0, 1, 1, 1, 0, 0, 1})) == doctest::Approx(4.0));
    CHECK(held_karp_tour(points({0, 0, 3, 4})) == doctest::Approx(10.0));
    CHECK_THROWS_AS(held_karp_tour(points({0.5, 0.5})), DomainError);
    for (std::uint64_t r = 0; r < 20; ++r) {
        const auto pts = uniform_points(10, 2, 4, r);
        CHECK(pts.size() == 10);
        CHECK(held_karp_tour(pts) <= two_opt_tour(pts) + 1e-12);
        CHECK(tsp_tour_length(pts).exact);
    }
    const auto big = tsp_tour_length(uniform_points(13, 2, 4, 0));
    CHECK_FALSE(big.exact);
    CHECK(big.length > 0.0);
}

TEST_CASE("TSP martingale differences") {
    const auto pts = uniform_points(3, 2, 8, 0);
    const auto md = tsp_martingale_diffs(pts, 2000, 3);
    REQUIRE(md.cond_mean.size() == 4);
    REQUIRE(md.diffs.size() == 3);
    CHECK(md.cond_mean[3] == md.tour);
    CHECK(md.tour == doctest::Approx(held_karp_tour(pts)));
    const double sum = std::accumulate(md.diffs.begin(), md.diffs.end(), 0.0);
    CHECK(sum == doctest::Approx(md.tour - md.cond_mean[0]).epsilon(1e-12));
    CHECK_THROWS_AS(tsp_martingale_diffs(uniform_points(13, 2, 8, 0), 2000, 3), SizeError);
    CHECK_THROWS_AS(tsp_martingale_diffs(pts, 999, 3), DomainError);

    TspConfig cfg;
    cfg.n = 8;
    cfg.instances = 100;
    cfg.inner_rep = 1000;
    cfg.mean_rep = 20000;
    cfg.t_grid = {0.5, 2.0};
    cfg.seed = 12;
    const auto v = verify_tsp(cfg);
    CHECK(v.reconciled >= 95);
    CHECK(v.negative_fraction.size() == 8);
    CHECK(v.points.size() == 2);
    CHECK(v.window_lo <= v.window_hi);
    for (const auto& p : v.points) CHECK(p.verdict.status != VerdictStatus::violation_evidence);
}

TEST_CASE("write_points_csv") {
    const auto path = (std::filesystem::temp_directory_path() / "selfnorm_points_test.csv").string();
    write_points_csv(points({0.25, 0.5, 1, 0}), path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == "x0,x1\n0.25,0.5\n1,0\n");
    std::filesystem::remove(path);
}
