#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rlm/verify.hpp"

#include <json.hpp>

#include <cmath>
#include <vector>

using namespace rlm;

TEST_CASE("rubo at the degenerate identity instance") {
    const Vector uniform = (Vector(2) << 0.5, 0.5).finished();
    const RuboReport report = check_rubo(uniform, uniform, Vector::Zero(2));
    CHECK(report.e_reward == 0.0);
    CHECK(report.kl_div == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(report.ln_partition == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(report.slack == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(report.holds);
}

TEST_CASE("rubo arithmetic on the concentrated instance") {
    const Vector pi = (Vector(2) << 1.0, 0.0).finished();
    const Vector beta = (Vector(2) << 0.8, 0.2).finished();
    const Vector reward = (Vector(2) << 0.5, 0.0).finished();
    const RuboReport report = check_rubo(pi, beta, reward);
    CHECK(report.e_reward == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(report.kl_div == doctest::Approx(std::log(1.0 / 0.8)).epsilon(1e-12));
    CHECK(report.ln_partition ==
          doctest::Approx(std::log(0.8 * std::exp(0.5) + 0.2)).epsilon(1e-12));
    CHECK(report.ln_partition == doctest::Approx(0.4180370928606561).epsilon(1e-9));
    CHECK(report.slack == doctest::Approx(0.22314355131420976 + 0.4180370928606561 - 0.5).epsilon(1e-9));
    CHECK(report.holds);
}

TEST_CASE("rubo holds on random instances") {
    RngStream rng(500);
    for (int i = 0; i < 2000; ++i) {
        const TableInstance inst = random_table_instance(rng);
        CHECK(check_rubo(inst.pi, inst.beta, inst.reward).holds);
    }
}

TEST_CASE("optimality identity on constructed and control instances") {
    CHECK(check_optimality_identity(1.0, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(check_optimality_identity(0.5, std::log(2.0)) == doctest::Approx(0.0).epsilon(1e-15));
    // negative control: mismatched pair leaves a visible residual
    CHECK(check_optimality_identity(0.9, 0.2) == doctest::Approx(0.0946394843421737).epsilon(1e-9));
    CHECK(check_optimality_identity(0.9, 0.2) > 1e-6);
    // below 1/e no reward in [0,1] can close the identity
    CHECK_THROWS_AS(check_optimality_identity(0.2, 1.0), std::invalid_argument);
}

TEST_CASE("improvement report on the worked instances") {
    // pi at the tilt of a Z=1 instance: delta = -H <= 0
    const Vector beta = (Vector(3) << 0.5, 0.5, 0.0).finished();
    const Vector reward = (Vector(3) << 0.0, 0.0, 1.0).finished();
    const ImprovementReport at_tilt = check_improvement(beta, beta, reward);
    CHECK(at_tilt.delta == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
    CHECK(at_tilt.tv_to_tilt == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(at_tilt.consistent);

    const Vector pi2 = (Vector(2) << 1.0, 0.0).finished();
    const Vector beta2 = (Vector(2) << 0.8, 0.2).finished();
    const Vector reward2 = (Vector(2) << 0.5, 0.0).finished();
    const ImprovementReport pos = check_improvement(pi2, beta2, reward2);
    CHECK(pos.delta == doctest::Approx(0.5 + std::log(0.8)).epsilon(1e-12));
    CHECK(pos.tv_to_tilt == doctest::Approx(0.1316675616678670).epsilon(1e-9));
    CHECK(pos.consistent);
}

TEST_CASE("improvement consistency over random instances") {
    RngStream rng(321);
    int positive = 0;
    for (int i = 0; i < 2000; ++i) {
        const TableInstance inst = random_table_instance(rng);
        const ImprovementReport report = check_improvement(inst.pi, inst.beta, inst.reward);
        CHECK(report.consistent);
        if (report.delta > 0) ++positive;
    }
    CHECK(positive > 0);  // the generator must exercise the non-vacuous branch
}

TEST_CASE("entropy scaling identity") {
    const Vector half = (Vector(2) << 0.5, 0.5).finished();
    CHECK(check_entropy_scaling(half, 1.0) < 1e-12);
    // both sides evaluate to e * ln 2
    CHECK(std::exp(1.0) * std::log(2.0) == doctest::Approx(1.8841693853637200).epsilon(1e-9));
    CHECK(check_entropy_scaling(half, 0.0) < 1e-15);
    const Vector point = (Vector(3) << 0.0, 1.0, 0.0).finished();
    CHECK(check_entropy_scaling(point, 0.7) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("dominance verdicts") {
    const ObjectivePoint a{-1.0, 0.8, 0};
    const ObjectivePoint b{-1.5, 0.5, 0};
    CHECK(check_dominance(a, b).a_dominates_b);
    CHECK_FALSE(check_dominance(b, a).a_dominates_b);

    const ObjectivePoint c{-1.0, 0.5, 0};
    const ObjectivePoint d{-1.5, 0.8, 0};
    CHECK_FALSE(check_dominance(c, d).a_dominates_b);
    CHECK_FALSE(check_dominance(d, c).a_dominates_b);

    CHECK_FALSE(check_dominance(a, a).a_dominates_b);
}

TEST_CASE("non-dominated marking agrees with a brute-force scan") {
    RngStream rng(9);
    std::vector<ObjectivePoint> points;
    for (int i = 0; i < 40; ++i)
        points.push_back({-3.0 * rng.next_double(), rng.next_double(), 0});
    points.push_back(points[5]);  // exact duplicate

    const std::vector<bool> marked = mark_non_dominated(points);

    for (std::size_t j = 0; j < points.size(); ++j) {
        bool expect = true;
        for (std::size_t i = 0; i < points.size() && expect; ++i) {
            if (i == j) continue;
            const bool no_worse = points[i].e_log_beta >= points[j].e_log_beta &&
                                  points[i].e_reward >= points[j].e_reward;
            const bool strict = points[i].e_log_beta > points[j].e_log_beta ||
                                points[i].e_reward > points[j].e_reward;
            if (no_worse && strict) expect = false;
            if (i < j && points[i].e_log_beta == points[j].e_log_beta &&
                points[i].e_reward == points[j].e_reward)
                expect = false;
        }
        CHECK(marked[j] == expect);
    }
    // the later copy of an exact duplicate is never kept
    CHECK(marked[40] == false);

    // and in isolation, a duplicated point keeps exactly its first occurrence
    const std::vector<ObjectivePoint> twins{{-1.0, 0.4, 0}, {-1.0, 0.4, 0}};
    const std::vector<bool> twin_marks = mark_non_dominated(twins);
    CHECK(twin_marks[0] == true);
    CHECK(twin_marks[1] == false);
}

TEST_CASE("suite passes on a reduced configuration") {
    SuiteConfig config;
    config.rubo_instances = 300;
    config.z1_instances = 50;
    config.decomposition_instances = 100;
    config.optimality_instances = 20;
    config.improvement_instances = 300;
    config.entropy_scaling_instances = 100;
    config.tilt_instances = 10;
    config.tilt_perturbations = 20;
    config.dropout_instances = 100;
    const SuiteReport report = run_suite(config);
    CHECK(report.all_passed());
    CHECK(report.checks.size() == 9);

    const auto doc = suite_report_json(report);
    CHECK(doc.at("all_passed").get<bool>());
    CHECK(doc.at("checks").size() == report.checks.size());
    CHECK(suite_report_text(report).find("all checks passed") != std::string::npos);
}

TEST_CASE("injected max-dropping dropout is caught by the suite") {
    SuiteConfig config;
    config.rubo_instances = 10;
    config.z1_instances = 5;
    config.decomposition_instances = 5;
    config.optimality_instances = 5;
    config.improvement_instances = 10;
    config.entropy_scaling_instances = 5;
    config.tilt_instances = 2;
    config.tilt_perturbations = 5;
    config.dropout_instances = 200;
    config.mutate_dropout_drop_max = true;
    const SuiteReport report = run_suite(config);
    CHECK_FALSE(report.all_passed());
    bool dropout_failed = false;
    for (const auto& check : report.checks)
        if (check.name == "dropout_contracts" && !check.passed()) dropout_failed = true;
    CHECK(dropout_failed);
}

TEST_CASE("zero instances yield an empty passing report") {
    SuiteConfig config;
    config.rubo_instances = 0;
    config.z1_instances = 0;
    config.decomposition_instances = 0;
    config.optimality_instances = 0;
    config.improvement_instances = 0;
    config.entropy_scaling_instances = 0;
    config.tilt_instances = 0;
    config.dropout_instances = 0;
    const SuiteReport report = run_suite(config);
    CHECK(report.checks.empty());
    CHECK(report.all_passed());
}
