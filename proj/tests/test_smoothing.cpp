#include <doctest.h>

#include <cmath>
#include <memory>

#include "enscert/smoothing.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace enscert;
using namespace enscert::smoothing;
using testutil::constant_logits;
using testutil::linear_two_class;

TEST_CASE("mc_class_frequencies basics") {
    numstats::RngStream rng(1, 0);
    const Classifier always2 = [](const Vector&) { return 2; };
    const auto counts = mc_class_frequencies(always2, {0.0}, 1.0, 500, 4, rng);
    CHECK(counts[2] == 500);
    CHECK(counts[0] + counts[1] + counts[3] == 0);

    const Classifier sign = [](const Vector& x) { return x[0] >= 0.0 ? 1 : 0; };
    numstats::RngStream rng2(2, 0);
    const int64_t m = 40000;
    const auto c2 = mc_class_frequencies(sign, {0.0}, 0.7, m, 2, rng2);
    CHECK(std::fabs(static_cast<double>(c2[1]) - m / 2.0) <= 3.0 * std::sqrt(m));
}

TEST_CASE("mc_class_frequencies matches the Gaussian projection closed form") {
    // Linear classifier w=(1,0), b=0 at x=(0.5,0), sigma=0.5: the top class
    // probability is Phi(0.5 / 0.5) = Phi(1).
    const Classifier lin = [](const Vector& x) { return x[0] >= 0.0 ? 0 : 1; };
    numstats::RngStream rng(3, 0);
    const int64_t m = 100000;
    const auto counts = mc_class_frequencies(lin, {0.5, 0.0}, 0.5, m, 2, rng);
    const double freq = static_cast<double>(counts[0]) / m;
    CHECK(std::fabs(freq - 0.841344746068543) < 0.004);
}

TEST_CASE("certify_ebs closed form when every draw hits the label") {
    const Classifier always0 = [](const Vector&) { return 0; };
    SmoothingSpec spec;
    spec.sigma = 0.5;
    spec.n0 = 20;
    spec.n = 100;
    spec.alpha = 0.001;
    numstats::RngStream rng(4, 0);
    const auto rec = certify_classifier_ebs(always0, 2, spec, {0.0}, 0, rng);
    CHECK(rec.prediction == 0);
    CHECK(rec.hits == 100);
    CHECK_FALSE(rec.abstain);
    CHECK(rec.correct);
    CHECK(std::fabs(rec.p_lower - std::pow(0.001, 0.01)) < 1e-10);
    // Frozen: sigma * quantile(0.001^(1/100)) with the bisection oracle.
    CHECK(std::fabs(rec.radius - 0.5 * 1.500475024121) < 1e-6);
}

TEST_CASE("certify_ebs abstains when the bound cannot clear one half") {
    // A coin-flip classifier at the decision boundary.
    const Classifier sign = [](const Vector& x) { return x[0] >= 0.0 ? 0 : 1; };
    SmoothingSpec spec;
    spec.sigma = 1.0;
    spec.n0 = 50;
    spec.n = 2000;
    spec.alpha = 0.001;
    numstats::RngStream rng(5, 0);
    const auto rec = certify_classifier_ebs(sign, 2, spec, {0.0}, 0, rng);
    CHECK(rec.abstain);
    CHECK(rec.radius == 0.0);
    CHECK(rec.p_lower <= 0.5);
}

TEST_CASE("certify_ebs radius tracks the true boundary distance of a linear model") {
    const Classifier lin = [](const Vector& x) { return x[0] >= 0.0 ? 0 : 1; };
    SmoothingSpec spec;
    spec.sigma = 0.5;
    spec.n0 = 100;
    spec.n = 100000;
    spec.alpha = 0.001;
    numstats::RngStream rng(6, 0);
    const auto rec = certify_classifier_ebs(lin, 2, spec, {0.5, 0.0}, 0, rng);
    CHECK_FALSE(rec.abstain);
    CHECK(rec.radius >= 0.45);
    CHECK(rec.radius <= 0.50);
}

TEST_CASE("certify_ebs wraps the whole ensemble") {
    // Two members disagree; the WE vote decides before smoothing.
    const auto m1 = constant_logits(2, {std::log(0.6), std::log(0.4)});
    const auto m2 = constant_logits(2, {std::log(0.3), std::log(0.7)});
    const auto ens = ensemble::EnsembleSpec::we({m1, m2}, {1.0, 1.0});
    SmoothingSpec spec;
    spec.sigma = 0.3;
    spec.n0 = 20;
    spec.n = 200;
    numstats::RngStream rng(7, 0);
    const auto rec = certify_ebs(ens, spec, {0.0, 0.0}, 1, rng);
    CHECK(rec.prediction == 1);  // weighted sums are constant: class 1 wins
    CHECK(rec.hits == 200);
}

TEST_CASE("certify_eas combines signed radii as (max + min) / 2") {
    // Member A is constantly correct; member B is a translated linear model,
    // correct with probability Phi(2) under the noise.
    const auto a = constant_logits(1, {std::log(99.0), 0.0});
    const auto b = linear_two_class({20.0}, 20.0);  // predicts 0 iff x > -1
    std::vector<model::MlpClassifier> members = {a, b};
    SmoothingSpec spec;
    spec.sigma = 0.5;
    spec.n0 = 100;
    spec.n = 5000;
    spec.alpha = 0.001;
    numstats::RngStream rng(8, 0);
    const auto res = certify_eas(members, spec, {0.0}, 0, rng);

    REQUIRE(res.signed_radii.size() == 2);
    const double hi = std::max(res.signed_radii[0], res.signed_radii[1]);
    const double lo = std::min(res.signed_radii[0], res.signed_radii[1]);
    CHECK(res.raw_radius == doctest::Approx(0.5 * (hi + lo)));
    CHECK(res.record.prediction == 0);
    CHECK(res.record.radius == doctest::Approx(std::max(res.raw_radius, 0.0)));
    // A's bound is at the k=n ceiling; B sits near Phi(2) ~ 0.977.
    CHECK(res.signed_radii[0] > res.signed_radii[1]);
    CHECK(res.signed_radii[1] > 0.0);
    // EAS can never beat its best member.
    CHECK(res.raw_radius <= hi);
    CHECK(res.raw_radius < hi);  // radii differ, so strictly below the best
}

TEST_CASE("certify_eas single member statistically matches certify_ebs") {
    const auto m = linear_two_class({4.0}, 2.0);
    std::vector<model::MlpClassifier> solo = {m};
    SmoothingSpec spec;
    spec.sigma = 0.4;
    spec.n0 = 100;
    spec.n = 20000;
    spec.alpha = 0.001;

    numstats::RngStream r1(9, 0), r2(9, 1);
    const auto eas = certify_eas(solo, spec, {0.3}, 0, r1);
    const auto ens = ensemble::EnsembleSpec::we({m}, {1.0});
    const auto ebs = certify_ebs(ens, spec, {0.3}, 0, r2);
    CHECK_FALSE(eas.record.abstain);
    CHECK_FALSE(ebs.abstain);
    // Paired MC runs: radii agree within 3 combined standard errors of the
    // binomial counts pushed through the radius map.
    const double p = static_cast<double>(ebs.hits) / spec.n;
    const double se_p = std::sqrt(p * (1.0 - p) / spec.n);
    const double slope = spec.sigma / numstats::std_normal_pdf(numstats::std_normal_quantile(p));
    const double tol = 3.0 * std::sqrt(2.0) * slope * se_p;
    CHECK(std::fabs(eas.record.radius - ebs.radius) <= tol);
}

TEST_CASE("compare_smoothing_strategies closed-form cases") {
    // p = 1 with shared mass p_ab: the combined probability 0.9 beats either
    // member's 0.8.
    auto cmp = compare_smoothing_strategies(0.8, 0.8, 0.7, 1.0, 1.0);
    CHECK(cmp.verdict == StrategyVerdict::EBSHigher);
    CHECK(cmp.r_ebs == doctest::Approx(1.281551565545).epsilon(1e-9));
    CHECK(cmp.r_ebs > cmp.r_eas);

    cmp = compare_smoothing_strategies(0.8, 0.7, 0.6, 0.5, 1.0);
    CHECK(cmp.verdict == StrategyVerdict::EASHigherOrEqual);
    CHECK(cmp.r_eas >= cmp.r_ebs);

    // Frozen direct evaluation: prob_G = 0.85, threshold exactly 0.6.
    cmp = compare_smoothing_strategies(0.85, 0.80, 0.70, 0.6, 1.0);
    CHECK(cmp.verdict == StrategyVerdict::Undetermined);
    CHECK(cmp.r_ebs == doctest::Approx(1.036433389494).epsilon(1e-9));
    CHECK(cmp.r_eas == doctest::Approx(0.939027311534).epsilon(1e-9));
}

TEST_CASE("compare_smoothing_strategies rejects bad probabilities") {
    CHECK_THROWS_AS(compare_smoothing_strategies(0.4, 0.8, 0.3, 0.5, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(compare_smoothing_strategies(0.8, 0.8, 0.9, 0.5, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(compare_smoothing_strategies(0.8, 0.8, 0.7, 1.5, 1.0),
                    std::invalid_argument);
    // Infeasible mass: p_ab far below p_a + p_b - 1 with p = 1.
    CHECK_THROWS_AS(compare_smoothing_strategies(0.95, 0.95, 0.0, 1.0, 1.0),
                    std::invalid_argument);
}

TEST_CASE("soft_confidence basics") {
    const auto constant = constant_logits(2, {std::log(3.0), 0.0});
    numstats::RngStream rng(10, 0);
    const Vector g = soft_confidence(constant, {0.1, -0.2}, 0.5, 200, rng);
    CHECK(g[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(0.25).epsilon(1e-12));

    numstats::RngStream rng2(10, 1);
    const auto m = linear_two_class({1.0, -0.5}, 0.3);
    const Vector tiny = soft_confidence(m, {0.4, 0.2}, 1e-12, 1, rng2);
    const Vector exact = m.confidences({0.4, 0.2});
    CHECK(std::fabs(tiny[0] - exact[0]) < 1e-9);
    CHECK(std::fabs(tiny[1] - exact[1]) < 1e-9);
}

TEST_CASE("soft_confidence is consistent across sample sizes") {
    const auto m = linear_two_class({2.0, 1.0}, -0.2);
    numstats::RngStream r1(11, 0), r2(11, 1);
    const Vector small = soft_confidence(m, {0.2, -0.1}, 0.5, 2000, r1);
    const Vector big = soft_confidence(m, {0.2, -0.1}, 0.5, 20000, r2);
    // Bernoulli-style bound on the component standard error.
    const double se = std::sqrt(0.25 / 2000.0) + std::sqrt(0.25 / 20000.0);
    CHECK(std::fabs(small[0] - big[0]) <= 3.0 * se);
    double s = 0.0;
    for (double v : big) s += v;
    CHECK(std::fabs(s - 1.0) < 1e-9);
}

TEST_CASE("smoothness_probe returns zero for a linear function") {
    const NoisyScalar lin = [](const Vector& x) {
        return std::make_pair(0.7 * x[0] - 0.2 * x[1], 0.0);
    };
    const auto res = smoothness_probe(lin, {0.3, 0.4}, {1.0, 0.0}, 0.05);
    CHECK(std::fabs(res.second_difference) < 1e-9);
    CHECK(res.std_error == 0.0);
}

TEST_CASE("smoothness_probe recovers the step-model curvature at x = sigma") {
    // Hard-smoothed 1-D step: g(x) = Phi(x / sigma); |g''(sigma)| =
    // 1 / (sqrt(2 pi e) sigma^2).
    const double sigma = 0.6;
    auto state = std::make_shared<numstats::RngStream>(77, 0);
    const int64_t m = 1200000;
    const NoisyScalar g = [state, sigma, m](const Vector& x) {
        int64_t hits = 0;
        for (int64_t i = 0; i < m; ++i) {
            if (x[0] + sigma * state->normal() >= 0.0) ++hits;
        }
        const double p = static_cast<double>(hits) / m;
        return std::make_pair(p, std::sqrt(std::max(p * (1 - p), 1e-12) / m));
    };
    const auto res = smoothness_probe(g, {sigma}, {1.0}, sigma / 20.0);
    const double want = 1.0 / (std::sqrt(2.0 * M_PI * std::exp(1.0)) * sigma * sigma);
    CHECK(std::fabs(std::fabs(res.second_difference) - want) <= 3.0 * res.std_error);
    CHECK(std::fabs(res.second_difference) >= 0.5 * want);
}

TEST_CASE("soft-smoothed MLP curvature stays under 2 / sigma^2") {
    numstats::RngStream mrng(12, 0);
    const auto m = model::MlpClassifier::init_random(2, {16}, 3, mrng);
    const double sigma = 0.5;
    numstats::RngStream noise(12, 1);
    const auto est = make_soft_confidence_estimator(m, 0, sigma, 40000, noise);
    numstats::RngStream xs(12, 2);
    for (int rep = 0; rep < 5; ++rep) {
        const Vector x = numstats::sample_gaussian(xs, 2, 1.0);
        const double angle = xs.uniform() * 2.0 * M_PI;
        const Vector u = {std::cos(angle), std::sin(angle)};
        const auto res = smoothness_probe(est, x, u, sigma / 20.0);
        CHECK(std::fabs(res.second_difference) <= 2.0 / (sigma * sigma) + 4.0 * res.std_error);
    }
}

TEST_CASE("certified_accuracy_curve closed cases") {
    std::vector<CertificationRecord> recs(4);
    for (auto& r : recs) {
        r.correct = true;
        r.abstain = false;
        r.radius = 1.0;
    }
    const double grid[] = {0.0, 0.5, 1.0, 1.5};
    auto curve = certified_accuracy_curve(recs, grid);
    CHECK(curve.accuracy == std::vector<double>({1.0, 1.0, 1.0, 0.0}));
    CHECK(curve.acr == doctest::Approx(1.0));

    for (auto& r : recs) {
        r.abstain = true;
        r.radius = 0.0;
        r.correct = false;
    }
    curve = certified_accuracy_curve(recs, grid);
    CHECK(curve.accuracy == std::vector<double>({0.0, 0.0, 0.0, 0.0}));
    CHECK(curve.acr == 0.0);

    CHECK_THROWS_AS(certified_accuracy_curve({}, grid), std::invalid_argument);
}

TEST_CASE("certified_accuracy_curve matches a hand-computed table") {
    // id: radius / abstain / correct
    struct Row {
        double radius;
        bool abstain;
        bool correct;
    };
    const Row rows[] = {
        {0.9, false, true}, {0.4, false, true},  {0.0, true, false}, {1.2, false, false},
        {0.7, false, true}, {0.05, false, true}, {0.0, true, false}, {2.0, false, true},
        {0.3, false, false}, {1.1, false, true},
    };
    std::vector<CertificationRecord> recs;
    for (const Row& r : rows) {
        CertificationRecord rec;
        rec.radius = r.radius;
        rec.abstain = r.abstain;
        rec.correct = r.correct;
        recs.push_back(rec);
    }
    const double grid[] = {0.0, 0.25, 0.5, 1.0};
    const auto curve = certified_accuracy_curve(recs, grid);
    // Correct & not abstaining: radii {0.9, 0.4, 0.7, 0.05, 2.0, 1.1}.
    CHECK(curve.accuracy[0] == doctest::Approx(0.6));
    CHECK(curve.accuracy[1] == doctest::Approx(0.5));
    CHECK(curve.accuracy[2] == doctest::Approx(0.4));
    CHECK(curve.accuracy[3] == doctest::Approx(0.2));
    // ACR: (0.9 + 0.4 + 0.7 + 0.05 + 2.0 + 1.1) / 10.
    CHECK(curve.acr == doctest::Approx(0.515));
}

TEST_CASE("record CSV round trip") {
    std::vector<CertificationRecord> recs(2);
    recs[0] = {7, 1, 1, 9900, 10000, 0.987654321, 1.1217, false, true};
    recs[1] = {8, 0, 1, 4000, 10000, 0.39, 0.0, true, false};
    const std::string csv = records_to_csv(recs);
    const auto back = records_from_csv(csv);
    REQUIRE(back.size() == 2);
    CHECK(back[0].input_id == 7);
    CHECK(back[0].p_lower == recs[0].p_lower);
    CHECK(back[0].radius == recs[0].radius);
    CHECK(back[0].correct);
    CHECK(back[1].abstain);
    CHECK_FALSE(back[1].correct);
    CHECK_THROWS_AS(records_from_csv("bad header\n"), std::invalid_argument);
}

TEST_CASE("radius is monotone in the hit count") {
    double prev = -1.0;
    for (int64_t k = 5001; k <= 10000; k += 499) {
        const double pl = numstats::clopper_pearson_lower(k, 10000, 0.001);
        if (pl <= 0.5) continue;
        const double r = 0.5 * numstats::std_normal_quantile(pl);
        CHECK(r > prev);
        prev = r;
    }
    CHECK(prev > 0.0);
}
