// Acceptance suite: runs every acceptance criterion end to end and prints one
// pass/fail line per criterion. Returns the number of failed criteria.
//
// Usage: acceptance [criterion numbers...]   (no arguments runs everything)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "enscert/autodiff.hpp"
#include "enscert/data.hpp"
#include "enscert/ensemble.hpp"
#include "enscert/model.hpp"
#include "enscert/numstats.hpp"
#include "enscert/smoothing.hpp"
#include "enscert/statsim.hpp"
#include "enscert/training.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace enscert;
namespace fs = std::filesystem;

namespace {

struct CheckLog {
    std::ostringstream out;
    bool ok = true;

    void require(bool cond, const std::string& what) {
        out << "    [" << (cond ? "ok" : "FAIL") << "] " << what << "\n";
        ok = ok && cond;
    }
    void note(const std::string& what) { out << "    [....] " << what << "\n"; }
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Criterion 1: closed-form certification soundness on random linear models.
// ---------------------------------------------------------------------------
bool criterion_1(CheckLog& log) {
    const int instances = 200;
    smoothing::SmoothingSpec spec;
    spec.n0 = 100;
    spec.n = 100000;
    spec.alpha = 0.001;

    int violations = 0;
    int abstentions = 0;
    double ratio_sum = 0.0;
    for (int i = 0; i < instances; ++i) {
        numstats::RngStream rng(515000 + i, 0);
        spec.sigma = (i % 2 == 0) ? 0.25 : 0.5;
        // Random hyperplane through distance d* from the origin.
        const double angle = 2.0 * M_PI * rng.uniform();
        const double scale = std::exp(rng.uniform() - 0.5);
        const Vector w = {scale * std::cos(angle), scale * std::sin(angle)};
        const double dist = spec.sigma * (0.2 + 1.8 * rng.uniform());
        const double b = dist * std::sqrt(w[0] * w[0] + w[1] * w[1]);
        const smoothing::Classifier classify = [&w, b](const Vector& x) {
            return w[0] * x[0] + w[1] * x[1] + b >= 0.0 ? 0 : 1;
        };
        numstats::RngStream cert_rng(616000 + i, 1);
        const auto rec =
            smoothing::certify_classifier_ebs(classify, 2, spec, {0.0, 0.0}, 0, cert_rng);
        if (rec.abstain) {
            ++abstentions;
            continue;
        }
        if (rec.radius > dist) ++violations;
        ratio_sum += rec.radius / dist;
    }
    const double mean_ratio = ratio_sum / instances;
    log.require(violations <= 1, "radius <= true boundary distance in >= 199/200 (violations: " +
                                     std::to_string(violations) + ")");
    log.require(mean_ratio >= 0.9,
                "mean radius / distance >= 0.9 (got " + std::to_string(mean_ratio) + ")");
    log.note("abstentions: " + std::to_string(abstentions));
    return log.ok;
}

// ---------------------------------------------------------------------------
// Criterion 2: smoothness bounds for soft-smoothed confidences.
// ---------------------------------------------------------------------------
bool criterion_2(CheckLog& log) {
    const double sigma = 0.5;
    const double cap = 2.0 / (sigma * sigma);
    int over = 0;
    double worst_margin = 1e300;
    for (int probe = 0; probe < 50; ++probe) {
        numstats::RngStream mrng(71000 + probe, 0);
        const auto m = model::MlpClassifier::init_random(2, {16, 16}, 3, mrng);
        numstats::RngStream noise(71000 + probe, 1);
        const int component = probe % 3;
        const auto est =
            smoothing::make_soft_confidence_estimator(m, component, sigma, 400000, noise);
        numstats::RngStream xr(71000 + probe, 2);
        const Vector x = numstats::sample_gaussian(xr, 2, 1.0);
        const double angle = 2.0 * M_PI * xr.uniform();
        const Vector u = {std::cos(angle), std::sin(angle)};
        const auto res = smoothing::smoothness_probe(est, x, u, sigma / 20.0);
        const double slack = cap + 4.0 * res.std_error - std::fabs(res.second_difference);
        worst_margin = std::min(worst_margin, slack);
        if (slack < 0.0) ++over;
    }
    log.require(over == 0, "50 soft-smoothed MLP probes stay below 2/sigma^2 + 4 se "
                           "(worst slack: " +
                               std::to_string(worst_margin) + ")");

    // 1-D hard-smoothed step at x = sigma attains the curvature floor.
    const double step_sigma = 0.6;
    const double target = 1.0 / (std::sqrt(2.0 * M_PI * std::exp(1.0)) * step_sigma * step_sigma);
    auto state = std::make_shared<numstats::RngStream>(72001, 0);
    const int64_t m_step = 60000000;
    const smoothing::NoisyScalar g = [state, step_sigma, m_step](const Vector& x) {
        int64_t hits = 0;
        for (int64_t i = 0; i < m_step; ++i) {
            if (x[0] + step_sigma * state->normal() >= 0.0) ++hits;
        }
        const double p = static_cast<double>(hits) / m_step;
        return std::make_pair(p, std::sqrt(std::max(p * (1.0 - p), 1e-12) / m_step));
    };
    const auto probe =
        smoothing::smoothness_probe(g, {step_sigma}, {1.0}, step_sigma / 8.0);
    const double attained = std::fabs(probe.second_difference);
    log.require(attained >= 0.9 * target,
                "step construction attains >= 0.9 * curvature floor (got " +
                    std::to_string(attained) + " vs floor " + std::to_string(target) + ")");
    log.note("step probe std error: " + std::to_string(probe.std_error));
    return log.ok;
}

// ---------------------------------------------------------------------------
// Criteria 3 & 4: DRT efficacy and GD/CM ablation on two-moons (shared runs).
// ---------------------------------------------------------------------------
struct AblationResult {
    // variant -> per-seed ACR, per protocol, plus per-run sampling se.
    std::map<std::string, std::vector<double>> acr_we;
    std::map<std::string, std::vector<double>> acr_mme;
    std::map<std::string, std::vector<double>> se_we;
    std::map<std::string, std::vector<double>> se_mme;
    bool ready = false;
};

AblationResult& ablation_runs() {
    static AblationResult cache;
    if (cache.ready) return cache;

    const data::Dataset train_ds = data::gen_two_moons(400, 0.1, 1000);
    data::Dataset test_full = data::gen_two_moons(200, 0.1, 2000);
    data::Dataset test;
    test.dim = 2;
    test.num_classes = 2;
    for (size_t i = 0; i < test_full.size(); i += 2) {
        test.features.push_back(test_full.features[i]);
        test.labels.push_back(test_full.labels[i]);
    }

    const auto eval_acr = [&test](const std::vector<model::MlpClassifier>& members,
                                  ensemble::Protocol proto, uint64_t seed) {
        smoothing::SmoothingSpec spec;
        spec.sigma = 0.5;
        spec.n0 = 100;
        spec.n = 10000;
        spec.alpha = 0.001;
        const auto ens =
            proto == ensemble::Protocol::WE
                ? ensemble::EnsembleSpec::we(members,
                                             std::vector<double>(members.size(), 1.0))
                : ensemble::EnsembleSpec::mme(members);
        std::vector<double> contributions;
        for (size_t i = 0; i < test.size(); ++i) {
            numstats::RngStream rng = numstats::RngStream(seed, 900).substream(i);
            const auto rec =
                smoothing::certify_ebs(ens, spec, test.features[i], test.labels[i], rng);
            contributions.push_back(rec.correct ? rec.radius : 0.0);
        }
        const double n = static_cast<double>(contributions.size());
        double mean = 0.0;
        for (double c : contributions) mean += c;
        mean /= n;
        double var = 0.0;
        for (double c : contributions) var += (c - mean) * (c - mean);
        var /= n;
        return std::make_pair(mean, std::sqrt(var / n));
    };

    const std::vector<std::pair<std::string, training::Variant>> variants = {
        {"none", training::Variant::None},
        {"drt", training::Variant::DRTPairwise},
        {"gd_only", training::Variant::GDOnly},
        {"cm_only", training::Variant::CMOnly},
    };
    for (const auto& [name, variant] : variants) {
        for (uint64_t seed = 1; seed <= 5; ++seed) {
            std::vector<model::MlpClassifier> members;
            for (int i = 0; i < 3; ++i) {
                numstats::RngStream rng(seed * 100, static_cast<uint64_t>(i));
                members.push_back(model::MlpClassifier::init_random(2, {32, 32}, 2, rng));
            }
            training::TrainingConfig cfg;
            cfg.variant = variant;
            cfg.rho1 = (variant == training::Variant::DRTPairwise ||
                        variant == training::Variant::GDOnly)
                           ? 0.5
                           : 0.0;
            cfg.rho2 = (variant == training::Variant::DRTPairwise ||
                        variant == training::Variant::CMOnly)
                           ? 2.0
                           : 0.0;
            cfg.sigma = 0.5;
            cfg.k_noise = 2;
            cfg.epochs = 40;
            cfg.batch_size = 32;
            cfg.lr = 3e-4;
            cfg.momentum = 0.9;
            cfg.lr_decay_period = 20;
            cfg.lr_decay_factor = 0.5;
            cfg.seed = seed;
            training::train(members, train_ds, cfg);

            const auto [we, we_se] = eval_acr(members, ensemble::Protocol::WE, seed);
            const auto [mme, mme_se] = eval_acr(members, ensemble::Protocol::MME, seed);
            cache.acr_we[name].push_back(we);
            cache.acr_mme[name].push_back(mme);
            cache.se_we[name].push_back(we_se);
            cache.se_mme[name].push_back(mme_se);
        }
    }
    cache.ready = true;
    return cache;
}

// Sampling standard error of the run sitting at the median ACR.
double median_run_se(const std::vector<double>& acrs, const std::vector<double>& ses) {
    std::vector<size_t> idx(acrs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return acrs[a] < acrs[b]; });
    return ses[idx[idx.size() / 2]];
}

bool criterion_3(CheckLog& log) {
    auto& runs = ablation_runs();
    const double we_drt = median(runs.acr_we.at("drt"));
    const double we_none = median(runs.acr_we.at("none"));
    const double mme_drt = median(runs.acr_mme.at("drt"));
    const double mme_none = median(runs.acr_mme.at("none"));
    log.require(we_drt > we_none, "WE median ACR: DRT " + std::to_string(we_drt) +
                                      " > baseline " + std::to_string(we_none));
    log.require(mme_drt > mme_none, "MME median ACR: DRT " + std::to_string(mme_drt) +
                                        " > baseline " + std::to_string(mme_none));
    return log.ok;
}

bool criterion_4(CheckLog& log) {
    auto& runs = ablation_runs();
    for (const char* proto : {"we", "mme"}) {
        const auto& acr = std::string(proto) == "we" ? runs.acr_we : runs.acr_mme;
        const auto& ses = std::string(proto) == "we" ? runs.se_we : runs.se_mme;
        const double none_med = median(acr.at("none"));
        const double gd_med = median(acr.at("gd_only"));
        const double cm_med = median(acr.at("cm_only"));
        const double drt_med = median(acr.at("drt"));
        // One standard error: test-set sampling error of the compared
        // (right-hand side) variant's median run.
        const double none_se = median_run_se(acr.at("none"), ses.at("none"));
        log.require(gd_med >= none_med - none_se,
                    std::string(proto) + ": GD-only " + std::to_string(gd_med) +
                        " >= baseline - 1se (" + std::to_string(none_med - none_se) + ")");
        log.require(cm_med >= none_med - none_se,
                    std::string(proto) + ": CM-only " + std::to_string(cm_med) +
                        " >= baseline - 1se (" + std::to_string(none_med - none_se) + ")");
        const bool gd_is_max = gd_med >= cm_med;
        const double best = gd_is_max ? gd_med : cm_med;
        const double best_se = gd_is_max ? median_run_se(acr.at("gd_only"), ses.at("gd_only"))
                                         : median_run_se(acr.at("cm_only"), ses.at("cm_only"));
        log.require(drt_med >= best - best_se,
                    std::string(proto) + ": DRT " + std::to_string(drt_med) +
                        " >= max(GD, CM) - 1se (" + std::to_string(best - best_se) + ")");
    }
    return log.ok;
}

// ---------------------------------------------------------------------------
// Criterion 5: second-order correctness of GD/CM loss graphs.
// ---------------------------------------------------------------------------
bool criterion_5(CheckLog& log) {
    double worst_gd = 0.0, worst_cm = 0.0;
    int pairs_checked = 0;
    for (int rep = 0; rep < 40 && pairs_checked < 20; ++rep) {
        std::vector<model::MlpClassifier> members;
        for (int i = 0; i < 2; ++i) {
            numstats::RngStream rng(81000 + rep, static_cast<uint64_t>(i));
            members.push_back(model::MlpClassifier::init_random(3, {5}, 3, rng));
        }
        // Agreement point so the pair gates on.
        numstats::RngStream xr(82000 + rep, 0);
        Vector x;
        int y0 = -1;
        for (int tries = 0; tries < 2000; ++tries) {
            const Vector c = numstats::sample_gaussian(xr, 3, 1.5);
            const int p0 = members[0].predict(c).top;
            if (members[1].predict(c).top == p0) {
                x = c;
                y0 = p0;
                break;
            }
        }
        if (y0 < 0) continue;
        ++pairs_checked;

        autodiff::Graph g;
        const auto xc = g.constant(Tensor::column(x));
        const auto bma = autodiff::bind_mlp(g, members[0]);
        const auto fwa = autodiff::mlp_forward(g, bma, xc);
        const auto bmb = autodiff::bind_mlp(g, members[1]);
        const auto fwb = autodiff::mlp_forward(g, bmb, xc);
        const auto pa = model::predict_from_confidences(g.value(fwa.probs).v);
        const auto pb = model::predict_from_confidences(g.value(fwb.probs).v);
        const auto ga = autodiff::input_gradient_node(g, bma, fwa, xc, y0, pa.runner_up);
        const auto gb = autodiff::input_gradient_node(g, bmb, fwb, xc, y0, pb.runner_up);
        const auto gd = g.l2_norm(g.add(ga, gb));
        const auto cm = g.add(autodiff::margin_node(g, fwa, pa.runner_up, y0),
                              autodiff::margin_node(g, fwb, pb.runner_up, y0));
        std::vector<autodiff::NodeId> leaves = bma.weights;
        leaves.insert(leaves.end(), bma.biases.begin(), bma.biases.end());
        leaves.insert(leaves.end(), bmb.weights.begin(), bmb.weights.end());
        leaves.insert(leaves.end(), bmb.biases.begin(), bmb.biases.end());
        worst_gd = std::max(worst_gd, autodiff::gradient_check(g, gd, leaves, 1e-4));
        worst_cm = std::max(worst_cm, autodiff::gradient_check(g, cm, leaves, 1e-5));
    }
    log.require(pairs_checked == 20, "20 valid model pairs assembled (got " +
                                         std::to_string(pairs_checked) + ")");
    log.require(worst_gd < 1e-3,
                "GD-loss gradient check < 1e-3 (worst " + std::to_string(worst_gd) + ")");
    log.require(worst_cm < 1e-3,
                "CM-loss gradient check < 1e-3 (worst " + std::to_string(worst_cm) + ")");
    return log.ok;
}

// ---------------------------------------------------------------------------
// Criterion 6: protocol oracle equivalence and sphere-grid attack.
// ---------------------------------------------------------------------------
bool criterion_6(CheckLog& log) {
    // Brute-force definitional agreement.
    std::vector<model::MlpClassifier> members;
    for (int i = 0; i < 3; ++i) {
        numstats::RngStream rng(91000, static_cast<uint64_t>(i));
        members.push_back(model::MlpClassifier::init_random(3, {8}, 4, rng));
    }
    const std::vector<double> w = {0.4, 1.0, 0.8};
    numstats::RngStream xs(91001, 0);
    int we_mismatch = 0, mme_mismatch = 0;
    for (int i = 0; i < 500; ++i) {
        const Vector x = numstats::sample_gaussian(xs, 3, 1.5);
        std::vector<std::vector<double>> conf;
        for (const auto& m : members) conf.push_back(m.confidences(x));
        if (ensemble::we_predict(members, w, x) != oracles::brute_force_we(conf, w))
            ++we_mismatch;
        if (ensemble::mme_predict(members, x) != oracles::brute_force_mme(conf))
            ++mme_mismatch;
    }
    log.require(we_mismatch == 0, "we_predict matches the brute-force oracle on 500 inputs");
    log.require(mme_mismatch == 0, "mme_predict matches the brute-force oracle on 500 inputs");

    // Certified WE verdicts survive a 10^4-point sphere attack in d=2.
    int attacked = 0, flips = 0;
    for (int inst = 0; inst < 20; ++inst) {
        std::vector<model::MlpClassifier> pair;
        for (int i = 0; i < 2; ++i) {
            numstats::RngStream rng(92000 + inst, static_cast<uint64_t>(i));
            auto m = model::MlpClassifier::init_random(2, {8}, 3, rng);
            for (auto& l : m.mutable_layers()) {
                for (auto& v : l.w.v) v *= 0.35;
            }
            pair.push_back(std::move(m));
        }
        const double beta = std::max(testutil::crude_margin_smoothness_bound(pair[0]),
                                     testutil::crude_margin_smoothness_bound(pair[1]));
        numstats::RngStream xr(93000 + inst, 0);
        const Vector x0 = {xr.normal(), xr.normal()};
        const double weights[] = {1.0, 1.0};
        const int y0 = ensemble::we_predict(pair, weights, x0);
        double lo = 0.0, hi = 2.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (ensemble::check_we_robustness(pair, weights, x0, y0, mid, beta).status ==
                ensemble::RobustnessStatus::CertifiedRobust) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if (lo <= 0.0) continue;
        ++attacked;
        const double r = 0.95 * lo;
        for (const Vector& x : testutil::sphere_grid_2d(x0, r, 10000)) {
            if (ensemble::we_predict(pair, weights, x) != y0) {
                ++flips;
                break;
            }
        }
    }
    log.require(attacked >= 15, "certified instances available for attack (got " +
                                    std::to_string(attacked) + "/20)");
    log.require(flips == 0, "zero prediction flips on the certified radius sphere");
    return log.ok;
}

// ---------------------------------------------------------------------------
// Criterion 7: Clopper-Pearson coverage and closed-form anchors.
// ---------------------------------------------------------------------------
bool criterion_7(CheckLog& log) {
    numstats::RngStream rng(101010, 0);
    const int trials = 10000;
    const int n = 200;
    const double p = 0.7, alpha = 0.05;
    int violations = 0;
    for (int t = 0; t < trials; ++t) {
        int k = 0;
        for (int i = 0; i < n; ++i) {
            if (rng.uniform() < p) ++k;
        }
        if (numstats::clopper_pearson_lower(k, n, alpha) > p) ++violations;
    }
    const double rate = static_cast<double>(violations) / trials;
    log.require(rate <= alpha + 0.01,
                "coverage violation rate " + std::to_string(rate) + " <= alpha + 1%");

    double worst = 0.0;
    for (const auto& [nn, aa] : std::vector<std::pair<int64_t, double>>{
             {100, 0.001}, {1000, 0.01}, {100000, 0.001}}) {
        const double got = numstats::clopper_pearson_lower(nn, nn, aa);
        const double want = std::pow(aa, 1.0 / static_cast<double>(nn));
        worst = std::max(worst, std::fabs(got - want));
    }
    log.require(worst < 1e-10,
                "k = n closed form alpha^(1/n) matches to 1e-10 (worst " +
                    std::to_string(worst) + ")");
    return log.ok;
}

// ---------------------------------------------------------------------------
// Criterion 8: statistical-robustness reproduction.
// ---------------------------------------------------------------------------
bool criterion_8(CheckLog& log) {
    // (a) transferability trend at the pinned trial counts.
    for (int n : {3, 10, 20}) {
        statsim::TransferabilityConfig cfg;
        cfg.n_members = n;
        cfg.trials = 2000;
        cfg.inner_samples = 30000;
        cfg.seed = 7;
        const auto trials = statsim::simulate_transferability(cfg);
        std::vector<double> ratio, diff;
        for (const auto& t : trials) {
            ratio.push_back(t.lambda_ratio);
            diff.push_back(t.diff);
        }
        const double rho = statsim::spearman_rho(ratio, diff);
        log.require(rho > 0.2, "Spearman(lambda ratio, radius diff) > 0.2 at N=" +
                                   std::to_string(n) + " (got " + std::to_string(rho) + ")");
        log.require(rho > 0.0, "trend direction positive at N=" + std::to_string(n));
    }

    // (b) variance of the minimum of uniforms vs Monte Carlo.
    {
        numstats::RngStream rng(111000, 0);
        const int n = 5;
        const double a = 0.3, b = 0.9;
        const int trials = 1000000;
        double sum = 0.0, sq = 0.0;
        for (int t = 0; t < trials; ++t) {
            double mn = 1e9;
            for (int i = 0; i < n; ++i) mn = std::min(mn, a + (b - a) * rng.uniform());
            sum += mn;
            sq += mn * mn;
        }
        const double mean = sum / trials;
        const double var = sq / trials - mean * mean;
        const double want = statsim::var_min_uniform(n, a, b);
        const double rel = std::fabs(var - want) / want;
        log.require(rel < 0.02, "var_min_uniform matches Monte Carlo within 2% (rel err " +
                                    std::to_string(rel) + ")");
    }

    // (c) threshold verdicts vs direct bound comparison over a parameter grid.
    {
        int checked = 0, contradictions = 0;
        for (double mean : {0.70, 0.75, 0.80, 0.85, 0.90}) {
            for (double width : {0.05, 0.10, 0.15, 0.20}) {
                for (double l2 : {0.7, 0.85, 0.95, 1.10}) {
                    for (double ratio :
                         {0.2, 0.35, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0}) {
                        for (int n : {2, 3, 5, 10, 20, 41, 60}) {
                            statsim::MarginModel m;
                            m.family = statsim::DistributionFamily::Uniform;
                            m.a = mean - width / 2;
                            m.b = mean + width / 2;
                            m.lambda1 = ratio * l2;
                            m.lambda2 = l2;
                            m.lambda3 = l2;
                            m.p = 0.01;
                            m.n_members = n;
                            if (m.a <= 0.0 || m.b >= 1.0) continue;
                            if (m.mean() <= m.lambda1 / (1 + m.lambda1)) continue;
                            if (m.mean() <= m.lambda2 / (1 + m.lambda2)) continue;
                            const auto verdict = statsim::compare_protocols(m);
                            const double bwe = statsim::bound_we(m).chebyshev;
                            const double bmme = statsim::bound_mme(m).chebyshev;
                            if (verdict == statsim::ComparisonVerdict::WeHigher &&
                                !(bwe >= bmme))
                                ++contradictions;
                            if (verdict == statsim::ComparisonVerdict::MmeHigher &&
                                !(bmme >= bwe))
                                ++contradictions;
                            ++checked;
                        }
                    }
                }
            }
        }
        log.require(checked >= 1000, "grid size >= 1000 (got " + std::to_string(checked) + ")");
        log.require(contradictions == 0,
                    "zero verdict contradictions (got " + std::to_string(contradictions) + ")");
    }

    // (d) uniform N threshold at mu = 0.8, lambda2 = 1.
    {
        statsim::MarginModel m;
        m.family = statsim::DistributionFamily::Uniform;
        m.a = 0.7;
        m.b = 0.9;
        m.lambda1 = 1.0;
        m.lambda2 = 1.0;
        m.lambda3 = 1.0;
        m.p = 0.01;
        m.n_members = 41;
        const auto th = statsim::comparison_thresholds(m);
        log.require(std::fabs(th.n_threshold - 40.0 - 2.0 / 3.0) < 1e-9,
                    "N threshold at mu=0.8, lambda2=1 equals 40.667 (got " +
                        std::to_string(th.n_threshold) + ")");
        log.require(th.n_threshold > 40.0 && th.n_threshold < 41.0,
                    "threshold separates N=40 from N=41");
        bool mme_dominates_at_41 = true;
        for (double l1 = 0.05; l1 <= 1.0 + 1e-12; l1 += 0.05) {
            statsim::MarginModel q = m;
            q.lambda1 = l1;
            if (q.mean() <= l1 / (1 + l1)) continue;
            if (statsim::bound_mme(q).chebyshev < statsim::bound_we(q).chebyshev)
                mme_dominates_at_41 = false;
        }
        log.require(mme_dominates_at_41,
                    "bound sweep at N=41: MME bound >= WE bound for every lambda1");
        statsim::MarginModel m40 = m;
        m40.n_members = 40;
        log.require(statsim::comparison_thresholds(m40).n_threshold > 40.0,
                    "N=40 sits below the threshold (sufficient condition not yet applicable)");
    }
    return log.ok;
}

// ---------------------------------------------------------------------------
// Criterion 9: EBS-vs-EAS comparison verdicts never contradict the radii.
// ---------------------------------------------------------------------------
bool criterion_9(CheckLog& log) {
    int checked = 0, contradictions = 0, undetermined = 0;
    for (double p_a = 0.52; p_a < 1.0; p_a += 0.04) {
        for (double p_b = 0.52; p_b < 1.0; p_b += 0.04) {
            const double lo = std::max(0.0, p_a + p_b - 1.0) + 1e-6;
            const double hi = std::min(p_a, p_b) - 1e-6;
            if (hi <= lo) continue;
            for (int i = 0; i < 8; ++i) {
                const double p_ab = lo + (hi - lo) * (i + 0.5) / 8.0;
                for (double p = 0.0; p <= 1.0 + 1e-12; p += 0.1) {
                    smoothing::StrategyComparison cmp;
                    try {
                        cmp = smoothing::compare_smoothing_strategies(p_a, p_b, p_ab, p, 1.0);
                    } catch (const std::invalid_argument&) {
                        continue;
                    }
                    ++checked;
                    if (cmp.verdict == smoothing::StrategyVerdict::EBSHigher &&
                        !(cmp.r_ebs > cmp.r_eas))
                        ++contradictions;
                    if (cmp.verdict == smoothing::StrategyVerdict::EASHigherOrEqual &&
                        !(cmp.r_eas >= cmp.r_ebs))
                        ++contradictions;
                    if (cmp.verdict == smoothing::StrategyVerdict::Undetermined) ++undetermined;
                }
            }
        }
    }
    log.require(checked >= 10000, "grid size >= 10^4 (got " + std::to_string(checked) + ")");
    log.require(contradictions == 0,
                "zero verdict contradictions (got " + std::to_string(contradictions) + ")");
    log.note("undetermined verdicts (exempt): " + std::to_string(undetermined));
    return log.ok;
}

// ---------------------------------------------------------------------------
// Criterion 10: small-scale 784-d pipeline smoke through the CLI.
// ---------------------------------------------------------------------------
#ifndef ENSCERT_CLI_PATH
#define ENSCERT_CLI_PATH ""
#endif

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ENSCERT_CLI_PATH) + " " + args;
    return std::system(cmd.c_str());
}

// Synthetic 784-d stand-in with a sparse per-class pixel signature over a
// flat background. Each class owns a disjoint 12-pixel block, so pairwise
// prototype distances are identical by construction.
data::Dataset synth_digits(int per_class, uint64_t proto_seed, uint64_t noise_seed) {
    numstats::RngStream proto_rng(proto_seed, 1);
    std::vector<Vector> protos;
    for (int c = 0; c < 10; ++c) {
        Vector p(784, 0.5);
        for (int k = 0; k < 12; ++k) {
            p[c * 78 + k] = 0.5 + (proto_rng.uniform() < 0.5 ? -0.4 : 0.4);
        }
        protos.push_back(p);
    }
    numstats::RngStream rng(noise_seed, 2);
    data::Dataset ds;
    ds.dim = 784;
    ds.num_classes = 10;
    for (int c = 0; c < 10; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Vector x = protos[c];
            for (auto& v : x) v = std::min(std::max(v + 0.1 * rng.normal(), 0.0), 1.0);
            ds.features.push_back(std::move(x));
            ds.labels.push_back(c);
        }
    }
    return ds;
}

bool criterion_10(CheckLog& log) {
    const fs::path work = fs::temp_directory_path() / "enscert_acceptance_c10";
    fs::remove_all(work);
    fs::create_directories(work);

    // Real MNIST when provided, synthetic IDX files otherwise.
    std::string train_images, train_labels, test_images, test_labels;
    if (const char* dir = std::getenv("ENSCERT_MNIST_DIR")) {
        train_images = std::string(dir) + "/train-images-idx3-ubyte";
        train_labels = std::string(dir) + "/train-labels-idx1-ubyte";
        test_images = std::string(dir) + "/t10k-images-idx3-ubyte";
        test_labels = std::string(dir) + "/t10k-labels-idx1-ubyte";
        log.note("using MNIST from ENSCERT_MNIST_DIR");
    } else {
        const data::Dataset train = synth_digits(500, 42, 1);
        const data::Dataset test = synth_digits(100, 42, 2);
        train_images = (work / "train-images.idx").string();
        train_labels = (work / "train-labels.idx").string();
        test_images = (work / "test-images.idx").string();
        test_labels = (work / "test-labels.idx").string();
        data::write_idx(train, 28, 28, train_images, train_labels);
        data::write_idx(test, 28, 28, test_images, test_labels);
        log.note("using the synthetic 784-d stand-in (no MNIST files found)");
    }

    auto write_json = [](const fs::path& p, const std::string& text) {
        std::ofstream out(p);
        out << text;
    };

    // Stage 1: Gaussian-augmented pretraining shared by both arms.
    std::ostringstream pre;
    pre << R"({
      "seed": 5,
      "dataset": {"type": "idx", "images": ")" << train_images << R"(", "labels": ")"
        << train_labels << R"(", "max_n": 5000},
      "model": {"hidden": [64, 64], "activation": "softplus"},
      "ensemble": {"n_members": 3},
      "training": {"variant": "none", "sigma": 0.25, "k_noise": 2, "epochs": 5,
                   "batch_size": 64, "lr": 0.0002, "momentum": 0.9}
    })";
    write_json(work / "pretrain.json", pre.str());
    if (run_cli("train --config " + (work / "pretrain.json").string() + " --out " +
                (work / "pretrain").string()) != 0) {
        log.require(false, "pretraining run");
        return false;
    }

    // Stage 2a: continued Gaussian training (the baseline arm).
    auto finetune_cfg = [&](const std::string& variant, double rho1, double rho2) {
        std::ostringstream os;
        os << R"({
      "seed": 6,
      "init_from": {"manifest": ")" << (work / "pretrain" / "manifest.json").string() << R"("},
      "dataset": {"type": "idx", "images": ")" << train_images << R"(", "labels": ")"
           << train_labels << R"(", "max_n": 5000},
      "model": {"hidden": [64, 64], "activation": "softplus"},
      "ensemble": {"n_members": 3},
      "training": {"variant": ")" << variant << R"(", "rho1": )" << rho1 << R"(, "rho2": )"
           << rho2 << R"(, "sigma": 0.25, "k_noise": 2, "epochs": 3,
                   "batch_size": 64, "lr": 0.00005, "momentum": 0.9}
    })";
        return os.str();
    };
    write_json(work / "baseline.json", finetune_cfg("none", 0.0, 0.0));
    write_json(work / "drt.json", finetune_cfg("drt_pairwise", 0.1, 0.5));
    if (run_cli("train --config " + (work / "baseline.json").string() + " --out " +
                (work / "baseline").string()) != 0) {
        log.require(false, "baseline fine-tune run");
        return false;
    }
    if (run_cli("train --config " + (work / "drt.json").string() + " --out " +
                (work / "drt").string()) != 0) {
        log.require(false, "DRT fine-tune run");
        return false;
    }

    // Certification: 100 strided test points at n = 10^4.
    auto certify_cfg = [&](const std::string& arm) {
        std::ostringstream os;
        os << R"({
      "seed": 9,
      "checkpoints": {"manifest": ")" << (work / arm / "manifest.json").string() << R"("},
      "dataset": {"type": "idx", "images": ")" << test_images << R"(", "labels": ")"
           << test_labels << R"("},
      "eval": {"stride": 10, "max_points": 100},
      "ensemble": {"protocol": "we"},
      "smoothing": {"sigma": 0.25, "n0": 100, "n": 10000, "alpha": 0.001, "strategy": "ebs"},
      "radii_grid": [0.0, 0.25, 0.5, 0.75, 1.0]
    })";
        return os.str();
    };
    write_json(work / "certify_baseline.json", certify_cfg("baseline"));
    write_json(work / "certify_drt.json", certify_cfg("drt"));
    if (run_cli("certify --config " + (work / "certify_baseline.json").string() + " --out " +
                (work / "cert_baseline").string()) != 0) {
        log.require(false, "baseline certification run");
        return false;
    }
    if (run_cli("certify --config " + (work / "certify_drt.json").string() + " --out " +
                (work / "cert_drt").string()) != 0) {
        log.require(false, "DRT certification run");
        return false;
    }

    auto summary_stats = [](const fs::path& summary_path) {
        std::ifstream in(summary_path);
        nlohmann::json j;
        in >> j;
        const auto radii = j.at("radii").get<std::vector<double>>();
        const auto acc = j.at("certified_accuracy").get<std::vector<double>>();
        for (size_t i = 0; i < radii.size(); ++i) {
            if (std::fabs(radii[i] - 0.25) < 1e-12)
                return std::make_pair(acc[i], j.at("acr").get<double>());
        }
        throw std::runtime_error("radius 0.25 missing from the summary grid");
    };
    const auto [base_acc, base_acr] = summary_stats(work / "cert_baseline" / "summary.json");
    const auto [drt_acc, drt_acr] = summary_stats(work / "cert_drt" / "summary.json");
    log.require(drt_acc >= base_acc,
                "certified accuracy at r=0.25: DRT " + std::to_string(drt_acc) +
                    " >= baseline " + std::to_string(base_acc));
    log.note("ACR: DRT " + std::to_string(drt_acr) + " vs baseline " +
             std::to_string(base_acr));
    return log.ok;
}

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<bool(CheckLog&)> fn;
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<Criterion> criteria = {
        {1, "closed-form certification soundness", 300, criterion_1},
        {2, "smoothness bounds", 600, criterion_2},
        {3, "DRT efficacy direction", 1200, criterion_3},
        {4, "GD/CM ablation direction", 1200, criterion_4},
        {5, "autodiff second-order correctness", 60, criterion_5},
        {6, "protocol/condition oracle equivalence", 300, criterion_6},
        {7, "Clopper-Pearson coverage", 120, criterion_7},
        {8, "statistical-robustness reproduction", 600, criterion_8},
        {9, "EBS-vs-EAS comparison consistency", 120, criterion_9},
        {10, "784-d pipeline smoke", 3600, criterion_10},
    };

    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() &&
            std::find(selected.begin(), selected.end(), c.id) == selected.end())
            continue;
        CheckLog log;
        const auto start = std::chrono::steady_clock::now();
        bool ok = false;
        try {
            ok = c.fn(log);
        } catch (const std::exception& e) {
            log.require(false, std::string("exception: ") + e.what());
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > c.budget_seconds) {
            log.require(false, "runtime " + std::to_string(elapsed) + "s exceeds budget " +
                                   std::to_string(c.budget_seconds) + "s");
            ok = false;
        }
        std::printf("[%s] criterion %d: %s (%.1fs)\n", ok ? "PASS" : "FAIL", c.id,
                    c.name.c_str(), elapsed);
        std::fputs(log.out.str().c_str(), stdout);
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (failures == 0) {
        std::printf("all criteria passed\n");
    } else {
        std::printf("%d criterion(s) failed\n", failures);
    }
    return failures;
}
