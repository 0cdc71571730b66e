#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "enscert/ensemble.hpp"
#include "enscert/numstats.hpp"
#include "enscert/tensor.hpp"

namespace enscert::statsim {

enum class DistributionFamily { Uniform, Symmetric };

/// Confidence-portion model of a smoothed ensemble: lambda parameters bound
/// the share of non-true-class mass the strongest wrong class can take, p is
/// the mass of the complementary event, and the true-class confidence follows
/// either Uniform(a, b) or a symmetric law with moments (mu, s, s_f).
struct MarginModel {
    DistributionFamily family = DistributionFamily::Uniform;
    double a = 0.0;  // uniform support
    double b = 1.0;
    double mu = 0.0;  // symmetric-family moments
    double s = 0.0;
    double s_f = 0.0;  // std of the minimum over members
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lambda3 = 1.0;
    double p = 0.0;
    int n_members = 1;
    std::vector<double> weights;  // empty = uniform weights

    void validate() const;
    double mean() const;  // mu, or (a+b)/2 for the uniform family
};

/// Variance of the minimum of n i.i.d. Uniform(a, b) draws:
/// (1/(n+1)) (2/(n+2) - 1/(n+1)) (b-a)^2.
double var_min_uniform(int n, double a, double b);

/// Statistical margins: nonnegativity implies the correct ensemble
/// prediction under the confident event.
double statistical_margin_we(std::span<const double> true_confidences,
                             std::span<const double> weights, double lambda1);
double statistical_margin_mme(std::span<const double> true_confidences, double lambda2);

struct BoundReport {
    double chebyshev = 0.0;  // family-matched variance bound, raw value
    double mcdiarmid = 0.0;  // weighted-sum exponential bound (WE only)
    bool has_mcdiarmid = false;
    double best = 0.0;     // max of the applicable raw bounds
    double clamped = 0.0;  // best clipped to [0, 1] for reporting
};

BoundReport bound_single(const MarginModel& m);
BoundReport bound_we(const MarginModel& m);
BoundReport bound_mme(const MarginModel& m);

struct ComparisonThresholds {
    double we_higher_threshold = 0.0;   // lambda1/lambda2 below: WE dominates
    double mme_higher_threshold = 0.0;  // lambda1/lambda2 above: MME dominates
    double n_threshold = 0.0;           // uniform family: N beyond it, MME dominates
    bool has_n_threshold = false;
};

ComparisonThresholds comparison_thresholds(const MarginModel& m);

enum class ComparisonVerdict { WeHigher, MmeHigher, Undetermined };

std::string to_string(ComparisonVerdict v);
ComparisonVerdict compare_protocols(const MarginModel& m);

/// sigma * quantile(p) with p clamped into [1e-6, 1 - 1e-6].
double radius_from_probability(double p, double sigma);

struct TransferabilityConfig {
    double lambda2 = 0.95;
    double lambda1_min = 0.80;
    double lambda1_max = 0.95;
    double support_min = 0.3;  // a ~ U[support_min, support_max)
    double support_max = 1.0;  // b ~ U[a, support_max)
    int n_members = 10;
    int trials = 2000;
    int inner_samples = 1000;
    double sigma = 1.0;
    uint64_t seed = 0;
};

struct TransferabilityTrial {
    int trial = 0;
    double lambda_ratio = 0.0;
    double a = 0.0;
    double b = 0.0;
    double p_we = 0.0;
    double p_mme = 0.0;
    double radius_we = 0.0;
    double radius_mme = 0.0;
    double diff = 0.0;  // radius_mme - radius_we
};

/// Per-trial signed radius difference between the MME and WE statistical
/// margins under uniformly sampled true-class confidences.
std::vector<TransferabilityTrial> simulate_transferability(const TransferabilityConfig& cfg);

/// CSV schema: trial,lambda_ratio,a,b,p_we,p_mme,radius_we,radius_mme,diff.
std::string transferability_to_csv(std::span<const TransferabilityTrial> trials);

/// Bound-sweep row for plotting: bounds and floored radii per member count.
struct BoundSweepRow {
    int n = 0;
    double bound_single = 0.0;
    double bound_we = 0.0;
    double bound_mme = 0.0;
    double radius_single = 0.0;
    double radius_we = 0.0;
    double radius_mme = 0.0;
};
std::vector<BoundSweepRow> bound_sweep(const MarginModel& base, int n_min, int n_max,
                                       double sigma);
std::string bound_sweep_to_csv(std::span<const BoundSweepRow> rows);

/// Monte-Carlo estimates of the average confidence-portion proxies for
/// lambda1 (weighted ensemble) and lambda2 (max-margin ensemble).
std::pair<double, double> lambda_proxies(const ensemble::EnsembleSpec& we_spec,
                                         const Vector& x0, int y0, double sigma, int64_t m,
                                         numstats::RngStream& rng);

/// Rank-based AUC (Mann-Whitney); ties contribute one half.
double roc_auc(std::span<const double> scores, std::span<const bool> labels);

/// Spearman rank correlation with average ranks on ties.
double spearman_rho(std::span<const double> x, std::span<const double> y);

}  // namespace enscert::statsim
