#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "enscert/ensemble.hpp"
#include "enscert/model.hpp"
#include "enscert/numstats.hpp"

namespace enscert::smoothing {

/// Monte-Carlo certification budget: n0 selection draws, n certification
/// draws, failure budget alpha.
struct SmoothingSpec {
    double sigma = 0.5;
    int64_t n0 = 100;
    int64_t n = 10000;  // desk-scale default; 1e5 matches the full protocol
    double alpha = 0.001;

    void validate() const;
};

struct CertificationRecord {
    int64_t input_id = 0;
    int label = -1;
    int prediction = -1;  // candidate class c_A
    int64_t hits = 0;     // stage-2 hits k of the candidate
    int64_t samples = 0;  // stage-2 draw count n
    double p_lower = 0.0;
    double radius = 0.0;  // sigma * quantile(p_lower), 0 when abstaining
    bool abstain = true;
    bool correct = false;  // prediction == label
};

using Classifier = std::function<int(const Vector&)>;

/// Prediction counts of `classify` over m Gaussian draws around x.
std::vector<int64_t> mc_class_frequencies(const Classifier& classify, const Vector& x,
                                          double sigma, int64_t m, int num_classes,
                                          numstats::RngStream& rng);

/// Two-stage randomized-smoothing certification of an arbitrary classifier:
/// n0 draws select the candidate class, n fresh draws bound its probability
/// from below (Clopper-Pearson), abstaining when the bound is <= 1/2.
CertificationRecord certify_classifier_ebs(const Classifier& classify, int num_classes,
                                           const SmoothingSpec& spec, const Vector& x,
                                           int label, numstats::RngStream& rng);

/// Smoothing wraps the whole ensemble: each noisy draw is classified by the
/// full WE/MME prediction.
CertificationRecord certify_ebs(const ensemble::EnsembleSpec& ens, const SmoothingSpec& spec,
                                const Vector& x, int label, numstats::RngStream& rng);

/// Member-wise smoothing: each member is certified on its own smoothed top
/// class, the ensemble agrees on the member with the highest smoothed
/// top-class frequency, and the radius combines best and worst signed radii.
struct EasCertification {
    CertificationRecord record;       // radius clamped at 0 for reporting
    double raw_radius = 0.0;          // (max_i r_i + min_i r_i) / 2, unclamped
    std::vector<double> signed_radii;
    int selected_member = 0;
};

EasCertification certify_eas(std::span<const model::MlpClassifier> members,
                             const SmoothingSpec& spec, const Vector& x, int label,
                             numstats::RngStream& rng);

enum class StrategyVerdict { EBSHigher, EASHigherOrEqual, Undetermined };

std::string to_string(StrategyVerdict v);

struct StrategyComparison {
    StrategyVerdict verdict = StrategyVerdict::Undetermined;
    double r_ebs = 0.0;  // sigma * quantile(p_ab + p (p_a + p_b - 2 p_ab))
    double r_eas = 0.0;  // (sigma / 2) (quantile(p_a) + quantile(p_b))
};

/// Closed-form comparison of the two smoothing strategies for a two-member
/// max-margin ensemble from the agreement/disagreement probabilities.
StrategyComparison compare_smoothing_strategies(double p_a, double p_b, double p_ab,
                                                double p, double sigma);

/// Empirical mean of the confidence vector over m Gaussian draws.
Vector soft_confidence(const model::MlpClassifier& m, const Vector& x, double sigma,
                       int64_t samples, numstats::RngStream& rng);

/// Noisy scalar estimate: (mean, Monte-Carlo standard error).
using NoisyScalar = std::function<std::pair<double, double>(const Vector&)>;

/// Estimator of one soft-smoothed confidence component at a fixed sample
/// count; consecutive calls consume fresh noise from the captured stream.
NoisyScalar make_soft_confidence_estimator(const model::MlpClassifier& m, int component,
                                           double sigma, int64_t samples,
                                           numstats::RngStream rng);

struct ProbeResult {
    double second_difference = 0.0;
    double std_error = 0.0;
};

/// Central second difference (g(x+hu) - 2 g(x) + g(x-hu)) / h^2 of a noisy
/// scalar, with the propagated Monte-Carlo standard error.
ProbeResult smoothness_probe(const NoisyScalar& g, const Vector& x, const Vector& unit_dir,
                             double h);

struct AccuracyCurve {
    std::vector<double> radii;
    std::vector<double> accuracy;  // fraction correct, not abstaining, radius >= r
    double acr = 0.0;              // mean radius counting incorrect records as 0
};

AccuracyCurve certified_accuracy_curve(std::span<const CertificationRecord> records,
                                       std::span<const double> radii_grid);

/// CSV schema: id,label,prediction,k,n,p_lower,radius,abstain.
std::string records_to_csv(std::span<const CertificationRecord> records);
std::vector<CertificationRecord> records_from_csv(const std::string& text);

}  // namespace enscert::smoothing
