#pragma once

#include <span>
#include <string>
#include <vector>

#include "enscert/model.hpp"
#include "enscert/tensor.hpp"

namespace enscert::ensemble {

enum class Protocol { WE, MME };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

/// Ensemble protocol over N dimension-compatible base classifiers. WE weights
/// are strictly positive; MME carries no weights.
struct EnsembleSpec {
    Protocol protocol = Protocol::WE;
    std::vector<model::MlpClassifier> members;
    std::vector<double> weights;  // WE only; size N

    static EnsembleSpec we(std::vector<model::MlpClassifier> members,
                           std::vector<double> weights);
    static EnsembleSpec mme(std::vector<model::MlpClassifier> members);

    int num_classes() const { return members.at(0).num_classes(); }
    int input_dim() const { return members.at(0).input_dim(); }
    int predict(const Vector& x) const;
};

/// Weighted-ensemble prediction: argmax of weighted confidence sums, ties to
/// the lowest class index.
int we_predict(std::span<const model::MlpClassifier> members,
               std::span<const double> weights, const Vector& x);
int we_predict(const EnsembleSpec& spec, const Vector& x);

/// Max-margin-ensemble prediction: the member with the largest top-vs-runner-
/// up margin decides; margin ties go to the lowest member index.
int mme_predict(std::span<const model::MlpClassifier> members, const Vector& x);
int mme_predict(const EnsembleSpec& spec, const Vector& x);

/// Per-class robustness indicator values
///   I_{y} = ||sum_j w_j grad f_j^{y0/y}||_2 / ||w||_1
///           - (1 / (r ||w||_1)) sum_j w_j f_j^{y0/y}.
struct EriReport {
    double r = 0.0;
    int y0 = 0;
    std::vector<int> classes;    // every y != y0
    std::vector<double> values;  // I_y per class
    double min_value = 0.0;

    std::string to_json() const;
};

EriReport eri_we(std::span<const model::MlpClassifier> members,
                 std::span<const double> weights, const Vector& x0, int y0, double r);

enum class RobustnessStatus { CertifiedRobust, CertifiedNotRobust, Undetermined };

std::string to_string(RobustnessStatus s);

/// Outcome of the gradient/confidence-margin conditions at radius r. The
/// sufficient branch certifies robustness, a violated necessary branch
/// certifies non-robustness, anything else is undetermined.
struct RobustnessVerdict {
    RobustnessStatus status = RobustnessStatus::Undetermined;
    double r = 0.0;
    double beta = 0.0;
    struct PerClass {
        int y1 = 0;             // competing class (first index for MME pairs)
        int y2 = -1;            // second competing class, MME pairs only
        double gradient_norm = 0.0;
        double margin_term = 0.0;
        double sufficient_rhs = 0.0;
        double necessary_rhs = 0.0;
    };
    std::vector<PerClass> per_class;
    /// MME necessary branch only: its extra hypothesis (each base model keeps
    /// y0 as top or runner-up over the ball) is assumed rather than verified.
    bool necessary_hypothesis_assumed = false;

    std::string to_json() const;
};

RobustnessVerdict check_we_robustness(std::span<const model::MlpClassifier> members,
                                      std::span<const double> weights, const Vector& x0,
                                      int y0, double r, double beta);

/// Two-member max-margin conditions; throws std::invalid_argument unless
/// exactly two members are supplied.
RobustnessVerdict check_mme_robustness(std::span<const model::MlpClassifier> members,
                                       const Vector& x0, int y0, double r, double beta);

RobustnessVerdict check_single_robustness(const model::MlpClassifier& m, const Vector& x0,
                                          int y0, double r, double beta);

/// Largest radius passing the sufficient condition for every competing class:
/// the positive root of beta r^2 sum w + r G - M = 0, minimized over classes.
/// Returns 0 when any margin is nonpositive and +infinity for beta = 0 with
/// all-zero ensemble gradients.
double max_certified_radius_we(std::span<const model::MlpClassifier> members,
                               std::span<const double> weights, const Vector& x0, int y0,
                               double beta);

/// Two-member ensemble-vs-single radius bound R = r (1-Delta)/(1+Delta)
/// (1 - C (1 - cos theta))^{-1/2} and the smoothness threshold the caller
/// must verify.
struct RadiusBoundReport {
    double R = 0.0;
    double C = 0.0;           // protocol-specific margin coupling constant
    double c = 1.0;           // max(R / r, 1)
    double beta_threshold = 0.0;  // Delta * min margin / (c^2 r^2)
};

RadiusBoundReport ensemble_radius_bound(std::span<const model::MlpClassifier> member_pair,
                                        std::span<const double> weights, const Vector& x0,
                                        int y0, double r, double delta, double cos_theta,
                                        Protocol protocol);

/// Exhaustive simplex-grid search (resolution `step`) for the weight vector
/// maximizing the mean beta=0 certified-radius proxy over the sample. Ties go
/// to the first vector in lexicographic grid order. N <= 4.
std::vector<double> optimal_weights_grid(std::span<const model::MlpClassifier> members,
                                         std::span<const Vector> inputs,
                                         std::span<const int> labels, double step);

/// All weight vectors on the simplex grid in lexicographic order (exposed for
/// enumeration checks).
std::vector<std::vector<double>> simplex_grid(int n, double step);

}  // namespace enscert::ensemble
