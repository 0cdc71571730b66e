#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "enscert/autodiff.hpp"
#include "enscert/data.hpp"
#include "enscert/model.hpp"
#include "enscert/numstats.hpp"

namespace enscert::training {

enum class Variant { DRTPairwise, DRTAggregate, GDOnly, CMOnly, ADP, GAL, None };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct TrainingConfig {
    double rho1 = 0.0;  // gradient-diversity weight
    double rho2 = 0.0;  // confidence-margin weight
    Variant variant = Variant::None;
    double sigma = 0.5;  // Gaussian augmentation scale
    int k_noise = 2;     // draws per sample per step
    int epochs = 10;
    int batch_size = 32;
    double lr = 0.01;
    double momentum = 0.9;
    int lr_decay_period = 0;       // 0 disables decay
    double lr_decay_factor = 1.0;  // multiplier applied every period epochs
    uint64_t seed = 0;
    double adp_alpha = 0.5;
    double adp_beta = 0.5;
    bool adp_entropy_per_member = false;  // read the entropy sum as N copies

    void validate() const;
};

/// Per-parameter velocity tensors mirroring each member's layers.
struct OptimizerState {
    std::vector<autodiff::MlpGradients> velocity;
    int64_t step_count = 0;
};

/// v <- momentum v + g; p <- p - lr v.
void sgd_momentum_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr,
                       double momentum);
void sgd_momentum_step(Vector& param, const Tensor& grad, Tensor& velocity, double lr,
                       double momentum);

struct EpochStats {
    int epoch = 0;
    double std_loss = 0.0;
    double gd_loss = 0.0;
    double cm_loss = 0.0;
    double variant_loss = 0.0;
    double train_acc = 0.0;
};

struct TrainingHistory {
    std::vector<EpochStats> epochs;
    /// CSV schema: epoch,std_loss,gd_loss,cm_loss,variant_loss,train_acc.
    std::string to_csv() const;
};

// ---- Loss-node builders (each binds the involved models into the graph) ----

/// Cross-entropy -log f(x)_{y0} in shifted log-softmax form.
autodiff::NodeId std_loss(autodiff::Graph& g, const model::MlpClassifier& m,
                          const Vector& x_noisy, int y0);

/// || grad_x f_i^{y0/yi2} + grad_x f_j^{y0/yj2} ||_2 with runner-up classes
/// frozen from the forward pass at x_noisy. Returns a zero constant when the
/// pair is invalid (either member mispredicts y0 at x_noisy).
autodiff::NodeId gd_loss(autodiff::Graph& g, const model::MlpClassifier& mi,
                         const model::MlpClassifier& mj, const Vector& x_noisy, int y0);

/// f_i^{yi2/y0} + f_j^{yj2/y0}, gated like gd_loss.
autodiff::NodeId cm_loss(autodiff::Graph& g, const model::MlpClassifier& mi,
                         const model::MlpClassifier& mj, const Vector& x_noisy, int y0);

/// Overall-sum variants: || sum_i grad f_i^{y0/yi2} ||_2 and
/// sum_i f_i^{yi2/y0}, gated on every member predicting y0 at x_noisy.
autodiff::NodeId gd_loss_aggregate(autodiff::Graph& g,
                                   std::span<const model::MlpClassifier> members,
                                   const Vector& x_noisy, int y0);
autodiff::NodeId cm_loss_aggregate(autodiff::Graph& g,
                                   std::span<const model::MlpClassifier> members,
                                   const Vector& x_noisy, int y0);

struct AdpLoss {
    autodiff::NodeId node = -1;
    bool ed_degenerate = false;  // Gram determinant structurally zero
};

/// alpha * H(mean confidence) + beta * log(ED + floor), ED the Gram
/// determinant of the L2-normalized confidences with the y0 component
/// removed.
AdpLoss adp_loss(autodiff::Graph& g, std::span<const model::MlpClassifier> members,
                 const Vector& x_noisy, int y0, double alpha_adp, double beta_adp,
                 bool entropy_per_member = false);

/// log sum_{i<j} exp(cos(grad_x ce_i, grad_x ce_j)); zero gradients
/// contribute cosine 0 through the floored denominator.
autodiff::NodeId gal_loss(autodiff::Graph& g, std::span<const model::MlpClassifier> members,
                          const Vector& x_noisy, int y0);

/// Gaussian-augmented ensemble training with the configured regularizer.
/// Mutates the members in place and returns per-epoch statistics.
TrainingHistory train(std::vector<model::MlpClassifier>& members, const data::Dataset& ds,
                      const TrainingConfig& config);

}  // namespace enscert::training
