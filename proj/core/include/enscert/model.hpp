#pragma once

#include <string>
#include <vector>

#include "enscert/numstats.hpp"
#include "enscert/tensor.hpp"

namespace enscert::model {

enum class Activation { Softplus, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Stable softplus/tanh evaluations and their first derivatives.
double softplus(double x);
double sigmoid(double x);
double activation_value(Activation a, double x);
double activation_derivative(Activation a, double x);

struct Prediction {
    int top = 0;
    int runner_up = 1;
    double margin = 0.0;  // f_top - f_runner_up, always >= 0
};

/// Feed-forward classifier with simplex confidence outputs. Architecture is
/// fixed at construction; weights mutate only through training.
class MlpClassifier {
  public:
    struct Layer {
        Tensor w;  // out x in
        Vector b;  // out
    };

    MlpClassifier(int input_dim, std::vector<Layer> layers, Activation activation);

    /// He-style initialization: weights ~ N(0, 2 / fan_in), biases zero,
    /// deterministic per stream.
    static MlpClassifier init_random(int input_dim, const std::vector<int>& hidden,
                                     int num_classes, numstats::RngStream& rng,
                                     Activation activation = Activation::Softplus);

    int input_dim() const { return input_dim_; }
    int num_classes() const { return num_classes_; }
    Activation activation() const { return activation_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& mutable_layers() { return layers_; }

    Vector logits(const Vector& x) const;
    /// Softmax of logits, stabilized by max-logit subtraction.
    Vector confidences(const Vector& x) const;
    /// Top and runner-up classes; ties break toward the lowest class index.
    Prediction predict(const Vector& x) const;
    /// Confidence margin f(x)_{y1} - f(x)_{y2}.
    double margin(const Vector& x, int y1, int y2) const;

    /// Analytic input gradient of the confidence margin, via the layerwise
    /// backward chain. Used by the robustness-condition checkers.
    Vector margin_input_gradient(const Vector& x, int y1, int y2) const;

    /// JSON round trip; reals encoded with 17 significant digits so finite
    /// doubles survive bit-exactly.
    std::string to_json() const;
    static MlpClassifier from_json(const std::string& text);

  private:
    int input_dim_;
    int num_classes_;
    Activation activation_;
    std::vector<Layer> layers_;
};

/// Softmax of an arbitrary logit vector (max-shifted).
Vector softmax(const Vector& logits);

/// Argmax / runner-up with lowest-index tie-breaking.
Prediction predict_from_confidences(const Vector& conf);

}  // namespace enscert::model
