#pragma once

// Helpers shared by unit and acceptance tests. These depend on the library
// types but stay independent of the code paths they are used to verify.

#include <cmath>
#include <vector>

#include "enscert/model.hpp"
#include "enscert/numstats.hpp"
#include "enscert/tensor.hpp"

namespace testutil {

using enscert::Tensor;
using enscert::Vector;

/// Conservative global smoothness bound for a softplus/tanh MLP's confidence
/// margins, from Frobenius norms of the layers: curvature of the softmax bounded
/// by 8, activation second derivative by 1/4 (softplus) / 2 (tanh), chained
/// through worst-case layer gains. Valid for any input, typically very loose.
inline double crude_margin_smoothness_bound(const enscert::model::MlpClassifier& m) {
    std::vector<double> fro;
    for (const auto& l : m.layers()) {
        double s = 0.0;
        for (double x : l.w.v) s += x * x;
        fro.push_back(std::sqrt(s));
    }
    const double act_d1 = 1.0;  // |phi'| <= 1 for both activations
    const double act_d2 = m.activation() == enscert::model::Activation::Softplus ? 0.25 : 2.0;

    // Jacobian gain of logits wrt input.
    double jac = 1.0;
    for (double f : fro) jac *= f * act_d1;
    jac /= act_d1;  // final layer has no activation

    // Curvature of logits wrt input: sum over layers of (gain up to the
    // layer)^2 * act_d2 * (gain after the layer).
    double curv = 0.0;
    double gain_before = 1.0;
    for (size_t i = 0; i + 1 < fro.size(); ++i) {
        gain_before *= fro[i];
        double gain_after = 1.0;
        for (size_t j = i + 1; j < fro.size(); ++j) gain_after *= fro[j];
        curv += gain_before * gain_before * act_d2 * gain_after;
    }
    return 8.0 * jac * jac + 1.0 * curv;
}

/// Two-class linear+softmax model in d dimensions: logits (w . x + b, 0).
inline enscert::model::MlpClassifier linear_two_class(const Vector& w, double b) {
    enscert::model::MlpClassifier::Layer l;
    l.w = Tensor(2, static_cast<int>(w.size()));
    for (size_t c = 0; c < w.size(); ++c) l.w.at(0, static_cast<int>(c)) = w[c];
    l.b = {b, 0.0};
    return enscert::model::MlpClassifier(static_cast<int>(w.size()), {l},
                                         enscert::model::Activation::Softplus);
}

/// Constant-confidence model: zero weights, logits equal to the given biases.
inline enscert::model::MlpClassifier constant_logits(int d, const Vector& biases) {
    enscert::model::MlpClassifier::Layer l;
    l.w = Tensor(static_cast<int>(biases.size()), d);
    l.b = biases;
    return enscert::model::MlpClassifier(d, {l}, enscert::model::Activation::Softplus);
}

/// Points evenly spaced on the radius-r circle around x0 (d = 2 only).
inline std::vector<Vector> sphere_grid_2d(const Vector& x0, double r, int count) {
    std::vector<Vector> pts;
    pts.reserve(count);
    for (int k = 0; k < count; ++k) {
        const double t = 2.0 * M_PI * k / count;
        pts.push_back({x0[0] + r * std::cos(t), x0[1] + r * std::sin(t)});
    }
    return pts;
}

}  // namespace testutil
