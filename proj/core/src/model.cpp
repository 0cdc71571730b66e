#include "enscert/model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace enscert::model {

std::string to_string(Activation a) {
    return a == Activation::Softplus ? "softplus" : "tanh";
}

Activation activation_from_string(const std::string& s) {
    if (s == "softplus") return Activation::Softplus;
    if (s == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation: " + s);
}

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double activation_value(Activation a, double x) {
    return a == Activation::Softplus ? softplus(x) : std::tanh(x);
}

double activation_derivative(Activation a, double x) {
    if (a == Activation::Softplus) return sigmoid(x);
    const double t = std::tanh(x);
    return 1.0 - t * t;
}

MlpClassifier::MlpClassifier(int input_dim, std::vector<Layer> layers, Activation activation)
    : input_dim_(input_dim), activation_(activation), layers_(std::move(layers)) {
    if (input_dim < 1) throw std::invalid_argument("MlpClassifier: input_dim must be >= 1");
    if (layers_.empty()) throw std::invalid_argument("MlpClassifier: at least one layer");
    int expect = input_dim;
    for (const auto& l : layers_) {
        if (l.w.cols != expect) throw std::invalid_argument("MlpClassifier: layer shape mismatch");
        if (static_cast<int>(l.b.size()) != l.w.rows)
            throw std::invalid_argument("MlpClassifier: bias shape mismatch");
        expect = l.w.rows;
    }
    num_classes_ = expect;
    if (num_classes_ < 2) throw std::invalid_argument("MlpClassifier: need C >= 2 outputs");
}

MlpClassifier MlpClassifier::init_random(int input_dim, const std::vector<int>& hidden,
                                         int num_classes, numstats::RngStream& rng,
                                         Activation activation) {
    std::vector<Layer> layers;
    int fan_in = input_dim;
    auto make_layer = [&rng](int out, int in) {
        Layer l;
        l.w = Tensor(out, in);
        const double std_dev = std::sqrt(2.0 / in);
        for (auto& x : l.w.v) x = std_dev * rng.normal();
        l.b.assign(out, 0.0);
        return l;
    };
    for (int h : hidden) {
        layers.push_back(make_layer(h, fan_in));
        fan_in = h;
    }
    layers.push_back(make_layer(num_classes, fan_in));
    return MlpClassifier(input_dim, std::move(layers), activation);
}

Vector MlpClassifier::logits(const Vector& x) const {
    if (static_cast<int>(x.size()) != input_dim_)
        throw std::invalid_argument("MlpClassifier: input dimension mismatch");
    Vector cur = x;
    for (size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        Vector next(l.w.rows);
        matvec_into(l.w, cur.data(), next.data());
        for (int r = 0; r < l.w.rows; ++r) next[r] += l.b[r];
        if (li + 1 < layers_.size()) {
            for (auto& v : next) v = activation_value(activation_, v);
        }
        cur = std::move(next);
    }
    return cur;
}

Vector softmax(const Vector& z) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    Vector out(z.size());
    double total = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - mx);
        total += out[i];
    }
    for (auto& v : out) v /= total;
    return out;
}

Vector MlpClassifier::confidences(const Vector& x) const { return softmax(logits(x)); }

Prediction predict_from_confidences(const Vector& conf) {
    Prediction p;
    p.top = 0;
    for (size_t j = 1; j < conf.size(); ++j) {
        if (conf[j] > conf[p.top]) p.top = static_cast<int>(j);
    }
    p.runner_up = p.top == 0 ? 1 : 0;
    for (size_t j = 0; j < conf.size(); ++j) {
        if (static_cast<int>(j) == p.top) continue;
        if (conf[j] > conf[p.runner_up]) p.runner_up = static_cast<int>(j);
    }
    p.margin = conf[p.top] - conf[p.runner_up];
    return p;
}

Prediction MlpClassifier::predict(const Vector& x) const {
    return predict_from_confidences(confidences(x));
}

double MlpClassifier::margin(const Vector& x, int y1, int y2) const {
    if (y1 < 0 || y1 >= num_classes_ || y2 < 0 || y2 >= num_classes_)
        throw std::invalid_argument("MlpClassifier::margin: class label out of range");
    const Vector f = confidences(x);
    return f[y1] - f[y2];
}

Vector MlpClassifier::margin_input_gradient(const Vector& x, int y1, int y2) const {
    if (y1 < 0 || y1 >= num_classes_ || y2 < 0 || y2 >= num_classes_)
        throw std::invalid_argument("margin_input_gradient: class label out of range");

    // Forward pass keeping pre-activations.
    std::vector<Vector> pre;  // z_l per layer
    Vector cur = x;
    for (size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        Vector z(l.w.rows);
        matvec_into(l.w, cur.data(), z.data());
        for (int r = 0; r < l.w.rows; ++r) z[r] += l.b[r];
        pre.push_back(z);
        if (li + 1 < layers_.size()) {
            cur.resize(z.size());
            for (size_t i = 0; i < z.size(); ++i) cur[i] = activation_value(activation_, z[i]);
        }
    }

    // Softmax-margin Jacobian row: d(f_{y1} - f_{y2})/dz_k.
    const Vector f = softmax(pre.back());
    Vector v(f.size());
    const double diff = f[y1] - f[y2];
    for (size_t k = 0; k < f.size(); ++k) {
        v[k] = -diff * f[k];
        if (static_cast<int>(k) == y1) v[k] += f[y1];
        if (static_cast<int>(k) == y2) v[k] -= f[y2];
    }

    // Transposed-weight chain with activation-derivative scalings.
    for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
        const Layer& l = layers_[li];
        Vector prev(l.w.cols);
        matvec_transposed_into(l.w, v.data(), prev.data());
        if (li > 0) {
            const Vector& z = pre[li - 1];
            for (size_t i = 0; i < prev.size(); ++i)
                prev[i] *= activation_derivative(activation_, z[i]);
        }
        v = std::move(prev);
    }
    return v;
}

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

std::string MlpClassifier::to_json() const {
    std::ostringstream os;
    os << "{\"dims\":[" << input_dim_;
    for (size_t li = 0; li < layers_.size(); ++li) os << "," << layers_[li].w.rows;
    os << "],\"activation\":\"" << to_string(activation_) << "\",\"layers\":[";
    for (size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        if (li) os << ",";
        os << "{\"w\":[";
        for (int r = 0; r < l.w.rows; ++r) {
            if (r) os << ",";
            os << "[";
            for (int c = 0; c < l.w.cols; ++c) {
                if (c) os << ",";
                os << fmt17(l.w.at(r, c));
            }
            os << "]";
        }
        os << "],\"b\":[";
        for (size_t i = 0; i < l.b.size(); ++i) {
            if (i) os << ",";
            os << fmt17(l.b[i]);
        }
        os << "]}";
    }
    os << "]}";
    return os.str();
}

MlpClassifier MlpClassifier::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    const auto dims = j.at("dims").get<std::vector<int>>();
    if (dims.size() < 2) throw std::invalid_argument("model json: dims must list input and outputs");
    const Activation act = activation_from_string(j.at("activation").get<std::string>());
    std::vector<Layer> layers;
    for (const auto& jl : j.at("layers")) {
        Layer l;
        const auto& w = jl.at("w");
        const int rows = static_cast<int>(w.size());
        const int cols = static_cast<int>(w.at(0).size());
        l.w = Tensor(rows, cols);
        for (int r = 0; r < rows; ++r) {
            const auto& row = w.at(r);
            if (static_cast<int>(row.size()) != cols)
                throw std::invalid_argument("model json: ragged weight matrix");
            for (int c = 0; c < cols; ++c) l.w.at(r, c) = row.at(c).get<double>();
        }
        l.b = jl.at("b").get<std::vector<double>>();
        layers.push_back(std::move(l));
    }
    return MlpClassifier(dims.front(), std::move(layers), act);
}

}  // namespace enscert::model
