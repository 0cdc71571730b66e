#include <doctest.h>

#include <cmath>

#include "enscert/model.hpp"
#include "oracles.hpp"

using namespace enscert;
using namespace enscert::model;

namespace {

MlpClassifier zero_model(int d, int c) {
    MlpClassifier::Layer l;
    l.w = Tensor(c, d);
    l.b.assign(c, 0.0);
    return MlpClassifier(d, {l}, Activation::Softplus);
}

MlpClassifier logit_model(const Vector& fixed_logits) {
    // Single layer with zero weights and the requested biases: logits are
    // constant regardless of input.
    const int c = static_cast<int>(fixed_logits.size());
    MlpClassifier::Layer l;
    l.w = Tensor(c, 2);
    l.b = fixed_logits;
    return MlpClassifier(2, {l}, Activation::Softplus);
}

}  // namespace

TEST_CASE("confidences of the zero model are uniform") {
    for (int c : {2, 3, 10}) {
        const auto m = zero_model(3, c);
        const Vector f = m.confidences({0.3, -0.7, 2.0});
        for (double v : f) CHECK(v == doctest::Approx(1.0 / c).epsilon(1e-12));
    }
}

TEST_CASE("confidences closed form for logits (ln2, 0)") {
    const auto m = logit_model({std::log(2.0), 0.0});
    const Vector f = m.confidences({0.0, 0.0});
    CHECK(f[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("confidences sum to one on random models") {
    numstats::RngStream rng(42, 0);
    const auto m = MlpClassifier::init_random(4, {16, 16}, 5, rng);
    numstats::RngStream xs(42, 1);
    for (int i = 0; i < 1000; ++i) {
        const Vector x = numstats::sample_gaussian(xs, 4, 2.0);
        const Vector f = m.confidences(x);
        double s = 0.0;
        for (double v : f) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(std::fabs(s - 1.0) < 1e-9);
    }
}

TEST_CASE("predict basics and tie-breaking") {
    const auto m = logit_model({std::log(0.6), std::log(0.4)});
    const Prediction p = m.predict({0.0, 0.0});
    CHECK(p.top == 0);
    CHECK(p.runner_up == 1);
    CHECK(p.margin == doctest::Approx(0.2).epsilon(1e-9));

    const auto uniform = zero_model(2, 3);
    const Prediction q = uniform.predict({1.0, -1.0});
    CHECK(q.top == 0);
    CHECK(q.runner_up == 1);
    CHECK(q.margin == doctest::Approx(0.0));
}

TEST_CASE("margin properties") {
    const auto m = logit_model({std::log(0.7), std::log(0.3)});
    CHECK(m.margin({0, 0}, 0, 1) == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(m.margin({0, 0}, 1, 1) == 0.0);
    CHECK_THROWS(m.margin({0, 0}, 0, 7));

    numstats::RngStream rng(5, 0);
    const auto r = MlpClassifier::init_random(3, {8}, 4, rng);
    numstats::RngStream xs(5, 1);
    for (int i = 0; i < 200; ++i) {
        const Vector x = numstats::sample_gaussian(xs, 3, 1.0);
        CHECK(std::fabs(r.margin(x, 1, 3) + r.margin(x, 3, 1)) < 1e-12);
        const Prediction p = r.predict(x);
        CHECK(p.margin >= 0.0);
        CHECK(r.margin(x, p.top, p.runner_up) == p.margin);
    }
}

TEST_CASE("softmax translation invariance") {
    const Vector z = {0.3, -1.5, 2.2, 0.0};
    const Vector f1 = softmax(z);
    Vector zs = z;
    for (auto& v : zs) v += 123.25;
    const Vector f2 = softmax(zs);
    for (size_t i = 0; i < z.size(); ++i) CHECK(std::fabs(f1[i] - f2[i]) < 1e-12);
    CHECK(predict_from_confidences(f1).top == predict_from_confidences(f2).top);
}

TEST_CASE("init_random determinism and shape") {
    numstats::RngStream a(11, 3), b(11, 3);
    const auto m1 = MlpClassifier::init_random(5, {7, 9}, 3, a);
    const auto m2 = MlpClassifier::init_random(5, {7, 9}, 3, b);
    CHECK(m1.to_json() == m2.to_json());
    CHECK(m1.layers().size() == 3);

    numstats::RngStream c(1, 0);
    const auto lin = MlpClassifier::init_random(4, {}, 2, c);
    CHECK(lin.layers().size() == 1);
}

TEST_CASE("init_random weight variance matches 2/fan_in") {
    numstats::RngStream rng(77, 0);
    const int fan_in = 200;
    const auto m = MlpClassifier::init_random(fan_in, {500}, 2, rng);
    const auto& w = m.layers()[0].w;
    double sq = 0.0, mean = 0.0;
    for (double x : w.v) {
        mean += x;
        sq += x * x;
    }
    const double n = static_cast<double>(w.size());
    mean /= n;
    const double var = sq / n - mean * mean;
    const double want = 2.0 / fan_in;
    CHECK(std::fabs(var - want) / want < 0.05);
}

TEST_CASE("json round trip is bit faithful") {
    numstats::RngStream rng(123, 9);
    const auto m = MlpClassifier::init_random(3, {5}, 4, rng, Activation::Tanh);
    const auto back = MlpClassifier::from_json(m.to_json());
    CHECK(back.input_dim() == 3);
    CHECK(back.num_classes() == 4);
    CHECK(back.activation() == Activation::Tanh);
    REQUIRE(back.layers().size() == m.layers().size());
    for (size_t li = 0; li < m.layers().size(); ++li) {
        CHECK(m.layers()[li].w.v == back.layers()[li].w.v);
        CHECK(m.layers()[li].b == back.layers()[li].b);
    }
    CHECK(m.to_json() == back.to_json());
}

TEST_CASE("margin_input_gradient single linear layer closed form") {
    // For a linear+softmax model with C=2, the margin gradient is
    // 2 f0 f1 (w0 - w1).
    MlpClassifier::Layer l;
    l.w = Tensor(2, 3);
    const Vector w0 = {0.4, -1.2, 0.7};
    const Vector w1 = {-0.3, 0.5, 0.1};
    for (int c = 0; c < 3; ++c) {
        l.w.at(0, c) = w0[c];
        l.w.at(1, c) = w1[c];
    }
    l.b = {0.2, -0.1};
    const MlpClassifier m(3, {l}, Activation::Softplus);

    const Vector x = {0.3, 0.8, -0.5};
    const Vector f = m.confidences(x);
    const Vector g = m.margin_input_gradient(x, 0, 1);
    for (int c = 0; c < 3; ++c) {
        const double want = 2.0 * f[0] * f[1] * (w0[c] - w1[c]);
        CHECK(std::fabs(g[c] - want) < 1e-12);
    }
}

TEST_CASE("margin_input_gradient zero weights gives zero vector") {
    const auto m = zero_model(4, 3);
    for (double v : m.margin_input_gradient({0.1, 0.2, 0.3, 0.4}, 0, 2)) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("margin_input_gradient matches finite differences on a 2-layer MLP") {
    numstats::RngStream rng(31, 2);
    const auto m = MlpClassifier::init_random(4, {12, 12}, 3, rng);
    numstats::RngStream xs(31, 3);
    const double h = 1e-5;
    for (int rep = 0; rep < 20; ++rep) {
        Vector x = numstats::sample_gaussian(xs, 4, 1.0);
        const Vector g = m.margin_input_gradient(x, 0, 2);
        for (int i = 0; i < 4; ++i) {
            const double save = x[i];
            x[i] = save + h;
            const double fp = m.margin(x, 0, 2);
            x[i] = save - h;
            const double fm = m.margin(x, 0, 2);
            x[i] = save;
            const double fd = (fp - fm) / (2.0 * h);
            CHECK(oracles::rel_err(g[i], fd) < 1e-4);
        }
    }
}
