#include "enscert/ensemble.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "enscert/format.hpp"

namespace enscert::ensemble {

namespace {

double weight_l1(std::span<const double> w) {
    double s = 0.0;
    for (double x : w) s += x;
    return s;
}

void check_members(std::span<const model::MlpClassifier> members) {
    if (members.empty()) throw std::invalid_argument("ensemble: at least one member");
    const int d = members[0].input_dim();
    const int c = members[0].num_classes();
    for (const auto& m : members) {
        if (m.input_dim() != d || m.num_classes() != c)
            throw std::invalid_argument("ensemble: members must share (d, C)");
    }
}

}  // namespace

std::string to_string(Protocol p) { return p == Protocol::WE ? "we" : "mme"; }

Protocol protocol_from_string(const std::string& s) {
    if (s == "we") return Protocol::WE;
    if (s == "mme") return Protocol::MME;
    throw std::invalid_argument("unknown ensemble protocol: " + s);
}

EnsembleSpec EnsembleSpec::we(std::vector<model::MlpClassifier> members,
                              std::vector<double> weights) {
    check_members(members);
    if (weights.size() != members.size())
        throw std::invalid_argument("EnsembleSpec: one weight per member");
    for (double w : weights) {
        if (!(w > 0.0)) throw std::invalid_argument("EnsembleSpec: WE weights must be positive");
    }
    EnsembleSpec s;
    s.protocol = Protocol::WE;
    s.members = std::move(members);
    s.weights = std::move(weights);
    return s;
}

EnsembleSpec EnsembleSpec::mme(std::vector<model::MlpClassifier> members) {
    check_members(members);
    EnsembleSpec s;
    s.protocol = Protocol::MME;
    s.members = std::move(members);
    return s;
}

int EnsembleSpec::predict(const Vector& x) const {
    return protocol == Protocol::WE ? we_predict(*this, x) : mme_predict(*this, x);
}

int we_predict(std::span<const model::MlpClassifier> members,
               std::span<const double> weights, const Vector& x) {
    if (members.size() != weights.size())
        throw std::invalid_argument("we_predict: one weight per member");
    const int c = members[0].num_classes();
    Vector score(static_cast<size_t>(c), 0.0);
    for (size_t i = 0; i < members.size(); ++i) {
        const Vector f = members[i].confidences(x);
        for (int j = 0; j < c; ++j) score[j] += weights[i] * f[j];
    }
    int best = 0;
    for (int j = 1; j < c; ++j) {
        if (score[j] > score[best]) best = j;
    }
    return best;
}

int we_predict(const EnsembleSpec& spec, const Vector& x) {
    if (spec.protocol != Protocol::WE)
        throw std::invalid_argument("we_predict: spec protocol is not WE");
    return we_predict(spec.members, spec.weights, x);
}

int mme_predict(std::span<const model::MlpClassifier> members, const Vector& x) {
    check_members(members);
    double best_margin = -std::numeric_limits<double>::infinity();
    int chosen_top = 0;
    for (size_t i = 0; i < members.size(); ++i) {
        const model::Prediction p = members[i].predict(x);
        if (p.margin > best_margin) {
            best_margin = p.margin;
            chosen_top = p.top;
        }
    }
    return chosen_top;
}

int mme_predict(const EnsembleSpec& spec, const Vector& x) {
    if (spec.protocol != Protocol::MME)
        throw std::invalid_argument("mme_predict: spec protocol is not MME");
    return mme_predict(spec.members, x);
}

EriReport eri_we(std::span<const model::MlpClassifier> members,
                 std::span<const double> weights, const Vector& x0, int y0, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("eri_we: r must be positive");
    check_members(members);
    const int c = members[0].num_classes();
    if (y0 < 0 || y0 >= c) throw std::invalid_argument("eri_we: y0 out of range");
    const double w1 = weight_l1(weights);

    EriReport rep;
    rep.r = r;
    rep.y0 = y0;
    rep.min_value = std::numeric_limits<double>::infinity();
    for (int y = 0; y < c; ++y) {
        if (y == y0) continue;
        Vector grad_sum(x0.size(), 0.0);
        double margin_sum = 0.0;
        for (size_t j = 0; j < members.size(); ++j) {
            const Vector gj = members[j].margin_input_gradient(x0, y0, y);
            for (size_t k = 0; k < grad_sum.size(); ++k) grad_sum[k] += weights[j] * gj[k];
            margin_sum += weights[j] * members[j].margin(x0, y0, y);
        }
        const double value = l2_norm(grad_sum) / w1 - margin_sum / (r * w1);
        rep.classes.push_back(y);
        rep.values.push_back(value);
        rep.min_value = std::min(rep.min_value, value);
    }
    return rep;
}

std::string to_string(RobustnessStatus s) {
    switch (s) {
        case RobustnessStatus::CertifiedRobust: return "certified_robust";
        case RobustnessStatus::CertifiedNotRobust: return "certified_not_robust";
        case RobustnessStatus::Undetermined: return "undetermined";
    }
    return "undetermined";
}

std::string EriReport::to_json() const {
    std::ostringstream os;
    os << "{\"r\":" << fmt17(r) << ",\"y0\":" << y0 << ",\"per_class\":[";
    for (size_t i = 0; i < classes.size(); ++i) {
        if (i) os << ",";
        os << "{\"y\":" << classes[i] << ",\"indicator\":" << fmt17(values[i]) << "}";
    }
    os << "],\"min\":" << fmt17(min_value) << "}";
    return os.str();
}

std::string RobustnessVerdict::to_json() const {
    std::ostringstream os;
    os << "{\"status\":\"" << to_string(status) << "\",\"r\":" << fmt17(r)
       << ",\"beta\":" << fmt17(beta) << ",\"per_class\":[";
    for (size_t i = 0; i < per_class.size(); ++i) {
        const PerClass& pc = per_class[i];
        if (i) os << ",";
        os << "{\"y1\":" << pc.y1;
        if (pc.y2 >= 0) os << ",\"y2\":" << pc.y2;
        os << ",\"gradient_norm\":" << fmt17(pc.gradient_norm)
           << ",\"margin_term\":" << fmt17(pc.margin_term)
           << ",\"sufficient_rhs\":" << fmt17(pc.sufficient_rhs)
           << ",\"necessary_rhs\":" << fmt17(pc.necessary_rhs) << "}";
    }
    os << "],\"necessary_hypothesis_assumed\":"
       << (necessary_hypothesis_assumed ? "true" : "false") << "}";
    return os.str();
}

RobustnessVerdict check_we_robustness(std::span<const model::MlpClassifier> members,
                                      std::span<const double> weights, const Vector& x0,
                                      int y0, double r, double beta) {
    if (!(r > 0.0)) throw std::invalid_argument("check_we_robustness: r must be positive");
    if (beta < 0.0) throw std::invalid_argument("check_we_robustness: beta must be >= 0");
    if (we_predict(members, weights, x0) != y0)
        throw std::invalid_argument("check_we_robustness: WE prediction at x0 is not y0");

    const int c = members[0].num_classes();
    const double w1 = weight_l1(weights);

    RobustnessVerdict v;
    v.r = r;
    v.beta = beta;
    bool all_sufficient = true;
    bool any_necessary_violated = false;
    for (int y = 0; y < c; ++y) {
        if (y == y0) continue;
        Vector grad_sum(x0.size(), 0.0);
        double margin_sum = 0.0;
        for (size_t j = 0; j < members.size(); ++j) {
            const Vector gj = members[j].margin_input_gradient(x0, y0, y);
            for (size_t k = 0; k < grad_sum.size(); ++k) grad_sum[k] += weights[j] * gj[k];
            margin_sum += weights[j] * members[j].margin(x0, y0, y);
        }
        RobustnessVerdict::PerClass pc;
        pc.y1 = y;
        pc.gradient_norm = l2_norm(grad_sum);
        pc.margin_term = margin_sum;
        pc.sufficient_rhs = margin_sum / r - beta * r * w1;
        pc.necessary_rhs = margin_sum / r + beta * r * w1;
        all_sufficient = all_sufficient && (pc.gradient_norm <= pc.sufficient_rhs);
        any_necessary_violated = any_necessary_violated || (pc.gradient_norm > pc.necessary_rhs);
        v.per_class.push_back(pc);
    }
    if (all_sufficient) {
        v.status = RobustnessStatus::CertifiedRobust;
    } else if (any_necessary_violated) {
        v.status = RobustnessStatus::CertifiedNotRobust;
    } else {
        v.status = RobustnessStatus::Undetermined;
    }
    return v;
}

RobustnessVerdict check_mme_robustness(std::span<const model::MlpClassifier> members,
                                       const Vector& x0, int y0, double r, double beta) {
    if (members.size() != 2)
        throw std::invalid_argument("check_mme_robustness: exactly two members required");
    if (!(r > 0.0)) throw std::invalid_argument("check_mme_robustness: r must be positive");
    if (beta < 0.0) throw std::invalid_argument("check_mme_robustness: beta must be >= 0");
    if (mme_predict(members, x0) != y0)
        throw std::invalid_argument("check_mme_robustness: MME prediction at x0 is not y0");

    const int c = members[0].num_classes();
    RobustnessVerdict v;
    v.r = r;
    v.beta = beta;
    v.necessary_hypothesis_assumed = true;
    bool all_sufficient = true;
    bool any_necessary_violated = false;
    for (int y1 = 0; y1 < c; ++y1) {
        if (y1 == y0) continue;
        const Vector g1 = members[0].margin_input_gradient(x0, y0, y1);
        const double m1 = members[0].margin(x0, y0, y1);
        for (int y2 = 0; y2 < c; ++y2) {
            if (y2 == y0) continue;
            const Vector g2 = members[1].margin_input_gradient(x0, y0, y2);
            Vector s(g1.size());
            for (size_t k = 0; k < s.size(); ++k) s[k] = g1[k] + g2[k];

            RobustnessVerdict::PerClass pc;
            pc.y1 = y1;
            pc.y2 = y2;
            pc.gradient_norm = l2_norm(s);
            pc.margin_term = m1 + members[1].margin(x0, y0, y2);
            pc.sufficient_rhs = pc.margin_term / r - 2.0 * beta * r;
            pc.necessary_rhs = pc.margin_term / r + 2.0 * beta * r;
            all_sufficient = all_sufficient && (pc.gradient_norm <= pc.sufficient_rhs);
            any_necessary_violated =
                any_necessary_violated || (pc.gradient_norm > pc.necessary_rhs);
            v.per_class.push_back(pc);
        }
    }
    if (all_sufficient) {
        v.status = RobustnessStatus::CertifiedRobust;
    } else if (any_necessary_violated) {
        v.status = RobustnessStatus::CertifiedNotRobust;
    } else {
        v.status = RobustnessStatus::Undetermined;
    }
    return v;
}

RobustnessVerdict check_single_robustness(const model::MlpClassifier& m, const Vector& x0,
                                          int y0, double r, double beta) {
    const model::MlpClassifier members[] = {m};
    const double weights[] = {1.0};
    return check_we_robustness(members, weights, x0, y0, r, beta);
}

double max_certified_radius_we(std::span<const model::MlpClassifier> members,
                               std::span<const double> weights, const Vector& x0, int y0,
                               double beta) {
    if (beta < 0.0) throw std::invalid_argument("max_certified_radius_we: beta must be >= 0");
    if (we_predict(members, weights, x0) != y0)
        throw std::invalid_argument("max_certified_radius_we: WE prediction at x0 is not y0");

    const int c = members[0].num_classes();
    const double w1 = weight_l1(weights);
    double best = std::numeric_limits<double>::infinity();
    for (int y = 0; y < c; ++y) {
        if (y == y0) continue;
        Vector grad_sum(x0.size(), 0.0);
        double margin_sum = 0.0;
        for (size_t j = 0; j < members.size(); ++j) {
            const Vector gj = members[j].margin_input_gradient(x0, y0, y);
            for (size_t k = 0; k < grad_sum.size(); ++k) grad_sum[k] += weights[j] * gj[k];
            margin_sum += weights[j] * members[j].margin(x0, y0, y);
        }
        if (margin_sum <= 0.0) return 0.0;
        const double g = l2_norm(grad_sum);
        double r_class;
        if (beta == 0.0) {
            r_class = g > 0.0 ? margin_sum / g : std::numeric_limits<double>::infinity();
        } else {
            const double bw = beta * w1;
            r_class = (-g + std::sqrt(g * g + 4.0 * bw * margin_sum)) / (2.0 * bw);
        }
        best = std::min(best, r_class);
    }
    return best;
}

RadiusBoundReport ensemble_radius_bound(std::span<const model::MlpClassifier> member_pair,
                                        std::span<const double> weights, const Vector& x0,
                                        int y0, double r, double delta, double cos_theta,
                                        Protocol protocol) {
    if (member_pair.size() != 2)
        throw std::invalid_argument("ensemble_radius_bound: exactly two members required");
    if (!(delta >= 0.0 && delta < 1.0))
        throw std::invalid_argument("ensemble_radius_bound: Delta must lie in [0, 1)");
    if (!(cos_theta >= -1.0 && cos_theta <= 1.0))
        throw std::invalid_argument("ensemble_radius_bound: cos_theta must lie in [-1, 1]");

    const int c = member_pair[0].num_classes();
    const Vector f1 = member_pair[0].confidences(x0);
    const Vector f2 = member_pair[1].confidences(x0);

    double coupling = std::numeric_limits<double>::infinity();
    double min_margin = std::numeric_limits<double>::infinity();
    if (protocol == Protocol::WE) {
        const double w1 = weights[0], w2 = weights[1];
        for (int y = 0; y < c; ++y) {
            if (y == y0) continue;
            const double m1 = f1[y0] - f1[y];
            const double m2 = f2[y0] - f2[y];
            const double den = w1 * m1 + w2 * m2;
            if (den == 0.0)
                throw std::domain_error("ensemble_radius_bound: degenerate margins");
            coupling = std::min(coupling, 2.0 * w1 * w2 * m1 * m2 / (den * den));
            min_margin = std::min({min_margin, m1, m2});
        }
    } else {
        for (int y1 = 0; y1 < c; ++y1) {
            if (y1 == y0) continue;
            for (int y2 = 0; y2 < c; ++y2) {
                if (y2 == y0) continue;
                const double m1 = f1[y0] - f1[y1];
                const double m2 = f2[y0] - f2[y2];
                const double den = m1 + m2;
                if (den == 0.0)
                    throw std::domain_error("ensemble_radius_bound: degenerate margins");
                coupling = std::min(coupling, 2.0 * m1 * m2 / (den * den));
                min_margin = std::min({min_margin, m1, m2});
            }
        }
    }

    const double under = 1.0 - coupling * (1.0 - cos_theta);
    if (!(under > 0.0))
        throw std::domain_error("ensemble_radius_bound: 1 - C (1 - cos theta) must be positive");

    RadiusBoundReport rep;
    rep.C = coupling;
    const double factor = (1.0 - delta) / (1.0 + delta) / std::sqrt(under);
    rep.R = r * factor;
    rep.c = std::max(factor, 1.0);
    rep.beta_threshold = delta * min_margin / (rep.c * rep.c * r * r);
    return rep;
}

std::vector<std::vector<double>> simplex_grid(int n, double step) {
    if (n < 1) throw std::invalid_argument("simplex_grid: n must be >= 1");
    const int k = static_cast<int>(std::lround(1.0 / step));
    if (!(step > 0.0) || std::fabs(k * step - 1.0) > 1e-9)
        throw std::invalid_argument("simplex_grid: step must divide 1 evenly");

    std::vector<std::vector<double>> out;
    std::vector<int> units(static_cast<size_t>(n), 0);
    // Lexicographic enumeration of compositions of k into n parts.
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == n - 1) {
            units[pos] = remaining;
            std::vector<double> w(n);
            for (int i = 0; i < n; ++i) w[i] = units[i] * step;
            out.push_back(std::move(w));
            return;
        }
        for (int u = 0; u <= remaining; ++u) {
            units[pos] = u;
            self(self, pos + 1, remaining - u);
        }
    };
    rec(rec, 0, k);
    return out;
}

std::vector<double> optimal_weights_grid(std::span<const model::MlpClassifier> members,
                                         std::span<const Vector> inputs,
                                         std::span<const int> labels, double step) {
    const int n = static_cast<int>(members.size());
    if (n > 4) throw std::invalid_argument("optimal_weights_grid: N <= 4 grids only");
    if (inputs.size() != labels.size())
        throw std::invalid_argument("optimal_weights_grid: one label per input");
    if (inputs.empty()) throw std::invalid_argument("optimal_weights_grid: empty sample");

    // Mispredicted points contribute 0; unbounded radii are capped so one
    // point cannot dominate the mean.
    constexpr double kRadiusCap = 1e6;
    const auto grid = simplex_grid(n, step);
    std::vector<double> best_w;
    double best_obj = -1.0;
    for (const auto& w : grid) {
        double total = 0.0;
        for (size_t i = 0; i < inputs.size(); ++i) {
            if (we_predict(members, w, inputs[i]) != labels[i]) continue;
            const double r = max_certified_radius_we(members, w, inputs[i], labels[i], 0.0);
            total += std::min(r, kRadiusCap);
        }
        const double obj = total / static_cast<double>(inputs.size());
        if (obj > best_obj) {
            best_obj = obj;
            best_w = w;
        }
    }
    return best_w;
}

}  // namespace enscert::ensemble
