#include "enscert/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "enscert/format.hpp"

namespace enscert::smoothing {

void SmoothingSpec::validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("SmoothingSpec: sigma must be positive");
    if (n0 < 1) throw std::invalid_argument("SmoothingSpec: n0 must be >= 1");
    if (n < n0) throw std::invalid_argument("SmoothingSpec: n must be >= n0");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("SmoothingSpec: alpha must lie in (0, 1)");
}

std::vector<int64_t> mc_class_frequencies(const Classifier& classify, const Vector& x,
                                          double sigma, int64_t m, int num_classes,
                                          numstats::RngStream& rng) {
    if (m < 1) throw std::invalid_argument("mc_class_frequencies: m must be >= 1");
    std::vector<int64_t> counts(static_cast<size_t>(num_classes), 0);
    Vector noisy(x.size());
    for (int64_t i = 0; i < m; ++i) {
        for (size_t k = 0; k < x.size(); ++k) noisy[k] = x[k] + sigma * rng.normal();
        const int c = classify(noisy);
        counts.at(static_cast<size_t>(c)) += 1;
    }
    return counts;
}

CertificationRecord certify_classifier_ebs(const Classifier& classify, int num_classes,
                                           const SmoothingSpec& spec, const Vector& x,
                                           int label, numstats::RngStream& rng) {
    spec.validate();
    CertificationRecord rec;
    rec.label = label;
    rec.samples = spec.n;

    // Stage 1: candidate selection.
    const auto counts0 = mc_class_frequencies(classify, x, spec.sigma, spec.n0, num_classes, rng);
    int candidate = 0;
    for (int c = 1; c < num_classes; ++c) {
        if (counts0[c] > counts0[candidate]) candidate = c;
    }
    rec.prediction = candidate;
    rec.correct = candidate == label;

    // Stage 2: fresh draws for the binomial bound; selection samples are
    // never reused.
    Vector noisy(x.size());
    int64_t hits = 0;
    for (int64_t i = 0; i < spec.n; ++i) {
        for (size_t k = 0; k < x.size(); ++k) noisy[k] = x[k] + spec.sigma * rng.normal();
        if (classify(noisy) == candidate) ++hits;
    }
    rec.hits = hits;
    rec.p_lower = numstats::clopper_pearson_lower(hits, spec.n, spec.alpha);
    if (rec.p_lower > 0.5) {
        rec.abstain = false;
        rec.radius = spec.sigma * numstats::std_normal_quantile(rec.p_lower);
    } else {
        rec.abstain = true;
        rec.radius = 0.0;
    }
    return rec;
}

CertificationRecord certify_ebs(const ensemble::EnsembleSpec& ens, const SmoothingSpec& spec,
                                const Vector& x, int label, numstats::RngStream& rng) {
    const Classifier classify = [&ens](const Vector& z) { return ens.predict(z); };
    return certify_classifier_ebs(classify, ens.num_classes(), spec, x, label, rng);
}

EasCertification certify_eas(std::span<const model::MlpClassifier> members,
                             const SmoothingSpec& spec, const Vector& x, int label,
                             numstats::RngStream& rng) {
    spec.validate();
    if (members.empty()) throw std::invalid_argument("certify_eas: at least one member");
    const int num_classes = members[0].num_classes();
    const size_t n_members = members.size();

    // Stage 1 per member: smoothed top class and its selection frequency.
    std::vector<int> candidate(n_members);
    std::vector<double> freq(n_members);
    for (size_t i = 0; i < n_members; ++i) {
        const Classifier classify = [&members, i](const Vector& z) {
            return members[i].predict(z).top;
        };
        const auto counts =
            mc_class_frequencies(classify, x, spec.sigma, spec.n0, num_classes, rng);
        int best = 0;
        for (int c = 1; c < num_classes; ++c) {
            if (counts[c] > counts[best]) best = c;
        }
        candidate[i] = best;
        freq[i] = static_cast<double>(counts[best]) / static_cast<double>(spec.n0);
    }

    // The ensemble agrees on the member with the highest smoothed top-class
    // frequency (ties to the lowest member index).
    size_t winner = 0;
    for (size_t i = 1; i < n_members; ++i) {
        if (freq[i] > freq[winner]) winner = i;
    }
    const int y0 = candidate[winner];

    EasCertification out;
    out.selected_member = static_cast<int>(winner);
    out.signed_radii.resize(n_members);

    double winner_p = 0.0;
    int64_t winner_hits = 0;
    for (size_t i = 0; i < n_members; ++i) {
        Vector noisy(x.size());
        int64_t hits = 0;
        for (int64_t k = 0; k < spec.n; ++k) {
            for (size_t d = 0; d < x.size(); ++d) noisy[d] = x[d] + spec.sigma * rng.normal();
            if (members[i].predict(noisy).top == candidate[i]) ++hits;
        }
        const double p_i = numstats::clopper_pearson_lower(hits, spec.n, spec.alpha);
        const double base = p_i > 0.0 && p_i < 1.0
                                ? spec.sigma * numstats::std_normal_quantile(p_i)
                                : (p_i <= 0.0 ? -std::numeric_limits<double>::infinity()
                                              : std::numeric_limits<double>::infinity());
        out.signed_radii[i] = candidate[i] == y0 ? base : -base;
        if (i == winner) {
            winner_p = p_i;
            winner_hits = hits;
        }
    }

    const double hi = *std::max_element(out.signed_radii.begin(), out.signed_radii.end());
    const double lo = *std::min_element(out.signed_radii.begin(), out.signed_radii.end());
    out.raw_radius = 0.5 * (hi + lo);

    CertificationRecord& rec = out.record;
    rec.label = label;
    rec.prediction = y0;
    rec.correct = y0 == label;
    rec.hits = winner_hits;
    rec.samples = spec.n;
    rec.p_lower = winner_p;
    rec.radius = std::max(out.raw_radius, 0.0);
    rec.abstain = !(rec.radius > 0.0);
    if (rec.abstain) rec.radius = 0.0;
    return out;
}

std::string to_string(StrategyVerdict v) {
    switch (v) {
        case StrategyVerdict::EBSHigher: return "ebs_higher";
        case StrategyVerdict::EASHigherOrEqual: return "eas_higher_or_equal";
        case StrategyVerdict::Undetermined: return "undetermined";
    }
    return "undetermined";
}

StrategyComparison compare_smoothing_strategies(double p_a, double p_b, double p_ab,
                                                double p, double sigma) {
    if (!(p_a > 0.5 && p_a < 1.0 && p_b > 0.5 && p_b < 1.0))
        throw std::invalid_argument("compare_smoothing_strategies: need 0.5 < p_a, p_b < 1");
    if (!(p_ab >= 0.0 && p_ab <= std::min(p_a, p_b)))
        throw std::invalid_argument("compare_smoothing_strategies: need 0 <= p_ab <= min(p_a, p_b)");
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("compare_smoothing_strategies: need 0 <= p <= 1");

    const double prob_ebs = p_ab + p * (p_a + p_b - 2.0 * p_ab);
    if (!(prob_ebs > 0.0 && prob_ebs < 1.0))
        throw std::invalid_argument(
            "compare_smoothing_strategies: inconsistent probabilities (combined mass "
            "outside (0, 1))");

    StrategyComparison cmp;
    cmp.r_ebs = sigma * numstats::std_normal_quantile(prob_ebs);
    cmp.r_eas = 0.5 * sigma *
                (numstats::std_normal_quantile(p_a) + numstats::std_normal_quantile(p_b));

    if (p <= 0.5) {
        cmp.verdict = StrategyVerdict::EASHigherOrEqual;
        return cmp;
    }
    // Case-1 threshold 1/2 + (2 + 4 (p_min - p_ab)/delta)^{-1} in the
    // algebraically equal form (p_max - p_ab) / (p_a + p_b - 2 p_ab), which
    // stays defined at p_a == p_b.
    const double denom = p_a + p_b - 2.0 * p_ab;
    if (denom > 0.0 && p > (std::max(p_a, p_b) - p_ab) / denom) {
        cmp.verdict = StrategyVerdict::EBSHigher;
    } else {
        cmp.verdict = StrategyVerdict::Undetermined;
    }
    return cmp;
}

Vector soft_confidence(const model::MlpClassifier& m, const Vector& x, double sigma,
                       int64_t samples, numstats::RngStream& rng) {
    if (samples < 1) throw std::invalid_argument("soft_confidence: m must be >= 1");
    Vector mean(static_cast<size_t>(m.num_classes()), 0.0);
    Vector noisy(x.size());
    for (int64_t i = 0; i < samples; ++i) {
        for (size_t k = 0; k < x.size(); ++k) noisy[k] = x[k] + sigma * rng.normal();
        const Vector f = m.confidences(noisy);
        for (size_t c = 0; c < mean.size(); ++c) mean[c] += f[c];
    }
    for (auto& v : mean) v /= static_cast<double>(samples);
    return mean;
}

NoisyScalar make_soft_confidence_estimator(const model::MlpClassifier& m, int component,
                                           double sigma, int64_t samples,
                                           numstats::RngStream rng) {
    if (component < 0 || component >= m.num_classes())
        throw std::invalid_argument("make_soft_confidence_estimator: bad component");
    auto state = std::make_shared<numstats::RngStream>(rng);
    return [&m, component, sigma, samples, state](const Vector& x) {
        double sum = 0.0, sq = 0.0;
        Vector noisy(x.size());
        for (int64_t i = 0; i < samples; ++i) {
            for (size_t k = 0; k < x.size(); ++k) noisy[k] = x[k] + sigma * state->normal();
            const double v = m.confidences(noisy)[component];
            sum += v;
            sq += v * v;
        }
        const double mean = sum / samples;
        const double var = std::max(sq / samples - mean * mean, 0.0);
        return std::make_pair(mean, std::sqrt(var / samples));
    };
}

ProbeResult smoothness_probe(const NoisyScalar& g, const Vector& x, const Vector& unit_dir,
                             double h) {
    if (!(h > 0.0)) throw std::invalid_argument("smoothness_probe: h must be positive");
    Vector xp = x, xm = x;
    for (size_t i = 0; i < x.size(); ++i) {
        xp[i] += h * unit_dir[i];
        xm[i] -= h * unit_dir[i];
    }
    const auto [gp, sp] = g(xp);
    const auto [g0, s0] = g(x);
    const auto [gm, sm] = g(xm);
    ProbeResult out;
    out.second_difference = (gp - 2.0 * g0 + gm) / (h * h);
    out.std_error = std::sqrt(sp * sp + 4.0 * s0 * s0 + sm * sm) / (h * h);
    return out;
}

AccuracyCurve certified_accuracy_curve(std::span<const CertificationRecord> records,
                                       std::span<const double> radii_grid) {
    if (records.empty())
        throw std::invalid_argument("certified_accuracy_curve: no records");
    AccuracyCurve curve;
    curve.radii.assign(radii_grid.begin(), radii_grid.end());
    const double n = static_cast<double>(records.size());
    for (double r : radii_grid) {
        int64_t ok = 0;
        for (const auto& rec : records) {
            if (rec.correct && !rec.abstain && rec.radius >= r) ++ok;
        }
        curve.accuracy.push_back(static_cast<double>(ok) / n);
    }
    double acr = 0.0;
    for (const auto& rec : records) {
        if (rec.correct) acr += rec.radius;
    }
    curve.acr = acr / n;
    return curve;
}

std::string records_to_csv(std::span<const CertificationRecord> records) {
    std::ostringstream os;
    os << "id,label,prediction,k,n,p_lower,radius,abstain\n";
    for (const auto& r : records) {
        os << r.input_id << "," << r.label << "," << r.prediction << "," << r.hits << ","
           << r.samples << "," << fmt17(r.p_lower) << "," << fmt17(r.radius) << ","
           << (r.abstain ? 1 : 0) << "\n";
    }
    return os.str();
}

std::vector<CertificationRecord> records_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "id,label,prediction,k,n,p_lower,radius,abstain")
        throw std::invalid_argument("records_from_csv: bad header");
    std::vector<CertificationRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        CertificationRecord r;
        auto next = [&]() {
            if (!std::getline(ls, tok, ',')) throw std::invalid_argument("records_from_csv: short row");
            return tok;
        };
        r.input_id = std::stoll(next());
        r.label = std::stoi(next());
        r.prediction = std::stoi(next());
        r.hits = std::stoll(next());
        r.samples = std::stoll(next());
        r.p_lower = std::stod(next());
        r.radius = std::stod(next());
        r.abstain = std::stoi(next()) != 0;
        r.correct = r.prediction == r.label;
        out.push_back(r);
    }
    return out;
}

}  // namespace enscert::smoothing
