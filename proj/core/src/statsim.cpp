#include "enscert/statsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "enscert/format.hpp"

namespace enscert::statsim {

namespace {

double clip01(double x) { return std::min(std::max(x, 0.0), 1.0); }

// lambda / (1 + lambda) = (1 + 1/lambda)^{-1}
double portion_threshold(double lambda) { return lambda / (1.0 + lambda); }

std::vector<double> effective_weights(const MarginModel& m) {
    if (!m.weights.empty()) {
        if (static_cast<int>(m.weights.size()) != m.n_members)
            throw std::invalid_argument("MarginModel: one weight per member");
        return m.weights;
    }
    return std::vector<double>(static_cast<size_t>(m.n_members),
                               1.0 / static_cast<double>(m.n_members));
}

double weight_ratio_dw(const std::vector<double>& w) {
    double l1 = 0.0, l2 = 0.0;
    for (double x : w) {
        l1 += x;
        l2 += x * x;
    }
    return l2 / (l1 * l1);
}

}  // namespace

void MarginModel::validate() const {
    if (n_members < 1) throw std::invalid_argument("MarginModel: N must be >= 1");
    if (!(lambda1 > 0.0 && lambda2 > 0.0 && lambda3 > 0.0))
        throw std::invalid_argument("MarginModel: lambda parameters must be positive");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("MarginModel: p must lie in [0, 1]");
    if (family == DistributionFamily::Uniform) {
        if (!(a < b) || a < 0.0 || b > 1.0)
            throw std::invalid_argument("MarginModel: uniform support needs 0 <= a < b <= 1");
    } else {
        if (!(s >= 0.0) || !(s_f >= 0.0))
            throw std::invalid_argument("MarginModel: nonnegative spreads required");
    }
}

double MarginModel::mean() const {
    return family == DistributionFamily::Uniform ? 0.5 * (a + b) : mu;
}

double var_min_uniform(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("var_min_uniform: n must be >= 1");
    if (!(a < b)) throw std::invalid_argument("var_min_uniform: need a < b");
    const double nn = static_cast<double>(n);
    return (1.0 / (nn + 1.0)) * (2.0 / (nn + 2.0) - 1.0 / (nn + 1.0)) * (b - a) * (b - a);
}

double statistical_margin_we(std::span<const double> u, std::span<const double> w,
                             double lambda1) {
    if (u.size() != w.size())
        throw std::invalid_argument("statistical_margin_we: one weight per confidence");
    double acc = 0.0, l1 = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        acc += w[i] * u[i];
        l1 += w[i];
    }
    return (1.0 + lambda1) * acc - lambda1 * l1;
}

double statistical_margin_mme(std::span<const double> u, double lambda2) {
    if (u.empty()) throw std::invalid_argument("statistical_margin_mme: empty sample");
    const auto [mn, mx] = std::minmax_element(u.begin(), u.end());
    return (1.0 + lambda2) * (*mx + *mn) - 2.0 * lambda2;
}

BoundReport bound_single(const MarginModel& m) {
    m.validate();
    BoundReport rep;
    if (m.family == DistributionFamily::Uniform) {
        const double t3 = portion_threshold(m.lambda3);
        rep.chebyshev = 1.0 - m.p - clip01((t3 - m.a) / (m.b - m.a));
    } else {
        const double t3 = portion_threshold(m.lambda3);
        if (!(m.mu > t3))
            throw std::domain_error("bound_single: requires mu > lambda3/(1+lambda3)");
        const double gap = m.mu - t3;
        rep.chebyshev = 1.0 - m.p - m.s * m.s / (2.0 * gap * gap);
    }
    rep.best = rep.chebyshev;
    rep.clamped = clip01(rep.best);
    return rep;
}

BoundReport bound_we(const MarginModel& m) {
    m.validate();
    const auto w = effective_weights(m);
    const double dw = weight_ratio_dw(w);
    const double t1 = portion_threshold(m.lambda1);
    const double mean = m.mean();
    if (!(mean > t1)) throw std::domain_error("bound_we: requires mean > lambda1/(1+lambda1)");

    BoundReport rep;
    if (m.family == DistributionFamily::Uniform) {
        const double k1 = (m.b - m.a) / (mean - t1);
        rep.chebyshev = 1.0 - m.p - dw * k1 * k1 / 12.0;
    } else {
        const double gap = mean - t1;
        rep.chebyshev = 1.0 - m.p - dw * m.s * m.s / (2.0 * gap * gap);
    }
    const double gap = mean - t1;
    rep.mcdiarmid = 1.0 - m.p - std::exp(-2.0 * (1.0 / dw) * gap * gap);
    rep.has_mcdiarmid = true;
    rep.best = std::max(rep.chebyshev, rep.mcdiarmid);
    rep.clamped = clip01(rep.best);
    return rep;
}

BoundReport bound_mme(const MarginModel& m) {
    m.validate();
    const double t2 = portion_threshold(m.lambda2);
    const double mean = m.mean();
    if (!(mean > t2)) throw std::domain_error("bound_mme: requires mean > lambda2/(1+lambda2)");

    BoundReport rep;
    if (m.family == DistributionFamily::Uniform) {
        const double nn = static_cast<double>(m.n_members);
        const double c_n = (2.0 / (nn + 1.0)) * (2.0 / (nn + 2.0) - 1.0 / (nn + 1.0));
        const double k2 = (m.b - m.a) / (mean - t2);
        rep.chebyshev = 1.0 - m.p - c_n * k2 * k2 / 4.0;
    } else {
        const double gap = mean - t2;
        rep.chebyshev = 1.0 - m.p - m.s_f * m.s_f / (2.0 * gap * gap);
    }
    rep.best = rep.chebyshev;
    rep.clamped = clip01(rep.best);
    return rep;
}

namespace {

// lambda2^{-1} ((inv_c (mean - t2) + 1 - mean)^{-1} - 1)
double threshold_from_inverse_coupling(double inv_c, double mean, double lambda2) {
    const double t2 = portion_threshold(lambda2);
    const double inner = inv_c * (mean - t2) + 1.0 - mean;
    if (!(inner > 0.0))
        throw std::domain_error("comparison_thresholds: degenerate threshold interior");
    return (1.0 / lambda2) * (1.0 / inner - 1.0);
}

}  // namespace

ComparisonThresholds comparison_thresholds(const MarginModel& m) {
    m.validate();
    const double mean = m.mean();
    const double t2 = portion_threshold(m.lambda2);
    if (!(mean > t2))
        throw std::domain_error("comparison_thresholds: requires mean > lambda2/(1+lambda2)");

    ComparisonThresholds th;
    if (m.family == DistributionFamily::Uniform) {
        const double nn = static_cast<double>(m.n_members);
        const double inv_we = (nn + 1.0) * std::sqrt((nn + 2.0) / (6.0 * nn));
        const double inv_mme = ((nn + 1.0) / nn) * std::sqrt((nn + 2.0) / 6.0);
        th.we_higher_threshold = threshold_from_inverse_coupling(inv_we, mean, m.lambda2);
        th.mme_higher_threshold = threshold_from_inverse_coupling(inv_mme, mean, m.lambda2);
        const double denom = 1.0 - 1.0 / (mean * (1.0 + 1.0 / m.lambda2));
        if (!(denom > 0.0))
            throw std::domain_error("comparison_thresholds: N threshold undefined");
        th.n_threshold = 6.0 / (denom * denom) - 2.0;
        th.has_n_threshold = true;
    } else {
        if (!(m.s_f < m.s))
            throw std::domain_error("comparison_thresholds: requires s_f < s");
        if (!(m.s_f > 0.0))
            throw std::domain_error("comparison_thresholds: requires s_f > 0");
        const double root_n = std::sqrt(static_cast<double>(m.n_members));
        th.we_higher_threshold =
            threshold_from_inverse_coupling(m.s / m.s_f, mean, m.lambda2);
        th.mme_higher_threshold =
            threshold_from_inverse_coupling(m.s / (root_n * m.s_f), mean, m.lambda2);
    }
    return th;
}

std::string to_string(ComparisonVerdict v) {
    switch (v) {
        case ComparisonVerdict::WeHigher: return "we_higher";
        case ComparisonVerdict::MmeHigher: return "mme_higher";
        case ComparisonVerdict::Undetermined: return "undetermined";
    }
    return "undetermined";
}

ComparisonVerdict compare_protocols(const MarginModel& m) {
    const ComparisonThresholds th = comparison_thresholds(m);
    const double ratio = m.lambda1 / m.lambda2;
    if (ratio < th.we_higher_threshold) return ComparisonVerdict::WeHigher;
    if (ratio > th.mme_higher_threshold) return ComparisonVerdict::MmeHigher;
    return ComparisonVerdict::Undetermined;
}

double radius_from_probability(double p, double sigma) {
    const double clamped = std::min(std::max(p, 1e-6), 1.0 - 1e-6);
    return sigma * numstats::std_normal_quantile(clamped);
}

std::vector<TransferabilityTrial> simulate_transferability(const TransferabilityConfig& cfg) {
    if (cfg.trials < 1) throw std::invalid_argument("simulate_transferability: trials >= 1");
    if (cfg.inner_samples < 1)
        throw std::invalid_argument("simulate_transferability: inner_samples >= 1");
    if (cfg.n_members < 1)
        throw std::invalid_argument("simulate_transferability: n_members >= 1");

    std::vector<TransferabilityTrial> out;
    out.reserve(cfg.trials);
    const std::vector<double> w(static_cast<size_t>(cfg.n_members),
                                1.0 / static_cast<double>(cfg.n_members));
    std::vector<double> u(static_cast<size_t>(cfg.n_members));

    for (int t = 0; t < cfg.trials; ++t) {
        numstats::RngStream rng = numstats::RngStream(cfg.seed, 0).substream(t);
        TransferabilityTrial trial;
        trial.trial = t;
        trial.a = cfg.support_min + (cfg.support_max - cfg.support_min) * rng.uniform();
        trial.b = trial.a + (cfg.support_max - trial.a) * rng.uniform();
        const double lambda1 =
            cfg.lambda1_min + (cfg.lambda1_max - cfg.lambda1_min) * rng.uniform();
        trial.lambda_ratio = lambda1 / cfg.lambda2;

        int64_t we_nonneg = 0, mme_nonneg = 0;
        for (int k = 0; k < cfg.inner_samples; ++k) {
            for (auto& v : u) v = trial.a + (trial.b - trial.a) * rng.uniform();
            if (statistical_margin_we(u, w, lambda1) >= 0.0) ++we_nonneg;
            if (statistical_margin_mme(u, cfg.lambda2) >= 0.0) ++mme_nonneg;
        }
        trial.p_we = static_cast<double>(we_nonneg) / cfg.inner_samples;
        trial.p_mme = static_cast<double>(mme_nonneg) / cfg.inner_samples;
        trial.radius_we = radius_from_probability(trial.p_we, cfg.sigma);
        trial.radius_mme = radius_from_probability(trial.p_mme, cfg.sigma);
        trial.diff = trial.radius_mme - trial.radius_we;
        out.push_back(trial);
    }
    return out;
}

std::string transferability_to_csv(std::span<const TransferabilityTrial> trials) {
    std::ostringstream os;
    os << "trial,lambda_ratio,a,b,p_we,p_mme,radius_we,radius_mme,diff\n";
    for (const auto& t : trials) {
        os << t.trial << "," << fmt17(t.lambda_ratio) << "," << fmt17(t.a) << ","
           << fmt17(t.b) << "," << fmt17(t.p_we) << "," << fmt17(t.p_mme) << ","
           << fmt17(t.radius_we) << "," << fmt17(t.radius_mme) << "," << fmt17(t.diff)
           << "\n";
    }
    return os.str();
}

std::vector<BoundSweepRow> bound_sweep(const MarginModel& base, int n_min, int n_max,
                                       double sigma) {
    if (n_min < 1 || n_max < n_min) throw std::invalid_argument("bound_sweep: bad N range");
    std::vector<BoundSweepRow> rows;
    // Reported radii floor at 0: a vacuous bound certifies nothing.
    const auto floor_radius = [sigma](double bound) {
        return std::max(0.0, radius_from_probability(clip01(bound), sigma));
    };
    for (int n = n_min; n <= n_max; ++n) {
        MarginModel m = base;
        m.n_members = n;
        m.weights.clear();
        BoundSweepRow row;
        row.n = n;
        row.bound_single = bound_single(m).best;
        row.bound_we = bound_we(m).best;
        row.bound_mme = bound_mme(m).best;
        row.radius_single = floor_radius(row.bound_single);
        row.radius_we = floor_radius(row.bound_we);
        row.radius_mme = floor_radius(row.bound_mme);
        rows.push_back(row);
    }
    return rows;
}

std::string bound_sweep_to_csv(std::span<const BoundSweepRow> rows) {
    std::ostringstream os;
    os << "n,bound_single,bound_we,bound_mme,radius_single,radius_we,radius_mme\n";
    for (const auto& r : rows) {
        os << r.n << "," << fmt17(r.bound_single) << "," << fmt17(r.bound_we) << ","
           << fmt17(r.bound_mme) << "," << fmt17(r.radius_single) << ","
           << fmt17(r.radius_we) << "," << fmt17(r.radius_mme) << "\n";
    }
    return os.str();
}

std::pair<double, double> lambda_proxies(const ensemble::EnsembleSpec& we_spec,
                                         const Vector& x0, int y0, double sigma, int64_t m,
                                         numstats::RngStream& rng) {
    if (m < 1) throw std::invalid_argument("lambda_proxies: m must be >= 1");
    if (we_spec.protocol != ensemble::Protocol::WE)
        throw std::invalid_argument("lambda_proxies: spec must use WE weights");
    const int c = we_spec.num_classes();
    const size_t n = we_spec.members.size();

    double acc1 = 0.0, acc2 = 0.0;
    Vector noisy(x0.size());
    for (int64_t k = 0; k < m; ++k) {
        for (size_t i = 0; i < x0.size(); ++i) noisy[i] = x0[i] + sigma * rng.normal();

        Vector weighted(static_cast<size_t>(c), 0.0);
        double weighted_rest = 0.0;
        double lambda2_sample = 0.0;
        for (size_t j = 0; j < n; ++j) {
            const Vector f = we_spec.members[j].confidences(noisy);
            const double w = we_spec.weights[j];
            double top_wrong = 0.0;
            for (int y = 0; y < c; ++y) {
                if (y == y0) continue;
                weighted[y] += w * f[y];
                top_wrong = std::max(top_wrong, f[y]);
            }
            weighted_rest += w * (1.0 - f[y0]);
            lambda2_sample =
                std::max(lambda2_sample, top_wrong / std::max(1.0 - f[y0], 1e-9));
        }
        double top_weighted = 0.0;
        for (int y = 0; y < c; ++y) {
            if (y == y0) continue;
            top_weighted = std::max(top_weighted, weighted[y]);
        }
        acc1 += top_weighted / std::max(weighted_rest, 1e-9);
        acc2 += lambda2_sample;
    }
    return {acc1 / static_cast<double>(m), acc2 / static_cast<double>(m)};
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    const size_t n = v.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const bool> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("roc_auc: one label per score");
    size_t n_pos = 0;
    for (bool b : labels) n_pos += b ? 1 : 0;
    const size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("roc_auc: need both positive and negative labels");

    const auto ranks = average_ranks(scores);
    double rank_sum_pos = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i]) rank_sum_pos += ranks[i];
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman_rho: need paired samples");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace enscert::statsim
