#include "enscert/numstats.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace enscert::numstats {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer, also used as the substream hash.
uint64_t mix64(uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr double kSqrt2 = 1.4142135623730950488016887242097;
constexpr double kTwoOverSqrtPi = 1.1283791670955125738961589031215;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

// Maclaurin series of erf, alternating; used for |x| < 3 where fewer than
// ~60 terms reach double precision.
double erf_series(double x) {
    const double x2 = x * x;
    double term = x;
    double sum = x;
    for (int k = 1; k < 200; ++k) {
        term *= -x2 / k;
        const double contrib = term / (2 * k + 1);
        sum += contrib;
        if (std::fabs(contrib) < 1e-18 * std::fabs(sum)) break;
    }
    return kTwoOverSqrtPi * sum;
}

// Complementary error function for x >= 3 via the Laplace continued fraction
// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
// evaluated with the modified Lentz algorithm.
double erfc_cf(double x) {
    const double tiny = 1e-300;
    double f = x;
    if (f == 0.0) f = tiny;
    double c = f;
    double d = 0.0;
    for (int n = 1; n <= 200; ++n) {
        const double an = n / 2.0;
        d = x + an * d;
        if (d == 0.0) d = tiny;
        c = x + an / c;
        if (c == 0.0) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::fabs(delta - 1.0) < 1e-17) break;
    }
    const double e = std::exp(-x * x);
    if (e == 0.0) return 0.0;
    return e / (std::sqrt(M_PI) * f);
}

double erf_impl(double x) {
    const double ax = std::fabs(x);
    double r;
    if (ax < 3.0) {
        r = erf_series(ax);
    } else {
        r = 1.0 - erfc_cf(ax);
    }
    return x < 0 ? -r : r;
}

double erfc_impl(double x) {
    if (x >= 3.0) return erfc_cf(x);
    if (x <= -3.0) return 2.0 - erfc_cf(-x);
    return 1.0 - erf_series(x);
}

// Acklam's rational approximation to the normal quantile, accurate to about
// 1.15e-9 relative error before Newton refinement.
double quantile_initial_guess(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

RngStream::RngStream(uint64_t seed, uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
    state_ = mix64(seed ^ mix64(stream_id + 0x632BE59BD9B4E019ull));
    gamma_ = mix64(stream_id ^ mix64(seed + 0x452821E638D01377ull)) | 1ull;
}

RngStream RngStream::substream(uint64_t index) const {
    return RngStream(seed_, mix64(stream_id_ ^ mix64(index + 0x2545F4914F6CDD1Dull)));
}

uint64_t RngStream::next_u64() {
    state_ += gamma_;
    return mix64(state_);
}

double RngStream::uniform() {
    return (next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

double std_normal_cdf(double x) {
    if (!std::isfinite(x)) {
        if (std::isnan(x)) return x;
        return x > 0 ? 1.0 : 0.0;
    }
    return 0.5 * erfc_impl(-x / kSqrt2);
}

double std_normal_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("std_normal_quantile: p must lie strictly in (0, 1)");
    }
    double x = quantile_initial_guess(p);
    for (int i = 0; i < 2; ++i) {
        const double pdf = std_normal_pdf(x);
        if (pdf <= 0.0) break;
        x -= (std_normal_cdf(x) - p) / pdf;
    }
    return x;
}

double reg_inc_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::domain_error("reg_inc_beta: a and b must be positive");
    }
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::domain_error("reg_inc_beta: x must lie in [0, 1]");
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    // I_x(a,b) = 1 - I_{1-x}(b,a); evaluate the fraction on the side where it
    // converges fast.
    if (x > (a + 1.0) / (a + b + 2.0)) {
        return 1.0 - reg_inc_beta(b, a, 1.0 - x);
    }

    const double log_prefix = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                              a * std::log(x) + b * std::log1p(-x);

    // Continued fraction (modified Lentz), terms d_{2m} and d_{2m+1}.
    const double tiny = 1e-300;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double f = d;
    bool converged = false;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        f *= d * c;

        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        f *= delta;
        if (std::fabs(delta - 1.0) < 1e-15) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream oss;
        oss << "reg_inc_beta: continued fraction did not converge in 300 iterations"
            << " (a=" << a << ", b=" << b << ", x=" << x << ")";
        throw std::runtime_error(oss.str());
    }
    return std::exp(log_prefix) * f / a;
}

double clopper_pearson_lower(int64_t k, int64_t n, double alpha) {
    if (n < 0 || k < 0 || k > n) {
        throw std::domain_error("clopper_pearson_lower: require 0 <= k <= n");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::domain_error("clopper_pearson_lower: alpha must lie in (0, 1)");
    }
    if (k == 0) return 0.0;

    // p_L is the Beta(k, n - k + 1) quantile at alpha; equivalently the p with
    // P(Bin(n, p) >= k) = alpha. I_p(k, n - k + 1) is increasing in p, so
    // bisection on [0, 1] brackets it.
    const double a = static_cast<double>(k);
    const double b = static_cast<double>(n - k + 1);
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (reg_inc_beta(a, b, mid) < alpha) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Vector sample_gaussian(RngStream& rng, int d, double sigma) {
    if (d < 1) throw std::domain_error("sample_gaussian: d must be >= 1");
    if (!(sigma > 0.0)) throw std::domain_error("sample_gaussian: sigma must be positive");
    Vector out(static_cast<size_t>(d));
    for (auto& x : out) x = sigma * rng.normal();
    return out;
}

void ConfidenceBound::validate() const {
    if (!(0.0 <= lower && lower <= point_estimate && point_estimate <= upper && upper <= 1.0)) {
        throw std::logic_error("ConfidenceBound: ordering invariant violated");
    }
}

ConfidenceBound binomial_lower_bound(int64_t k, int64_t n, double alpha) {
    ConfidenceBound cb;
    cb.point_estimate = n > 0 ? static_cast<double>(k) / static_cast<double>(n) : 0.0;
    cb.lower = clopper_pearson_lower(k, n, alpha);
    cb.upper = 1.0;
    cb.confidence = 1.0 - alpha;
    cb.validate();
    return cb;
}

}  // namespace enscert::numstats
