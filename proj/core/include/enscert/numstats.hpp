#pragma once

#include <cstdint>
#include <vector>

#include "enscert/tensor.hpp"

namespace enscert::numstats {

/// Deterministic splittable random stream. The same (seed, stream_id) pair
/// reproduces the identical sequence on every platform; distinct stream_ids
/// give statistically independent substreams (SplitMix-style counter state
/// with a per-stream odd increment derived by hashing stream_id).
class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}
    RngStream(uint64_t seed, uint64_t stream_id);

    uint64_t seed() const { return seed_; }
    uint64_t stream_id() const { return stream_id_; }

    /// Independent substream; derivation is hash-based, so forked streams may
    /// be handed to parallel workers without coordination.
    RngStream substream(uint64_t index) const;

    uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Standard normal via the polar Box-Muller method (one spare cached).
    double normal();

  private:
    uint64_t seed_;
    uint64_t stream_id_;
    uint64_t state_;
    uint64_t gamma_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Standard normal CDF. Absolute error below 1e-12; underflows to 0 in the
/// far left tail.
double std_normal_cdf(double x);

/// Standard normal PDF.
double std_normal_pdf(double x);

/// Inverse standard normal CDF for p in (0, 1). |cdf(quantile(p)) - p| < 1e-10.
/// Throws std::domain_error outside (0, 1).
double std_normal_quantile(double p);

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in [0, 1].
/// Continued-fraction evaluation with the symmetry swap for x beyond
/// (a + 1) / (a + b + 2). Throws std::runtime_error if the fraction does not
/// converge within 300 iterations.
double reg_inc_beta(double a, double b, double x);

/// One-sided Clopper-Pearson lower confidence bound for k successes out of n
/// trials at failure budget alpha: the Beta(k, n - k + 1) quantile at alpha,
/// located by bisection. Returns 0 when k = 0.
double clopper_pearson_lower(int64_t k, int64_t n, double alpha);

/// d i.i.d. N(0, sigma^2) components drawn from the given stream.
Vector sample_gaussian(RngStream& rng, int d, double sigma);

/// One-sided binomial confidence bound bundle.
struct ConfidenceBound {
    double point_estimate = 0.0;
    double lower = 0.0;
    double upper = 1.0;
    double confidence = 0.0;  // 1 - alpha

    /// Enforces 0 <= lower <= point_estimate <= upper <= 1.
    void validate() const;
};

/// Lower-bound-only Clopper-Pearson summary for k hits out of n.
ConfidenceBound binomial_lower_bound(int64_t k, int64_t n, double alpha);

}  // namespace enscert::numstats
