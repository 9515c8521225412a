#pragma once

#include "roughfolio/market_bs.hpp"
#include "roughfolio/noise.hpp"

#include "json.hpp"

namespace roughfolio {

/// Ordinary least squares on log2-log2 points.
struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double half_width = 0.0; // 2 x standard error of the slope
    std::size_t points_used = 0;
};

/// Fits log2(y) against log2(x); non-positive y values are dropped.
/// Requires at least 3 usable points with distinct x.
RateFit rate_fit(std::span<const double> x, std::span<const double> y);

/// One experiment configuration (parsed from flat key=value text).
struct SweepConfig {
    std::string model = "lv"; // lv | bs
    std::string family = "lv.tanh";
    std::map<std::string, double> params;
    std::string perturb = "drift"; // stability direction: drift | vol

    NoiseSpec::Kind noise_kind = NoiseSpec::Kind::brownian;
    std::size_t dimension = 1;
    double horizon = 1.0;
    std::size_t master_level = 12;
    std::vector<std::uint64_t> seeds = {1};

    PartitionScheme::Kind scheme_kind = PartitionScheme::Kind::dyadic;
    std::string sweep = "delta"; // delta | n
    std::vector<double> deltas;        // stability grid (log-spaced)
    std::vector<std::size_t> levels;   // discretization grid (increasing)

    double p = 2.5;
    double p_prime = 2.9;
    double q = 1.5;
    double beta = 0.7; // interior of the admissibility window (1-1/p, 2/p)
    double epsilon = 0.1;
    double s0 = 1.0;
    std::string clock = "terminal"; // terminal | linear
    std::size_t anchor_cap = 1024;

    // acceptance windows
    double stability_slope_lo = 0.75;
    double stability_slope_hi = 1.25;
    double discretization_slope_max = -0.15;
    std::size_t monotone_inversions_allowed = 1;

    void validate() const;
    PartitionScheme scheme() const;
};

SweepConfig parse_config_text(const std::string& text);
SweepConfig load_config(const std::string& filename);

/// Canonical sorted key=value serialization; its FNV-1a hash identifies the
/// configuration in reports.
std::string canonical_config_text(const SweepConfig& cfg);
std::string config_hash(const SweepConfig& cfg);

struct ExperimentReport {
    nlohmann::ordered_json summary;
    std::string points_csv;
    bool pass = false;
};

/// Stability of the portfolio map in the model parameters: builds the
/// portfolios for (b, sigma) and the delta-perturbed family, measures
/// sup/p'-variation errors per delta, and fits the log-log slope.
ExperimentReport stability_sweep(const SweepConfig& cfg);

/// Time-discretization errors of the portfolio and its realized wealth
/// across partition levels, with the fitted rate against the theoretical
/// exponent of the configured (p, p', q, beta, epsilon).
ExperimentReport discretization_sweep(const SweepConfig& cfg);

/// Compact deterministic self-check: algebraic identities, closed-form
/// portfolio oracle, consistency chain, and miniature sweeps.
ExperimentReport selftest(const SweepConfig& cfg);

/// Writes report.json and points.csv under out_dir (created if needed).
void write_report(const ExperimentReport& report, const std::string& out_dir);

/// Theoretical rate exponents (error ~ pieces^{-r}).
double theory_exponent_uniform(double p, double p_prime, double q, double beta);
double theory_exponent_dyadic(double p, double p_prime, double q, double epsilon);

} // namespace roughfolio
