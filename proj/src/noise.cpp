#include "roughfolio/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace roughfolio {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Inverse of the standard normal CDF (Acklam's rational approximation with
/// one Halley refinement step); deterministic, no rejection branches.
double inverse_normal_cdf(double u) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (u < plow) {
        const double q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (u <= 1.0 - plow) {
        const double q = u - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley step against erfc for full double precision.
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - u;
    const double g = e * std::numbers::sqrt2 * std::sqrt(std::numbers::pi) *
                     std::exp(0.5 * x * x);
    return x - g / (1.0 + 0.5 * x * g);
}

} // namespace

double counter_gaussian(std::uint64_t seed, std::uint64_t dim, std::uint64_t level,
                        std::uint64_t node) {
    std::uint64_t h = splitmix64(seed ^ 0xD1B54A32D192ED03ULL);
    h = splitmix64(h ^ (dim + 1));
    h = splitmix64(h ^ ((level + 1) << 32 | (node + 1)));
    const double u = (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
    return inverse_normal_cdf(u);
}

std::vector<double> dyadic_times(double horizon, std::size_t level) {
    if (level > 20) throw std::invalid_argument("dyadic_times: level must be <= 20");
    if (!(horizon > 0.0)) throw std::invalid_argument("dyadic_times: horizon must be positive");
    const std::size_t cells = std::size_t{1} << level;
    std::vector<double> times(cells + 1);
    const double denom = static_cast<double>(cells);
    for (std::size_t j = 0; j <= cells; ++j)
        times[j] = horizon * (static_cast<double>(j) / denom);
    return times;
}

NoiseSpec::Kind NoiseSpec::parse_kind(const std::string& text) {
    if (text == "brownian") return Kind::brownian;
    if (text == "zero") return Kind::zero;
    if (text == "identity") return Kind::identity;
    if (text == "sine") return Kind::sine;
    throw std::invalid_argument("unknown noise kind '" + text + "'");
}

std::string NoiseSpec::kind_name() const {
    switch (kind) {
        case Kind::brownian: return "brownian";
        case Kind::zero: return "zero";
        case Kind::identity: return "identity";
        case Kind::sine: return "sine";
    }
    return "?";
}

SampledPath generate(const NoiseSpec& spec) {
    if (spec.master_level > 20)
        throw std::invalid_argument("generate: master level must be <= 20");
    const std::size_t d = spec.dimension;
    if (d < 1) throw std::invalid_argument("generate: dimension must be >= 1");
    std::vector<double> times = dyadic_times(spec.horizon, spec.master_level);
    const std::size_t cells = times.size() - 1;

    switch (spec.kind) {
        case NoiseSpec::Kind::zero:
            return SampledPath::zero(std::move(times), d);
        case NoiseSpec::Kind::identity:
            return SampledPath::identity(std::move(times), d);
        case NoiseSpec::Kind::sine: {
            std::vector<double> values((cells + 1) * d);
            for (std::size_t j = 0; j <= cells; ++j)
                for (std::size_t k = 0; k < d; ++k)
                    values[j * d + k] = std::sin(2.0 * std::numbers::pi *
                                                 static_cast<double>(k + 1) * times[j] /
                                                 spec.horizon);
            return SampledPath(std::move(times), std::move(values), d);
        }
        case NoiseSpec::Kind::brownian:
            break;
    }

    // Midpoint (Brownian-bridge) construction: the endpoint Gaussian lives
    // at level 0, each finer level fills the midpoints, so restriction to a
    // coarser grid is bit-identical to direct generation at that level.
    std::vector<double> values((cells + 1) * d, 0.0);
    const double sqrt_T = std::sqrt(spec.horizon);
    for (std::size_t k = 0; k < d; ++k)
        values[cells * d + k] = sqrt_T * counter_gaussian(spec.seed, k, 0, 0);
    for (std::size_t level = 1; level <= spec.master_level; ++level) {
        const std::size_t step = cells >> level;          // index gap to the new midpoints
        const std::size_t nodes = std::size_t{1} << (level - 1);
        const double stddev = sqrt_T * std::exp2(-0.5 * static_cast<double>(level + 1));
        for (std::size_t node = 0; node < nodes; ++node) {
            const std::size_t mid = (2 * node + 1) * step;
            const std::size_t left = mid - step;
            const std::size_t right = mid + step;
            for (std::size_t k = 0; k < d; ++k)
                values[mid * d + k] = 0.5 * (values[left * d + k] + values[right * d + k]) +
                                      stddev * counter_gaussian(spec.seed, k, level, node);
        }
    }
    return SampledPath(std::move(times), std::move(values), d);
}

RieReport rie_report(const NoiseSpec& spec, const PartitionScheme& scheme, double p,
                     std::size_t n_max) {
    const SampledPath path = generate(spec);
    std::vector<std::size_t> ns;
    for (std::size_t n = 1; n <= n_max; ++n) {
        const std::size_t cells = path.size() - 1;
        if (cells % scheme.pieces(n) == 0) ns.push_back(n);
    }
    return rie_diagnostic(path, scheme, ns, p);
}

} // namespace roughfolio
