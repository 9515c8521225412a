#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "roughfolio/rde.hpp"
#include "roughfolio/noise.hpp"

#include <cmath>

using namespace roughfolio;

namespace {

CoefficientField constant_field(double b, double s) {
    CoefficientField f;
    f.drift = [b](double, std::span<const double>, std::span<double> out) { out[0] = b; };
    f.vol = [s](double, std::span<const double>, std::span<double> out) { out[0] = s; };
    f.drift_jacobian = [](double, std::span<const double>, std::span<double> out) {
        out[0] = out[1] = 0.0;
    };
    f.vol_jacobian = [](double, std::span<const double>, std::span<double> out) {
        out[0] = out[1] = 0.0;
    };
    f.c3_bound = std::max(std::abs(b), std::abs(s));
    return f;
}

CoefficientField tanh_vol_field() {
    CoefficientField f;
    f.drift = [](double, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    f.vol = [](double, std::span<const double> x, std::span<double> out) {
        out[0] = std::tanh(x[0]) + 1.5;
    };
    f.drift_jacobian = [](double, std::span<const double>, std::span<double> out) {
        out[0] = out[1] = 0.0;
    };
    f.vol_jacobian = [](double, std::span<const double> x, std::span<double> out) {
        const double th = std::tanh(x[0]);
        out[0] = 0.0;
        out[1] = 1.0 - th * th;
    };
    f.c3_bound = 2.5;
    return f;
}

SampledPath brownian(std::size_t level, std::uint64_t seed) {
    NoiseSpec spec;
    spec.kind = NoiseSpec::Kind::brownian;
    spec.master_level = level;
    spec.seed = seed;
    return generate(spec);
}

std::shared_ptr<const TimeAugmentedRoughPath> augmented(const SampledPath& w) {
    return std::make_shared<const TimeAugmentedRoughPath>(time_augment(RoughPath::rie_lift(w)));
}

} // namespace

TEST_CASE("Euler scheme basics") {
    const SampledPath w = brownian(6, 4);
    const double s0 = 2.0;
    SUBCASE("zero field keeps the state") {
        const SampledPath s = euler_solve(constant_field(0, 0), std::span(&s0, 1), w,
                                          PartitionScheme::dyadic(), 3);
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.value(i) == s0);
    }
    SUBCASE("pure drift telescopes to s0 + t at partition points") {
        const SampledPath s = euler_solve(constant_field(1, 0), std::span(&s0, 1), w,
                                          PartitionScheme::dyadic(), 3);
        const auto idx = PartitionScheme::dyadic().indices(w.times(), 3);
        for (const std::size_t j : idx)
            CHECK(s.value(j) == doctest::Approx(s0 + w.time(j)).epsilon(1e-15));
        // staircase: constant on [t_k, t_{k+1})
        CHECK(s.value(idx[1] - 1) == s.value(0));
    }
    SUBCASE("constant volatility reproduces s0 + C W at partition points") {
        const SampledPath s = euler_solve(constant_field(0, 2.0), std::span(&s0, 1), w,
                                          PartitionScheme::dyadic(), 4);
        const auto idx = PartitionScheme::dyadic().indices(w.times(), 4);
        for (const std::size_t j : idx)
            CHECK(s.value(j) == doctest::Approx(s0 + 2.0 * w.value(j)).epsilon(1e-14));
    }
    SUBCASE("state guard aborts on divergence") {
        const double big = 1.0;
        CHECK_THROWS(euler_solve(constant_field(1e14, 0), std::span(&big, 1), w,
                                 PartitionScheme::dyadic(), 4));
    }
}

TEST_CASE("Euler flow property for autonomous fields") {
    const SampledPath w = brownian(6, 9);
    const CoefficientField field = tanh_vol_field();
    const double s0 = 0.5;
    const SampledPath full =
        euler_solve(field, std::span(&s0, 1), w, PartitionScheme::dyadic(), 6);
    const std::size_t mid = w.size() / 2;
    // restart from the mid state on the shifted sub-grid
    std::vector<double> times, values;
    for (std::size_t i = mid; i < w.size(); ++i) {
        times.push_back(w.time(i) - w.time(mid));
        values.push_back(w.value(i));
    }
    const SampledPath tail = SampledPath::scalar(std::move(times), std::move(values));
    const double restart = full.value(mid);
    const SampledPath second =
        euler_solve(field, std::span(&restart, 1), tail, PartitionScheme::dyadic(), 5);
    for (std::size_t i = 0; i < tail.size(); ++i)
        CHECK(second.value(i) == doctest::Approx(full.value(mid + i)).epsilon(1e-15));
}

TEST_CASE("rde_solve on the master grid") {
    const SampledPath w = brownian(10, 12);
    auto lift = augmented(w);
    const double s0 = 1.0;
    SUBCASE("zero field: constant path, zero residual") {
        const RdeSolution sol = rde_solve(constant_field(0, 0), std::span(&s0, 1), lift);
        CHECK(sol.residual_sup == 0.0);
        for (std::size_t i = 0; i < sol.path.size(); i += 100) CHECK(sol.path.value(i) == s0);
    }
    SUBCASE("pure drift: S = s0 + t with vanishing residual") {
        const RdeSolution sol = rde_solve(constant_field(1, 0), std::span(&s0, 1), lift);
        CHECK(sol.residual_sup <= 1e-13);
        for (std::size_t i = 0; i < sol.path.size(); i += 111)
            CHECK(sol.path.value(i) == doctest::Approx(s0 + w.time(i)).epsilon(1e-14));
    }
    SUBCASE("Gubinelli derivative is (b, sigma)(., S)") {
        const RdeSolution sol = rde_solve(tanh_vol_field(), std::span(&s0, 1), lift);
        for (std::size_t i = 0; i < sol.path.size(); i += 173) {
            CHECK(sol.path.deriv(i, 0, 0) == 0.0);
            CHECK(sol.path.deriv(i, 0, 1) ==
                  doctest::Approx(std::tanh(sol.path.value(i)) + 1.5));
        }
    }
    SUBCASE("self-consistency residual vanishes on the evaluation grid") {
        const RdeSolution sol = rde_solve(tanh_vol_field(), std::span(&s0, 1), lift);
        CHECK(sol.residual_sup <= 1e-12);
    }
}

TEST_CASE("Euler refinement error decreases across levels (seed average)") {
    const CoefficientField field = tanh_vol_field();
    const double s0 = 0.3;
    NoiseSpec spec;
    spec.kind = NoiseSpec::Kind::brownian;
    std::vector<double> mean;
    for (std::size_t level = 8; level <= 12; level += 2) {
        double acc = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            spec.seed = seed;
            spec.master_level = level;
            const SampledPath coarse = generate(spec);
            spec.master_level = level + 1;
            const SampledPath fine = generate(spec);
            acc += euler_refinement_error(field, std::span(&s0, 1), coarse, fine);
        }
        mean.push_back(acc / 10.0);
    }
    // strong order ~1/2: two levels halve the mean gap, up to sampling noise
    CHECK(mean[1] / mean[0] <= 0.8);
    CHECK(mean[2] / mean[1] <= 0.8);
}

TEST_CASE("rough exponential") {
    SUBCASE("smooth argument with vanishing bracket approaches exp") {
        NoiseSpec spec;
        spec.kind = NoiseSpec::Kind::identity;
        spec.master_level = 10;
        const SampledPath gamma = generate(spec);
        auto lift = std::make_shared<const RoughPath>(RoughPath::rie_lift(gamma));
        const ControlledPath z = ControlledPath::identity(lift);
        auto zlift = std::make_shared<const RoughPath>(canonical_lift(z));
        const RoughExponential v = rough_exponential(z, zlift);
        CHECK_FALSE(v.hit_zero);
        double worst = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i)
            worst = std::max(worst, std::abs(v.path.value(i) - std::exp(gamma.value(i))));
        CHECK(worst <= 2e-3); // bracket of the smooth path is O(1/N)
    }
    SUBCASE("a single jump of -1 kills the exponential") {
        std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
        const SampledPath z_path = SampledPath::scalar(times, {0, 0, -1, -1, -1});
        auto ref = std::make_shared<const RoughPath>(RoughPath::rie_lift(z_path));
        const ControlledPath z = ControlledPath::identity(ref);
        const std::vector<std::size_t> jumps{2};
        const RoughExponential v = rough_exponential(z, ref, jumps);
        CHECK(v.hit_zero);
        CHECK(v.path.value(0) == 1.0);
        CHECK(v.path.value(1) == 1.0);
        CHECK(v.path.value(2) == 0.0);
        CHECK(v.path.value(4) == 0.0);
    }
    SUBCASE("positive jumps keep the exponential positive and solve the linear RDE") {
        std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
        const SampledPath z_path = SampledPath::scalar(times, {0, 0.5, 0.5, 1.25, 1.25});
        auto ref = std::make_shared<const RoughPath>(RoughPath::rie_lift(z_path));
        const ControlledPath z = ControlledPath::identity(ref);
        const std::vector<std::size_t> jumps{1, 3};
        const RoughExponential v = rough_exponential(z, ref, jumps);
        CHECK_FALSE(v.hit_zero);
        for (std::size_t i = 0; i < 5; ++i) CHECK(v.path.value(i) > 0.0);
        // pure-jump path: the exponential is the running product of (1 + dZ)
        CHECK(v.path.value(4) == doctest::Approx(1.5 * 1.75).epsilon(1e-12));
        CHECK(v.linear_rde_residual <= 1e-12);
    }
    SUBCASE("Brownian argument approaches the closed-form exponential") {
        const SampledPath w = brownian(16, 3);
        auto lift = std::make_shared<const RoughPath>(RoughPath::rie_lift(w));
        const ControlledPath z = ControlledPath::identity(lift);
        auto zlift = std::make_shared<const RoughPath>(canonical_lift(z));
        const RoughExponential v = rough_exponential(z, zlift);
        double worst = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i)
            worst = std::max(worst,
                             std::abs(v.path.value(i) - std::exp(w.value(i) - 0.5 * w.time(i))));
        CHECK(worst <= 0.05);
    }
    SUBCASE("flat tails stay flat") {
        std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
        const SampledPath z_path = SampledPath::scalar(times, {0, 0.3, 0.3, 0.3, 0.3});
        auto ref = std::make_shared<const RoughPath>(RoughPath::rie_lift(z_path));
        const RoughExponential v = rough_exponential(ControlledPath::identity(ref), ref);
        CHECK(v.path.value(2) == v.path.value(4));
    }
    SUBCASE("nonzero initial value is rejected") {
        std::vector<double> times{0.0, 1.0};
        const SampledPath z_path = SampledPath::scalar(times, {0.5, 1.0});
        auto ref = std::make_shared<const RoughPath>(RoughPath::rie_lift(z_path));
        CHECK_THROWS(rough_exponential(ControlledPath::identity(ref), ref));
    }
}

TEST_CASE("linear RDE via the rough exponential") {
    const SampledPath w = brownian(12, 6);
    auto lift = augmented(w);
    const std::size_t n = lift->size();
    SUBCASE("constant coefficients match geometric Brownian motion exactly on the grid") {
        const double b = 0.1, s = 0.2;
        const ControlledPath bc = ControlledPath::constant(lift, std::span(&b, 1));
        const ControlledPath sc = ControlledPath::constant(lift, std::span(&s, 1));
        const LinearRdeSolution sol = linear_rde_solve(bc, sc, 1.5, lift);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double closed =
                1.5 * std::exp((b - 0.5 * s * s) * w.time(i) + s * w.value(i));
            worst = std::max(worst, std::abs(sol.price.value(i) - closed) / closed);
        }
        CHECK(worst <= 1e-12);
        CHECK(sol.gamma_horizon == doctest::Approx(s * s * w.time(n - 1)).epsilon(1e-12));
        // Gubinelli derivative (S b | S sigma)
        for (std::size_t i = 0; i < n; i += 331) {
            CHECK(sol.price.deriv(i, 0, 0) ==
                  doctest::Approx(sol.price.value(i) * b).epsilon(1e-12));
            CHECK(sol.price.deriv(i, 0, 1) ==
                  doctest::Approx(sol.price.value(i) * s).epsilon(1e-12));
        }
    }
    SUBCASE("deterministic exponential when sigma vanishes") {
        const double b = 0.4, s = 0.0;
        const ControlledPath bc = ControlledPath::constant(lift, std::span(&b, 1));
        const ControlledPath sc = ControlledPath::constant(lift, std::span(&s, 1));
        const LinearRdeSolution sol = linear_rde_solve(bc, sc, 2.0, lift);
        for (std::size_t i = 0; i < n; i += 257)
            CHECK(sol.price.value(i) ==
                  doctest::Approx(2.0 * std::exp(b * w.time(i))).epsilon(1e-12));
    }
    SUBCASE("zero coefficients freeze the price") {
        const double z = 0.0;
        const ControlledPath zc = ControlledPath::constant(lift, std::span(&z, 1));
        const LinearRdeSolution sol = linear_rde_solve(zc, zc, 3.0, lift);
        for (std::size_t i = 0; i < n; i += 401) CHECK(sol.price.value(i) == 3.0);
    }
    SUBCASE("nonpositive initial price is rejected") {
        const double z = 0.0;
        const ControlledPath zc = ControlledPath::constant(lift, std::span(&z, 1));
        CHECK_THROWS(linear_rde_solve(zc, zc, 0.0, lift));
    }
}
