#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "roughfolio/gridpath.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace roughfolio;

namespace {

SampledPath scalar_path(std::vector<double> times, std::vector<double> values) {
    return SampledPath::scalar(std::move(times), std::move(values));
}

std::vector<double> grid(std::size_t cells, double horizon = 1.0) {
    std::vector<double> t(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i)
        t[i] = horizon * static_cast<double>(i) / static_cast<double>(cells);
    return t;
}

} // namespace

TEST_CASE("sampled path validation") {
    CHECK_THROWS(SampledPath::scalar({0.0, 0.5, 0.5}, {0, 0, 0}));
    CHECK_THROWS(SampledPath::scalar({0.1, 0.5}, {0, 0}));
    CHECK_THROWS(SampledPath::scalar({0.0, 1.0}, {0, std::nan("")}));
    CHECK_THROWS(SampledPath::scalar({0.0, 1.0}, {0}));
    // one-point paths are accepted
    const SampledPath one = scalar_path({0.0}, {3.0});
    CHECK(one.size() == 1);
    CHECK(p_variation(one, 2.0) == 0.0);
}

TEST_CASE("p-variation examples") {
    CHECK(p_variation(scalar_path({0, 0.5, 1}, {0, 1, 3}), 1.0) == doctest::Approx(3.0));
    CHECK(p_variation(scalar_path({0, 0.5, 1}, {0, 1, 0}), 2.0) ==
          doctest::Approx(std::sqrt(2.0)));
    CHECK(p_variation(scalar_path(grid(8), std::vector<double>(9, 4.2)), 1.7) == 0.0);
    CHECK_THROWS(p_variation(scalar_path({0, 1}, {0, 1}), 0.9));
}

TEST_CASE("p-variation DP equals brute force on small grids") {
    std::uint64_t state = 42;
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 4 + (trial % 9); // up to 12 points
        std::vector<double> values(n);
        for (auto& v : values) v = oracles::test_uniform(state);
        const SampledPath path = scalar_path(grid(n - 1), values);
        std::vector<std::size_t> anchors(n);
        for (std::size_t i = 0; i < n; ++i) anchors[i] = i;
        for (const double p : {1.0, 1.5, 2.0, 2.5}) {
            const double dp = p_variation(path, p, anchors);
            const double brute = oracles::brute_force_variation(
                anchors, [&](std::size_t i, std::size_t j) { return path.increment_norm(i, j); },
                p);
            CHECK(dp == doctest::Approx(brute).epsilon(1e-12));
        }
    }
}

TEST_CASE("p-variation is non-increasing in p") {
    std::uint64_t state = 7;
    std::vector<double> values(33);
    for (auto& v : values) v = oracles::test_uniform(state);
    const SampledPath path = scalar_path(grid(32), values);
    double prev = p_variation(path, 1.0);
    for (const double p : {1.5, 2.0, 2.5, 3.0}) {
        const double cur = p_variation(path, p);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
}

TEST_CASE("interval p-variation powers form a control function") {
    std::uint64_t state = 11;
    std::vector<double> values(17);
    for (auto& v : values) v = oracles::test_uniform(state);
    const SampledPath path = scalar_path(grid(16), values);
    const double p = 2.5;
    auto w = [&](std::size_t s, std::size_t t) {
        std::vector<std::size_t> anchors;
        for (std::size_t i = s; i <= t; ++i) anchors.push_back(i);
        return std::pow(p_variation(path, p, anchors), p);
    };
    for (std::size_t s = 0; s < 16; s += 4)
        for (std::size_t u = s + 2; u < 16; u += 3)
            for (std::size_t t = u + 2; t <= 16; t += 3)
                CHECK(w(s, u) + w(u, t) <= w(s, t) + 1e-12);
}

TEST_CASE("two-parameter variation examples") {
    std::vector<std::size_t> anchors{0, 1, 2, 3, 4};
    const auto times = grid(4);
    SUBCASE("smooth field (t-s)^2/2 at r=1 attains the sup on the coarsest split") {
        const double v = two_param_p_variation(
            [&](std::size_t s, std::size_t t) {
                const double d = times[t] - times[s];
                return d * d / 2.0;
            },
            1.0, anchors);
        CHECK(v == doctest::Approx(0.5));
    }
    SUBCASE("zero field") {
        CHECK(two_param_p_variation([](std::size_t, std::size_t) { return 0.0; }, 1.0, anchors) ==
              0.0);
    }
    SUBCASE("additive field sums to the horizon for every partition") {
        const double v = two_param_p_variation(
            [&](std::size_t s, std::size_t t) { return times[t] - times[s]; }, 1.0, anchors);
        CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("matches brute force on small anchor sets") {
        std::uint64_t state = 5;
        std::vector<double> values(9);
        for (auto& v : values) v = oracles::test_uniform(state);
        const SampledPath path = scalar_path(grid(8), values);
        std::vector<std::size_t> a{0, 1, 2, 3, 4, 5, 6, 7, 8};
        auto field = [&](std::size_t s, std::size_t t) {
            const double d = path.value(t) - path.value(s);
            return d * d;
        };
        for (const double r : {1.0, 1.25}) {
            CHECK(two_param_p_variation(field, r, a) ==
                  doctest::Approx(oracles::brute_force_variation(a, field, r)).epsilon(1e-12));
        }
    }
}

TEST_CASE("piecewise constant approximation") {
    const auto times = grid(4);
    SUBCASE("identity path against the half partition") {
        const SampledPath gamma = SampledPath::identity(times);
        const SampledPath g2 = piecewise_constant(gamma, PartitionScheme::uniform(), 2);
        CHECK(g2.value(0) == 0.0);
        CHECK(g2.value(1) == 0.0);
        CHECK(g2.value(2) == 0.5);
        CHECK(g2.value(3) == 0.5);
        CHECK(g2.value(4) == 1.0);
    }
    SUBCASE("constant path is unchanged") {
        const double c = 2.5;
        const SampledPath path = SampledPath::constant(times, std::span(&c, 1));
        const SampledPath approx = piecewise_constant(path, PartitionScheme::uniform(), 2);
        CHECK(sup_distance(path, approx) == 0.0);
    }
    SUBCASE("partition equal to the master grid reproduces the path") {
        std::uint64_t state = 3;
        std::vector<double> values(5);
        for (auto& v : values) v = oracles::test_uniform(state);
        const SampledPath path = scalar_path(times, values);
        const SampledPath approx = piecewise_constant(path, PartitionScheme::uniform(), 4);
        CHECK(sup_distance(path, approx) == 0.0);
    }
    SUBCASE("rejects partitions the master grid does not refine") {
        const SampledPath gamma = SampledPath::identity(times);
        CHECK_THROWS(piecewise_constant(gamma, PartitionScheme::uniform(), 3));
    }
    SUBCASE("uniform convergence along nested dyadic levels") {
        const auto fine = grid(64);
        std::vector<double> values(65);
        for (std::size_t i = 0; i <= 64; ++i) values[i] = std::sin(3.0 * fine[i]);
        const SampledPath path = scalar_path(fine, values);
        double prev = 1e9;
        for (std::size_t level = 1; level <= 6; ++level) {
            const double err =
                sup_distance(piecewise_constant(path, PartitionScheme::dyadic(), level), path);
            CHECK(err <= prev + 1e-15);
            prev = err;
        }
        CHECK(prev == 0.0); // finest level reproduces the path
    }
}

TEST_CASE("time discretization staircase") {
    const auto times = grid(4);
    const SampledPath g2 = time_discretization(PartitionScheme::uniform(), 2, times);
    CHECK(g2.value(1) == 0.0);
    CHECK(g2.value(2) == 0.5);
    CHECK(g2.value(4) == 1.0);
    const SampledPath g1 = time_discretization(PartitionScheme::uniform(), 1, times);
    CHECK(g1.value(3) == 0.0);
    CHECK(g1.value(4) == 1.0);
    const SampledPath d1 = time_discretization(PartitionScheme::dyadic(), 1, times);
    CHECK(sup_distance(d1, g2) == 0.0);
}

TEST_CASE("sup distance") {
    const auto times = grid(2);
    const SampledPath a = scalar_path(times, {0, 1, 0});
    const SampledPath b = scalar_path(times, {0, -1, 0});
    CHECK(sup_distance(a, a) == 0.0);
    CHECK(sup_distance(a, b) == doctest::Approx(2.0));
    CHECK_THROWS(sup_distance(a, scalar_path(grid(4), std::vector<double>(5, 0.0))));
}

TEST_CASE("partition scheme parsing and mesh") {
    const auto [scheme, n] = PartitionScheme::parse("dyadic:3");
    CHECK(scheme.kind() == PartitionScheme::Kind::dyadic);
    CHECK(n == 3);
    CHECK(scheme.pieces(3) == 8);
    CHECK(scheme.mesh(1.0, 3) == doctest::Approx(0.125));
    CHECK(scheme.name(3) == "dyadic:3");
    CHECK(PartitionScheme::parse("uniform:8").first.pieces(8) == 8);
    CHECK_THROWS(PartitionScheme::parse("weird:1"));
}

TEST_CASE("consumption clock") {
    const auto times = grid(4);
    const ConsumptionClock terminal = ConsumptionClock::terminal(times);
    CHECK(terminal.total() == 1.0);
    CHECK(terminal.at(3) == 0.0);
    CHECK(terminal.is_jump(4));
    CHECK(terminal.jumps_in_partition(PartitionScheme::uniform(), 1));

    const ConsumptionClock linear = ConsumptionClock::linear(times);
    CHECK(linear.total() == 1.0);
    CHECK(linear.jump_indices().empty());

    CHECK_THROWS(ConsumptionClock(SampledPath::scalar(times, {0, 1, 0.5, 2, 3}), {}));
    CHECK_THROWS(ConsumptionClock(SampledPath::scalar(times, {0, 0, 0, 0, 0}), {}));
}

TEST_CASE("clock integral charges jumps at their jump time") {
    const auto times = grid(4);
    const SampledPath kappa = scalar_path(times, {1, 2, 3, 4, 5});
    SUBCASE("terminal clock picks the value at T") {
        const SampledPath acc = clock_integral(kappa, ConsumptionClock::terminal(times));
        CHECK(acc.value(3) == 0.0);
        CHECK(acc.value(4) == doctest::Approx(5.0));
    }
    SUBCASE("continuous clock uses left-point sums") {
        const SampledPath acc = clock_integral(kappa, ConsumptionClock::linear(times));
        CHECK(acc.value(4) == doctest::Approx(0.25 * (1 + 2 + 3 + 4)));
    }
}

TEST_CASE("default anchors") {
    const auto all = default_anchors(10, 100);
    CHECK(all.size() == 10);
    const auto capped = default_anchors(10001, 64);
    CHECK(capped.size() == 64);
    CHECK(capped.front() == 0);
    CHECK(capped.back() == 10000);
    const std::vector<std::size_t> must{7777};
    const auto with = default_anchors(10001, 64, must);
    CHECK(std::find(with.begin(), with.end(), 7777) != with.end());
}
