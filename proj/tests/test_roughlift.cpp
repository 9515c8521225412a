#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "roughfolio/noise.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace roughfolio;

namespace {

SampledPath identity_on(std::size_t cells, double horizon = 1.0) {
    std::vector<double> t(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i)
        t[i] = horizon * static_cast<double>(i) / static_cast<double>(cells);
    return SampledPath::identity(t);
}

SampledPath brownian(std::size_t level, std::uint64_t seed) {
    NoiseSpec spec;
    spec.kind = NoiseSpec::Kind::brownian;
    spec.master_level = level;
    spec.seed = seed;
    return generate(spec);
}

} // namespace

TEST_CASE("left-point lift of the time path on a 3-point grid") {
    const SampledPath gamma = identity_on(2);
    const RoughPath lift = RoughPath::rie_lift(gamma);
    CHECK(lift.iterated_at(0)[0] == 0.0);
    CHECK(lift.iterated_at(1)[0] == 0.0);
    CHECK(lift.iterated_at(2)[0] == doctest::Approx(0.25));
    std::vector<double> xx(1);
    lift.second_level(0, 2, xx);
    CHECK(xx[0] == doctest::Approx(0.25));
}

TEST_CASE("second level of a smooth path approaches (t-s)^2/2") {
    const std::size_t n = 1 << 10;
    const SampledPath gamma = identity_on(n);
    const RoughPath lift = RoughPath::rie_lift(gamma);
    std::vector<double> xx(1);
    const std::vector<std::pair<std::size_t, std::size_t>> spans{
        {0, n}, {n / 4, n / 2}, {n / 8, 7 * n / 8}};
    for (const auto& [s, t] : spans) {
        lift.second_level(s, t, xx);
        const double dt = gamma.value(t) - gamma.value(s);
        CHECK(std::abs(xx[0] - dt * dt / 2.0) <= 2.0 / static_cast<double>(n));
    }
}

TEST_CASE("Chen's relation is exact for the reconstruction") {
    const SampledPath w = brownian(10, 99);
    const RoughPath lift = RoughPath::rie_lift(w);
    std::uint64_t state = 1234;
    std::vector<double> xst(1), xsu(1), xut(1);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto draw = [&] {
            return static_cast<std::size_t>((oracles::test_uniform(state) + 1.0) * 0.5 *
                                            static_cast<double>(w.size() - 1));
        };
        std::size_t s = draw(), u = draw(), t = draw();
        if (s > u) std::swap(s, u);
        if (u > t) std::swap(u, t);
        if (s > u) std::swap(s, u);
        lift.second_level(s, t, xst);
        lift.second_level(s, u, xsu);
        lift.second_level(u, t, xut);
        const double res =
            xst[0] - xsu[0] - xut[0] - (w.value(u) - w.value(s)) * (w.value(t) - w.value(u));
        worst = std::max(worst, std::abs(res));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("adjacent-cell second level vanishes, so bracket jumps are squared increments") {
    const SampledPath w = brownian(8, 5);
    const RoughPath lift = RoughPath::rie_lift(w);
    const SampledPath bracket = lift.bracket();
    std::vector<double> xx(1);
    for (std::size_t j = 0; j + 1 < w.size(); ++j) {
        lift.second_level(j, j + 1, xx);
        CHECK(std::abs(xx[0]) <= 1e-15); // zero up to the accumulation roundoff
        const double dw = w.value(j + 1) - w.value(j);
        CHECK(bracket.value(j + 1) - bracket.value(j) ==
              doctest::Approx(dw * dw).epsilon(1e-9));
    }
}

TEST_CASE("bracket of the time path on the half grid") {
    const RoughPath lift = RoughPath::rie_lift(identity_on(2));
    const SampledPath bracket = lift.bracket();
    CHECK(bracket.value(2) == doctest::Approx(0.5)); // 1 - 2*(1/4)
    CHECK(bracket.value(0) == 0.0);
}

TEST_CASE("bracket of a constant path vanishes") {
    const double c = 3.0;
    std::vector<double> t{0.0, 0.5, 1.0};
    const RoughPath lift = RoughPath::rie_lift(SampledPath::constant(t, std::span(&c, 1)));
    const SampledPath bracket = lift.bracket();
    for (std::size_t i = 0; i < 3; ++i) CHECK(bracket.value(i) == 0.0);
}

TEST_CASE("polarization identity of left-point sums (d=1)") {
    const SampledPath w = brownian(10, 17);
    const RoughPath lift = RoughPath::rie_lift(w);
    std::vector<double> xx(1);
    const std::vector<std::pair<std::size_t, std::size_t>> spans{
        {0, w.size() - 1}, {10, 600}, {128, 129}};
    for (const auto& [s, t] : spans) {
        lift.second_level(s, t, xx);
        double cells = 0.0;
        for (std::size_t j = s; j < t; ++j) {
            const double dw = w.value(j + 1) - w.value(j);
            cells += dw * dw;
        }
        const double dst = w.value(t) - w.value(s);
        CHECK(std::abs(2.0 * xx[0] + cells - dst * dst) <= 1e-12);
    }
}

TEST_CASE("time augmentation") {
    const SampledPath w = brownian(8, 23);
    const RoughPath lift = RoughPath::rie_lift(w);
    const TimeAugmentedRoughPath aug = time_augment(lift);
    const std::size_t n = aug.size();
    REQUIRE(aug.dim() == 2);

    SUBCASE("first coordinate increments are exactly time increments") {
        for (std::size_t j = 0; j + 1 < n; ++j)
            CHECK(aug.base().value(j + 1, 0) - aug.base().value(j, 0) ==
                  w.time(j + 1) - w.time(j));
    }
    SUBCASE("(gamma,gamma) block approaches T^2/2") {
        std::vector<double> xx(4);
        aug.second_level(0, n - 1, xx);
        CHECK(std::abs(xx[0] - 0.5) <= 2.0 / static_cast<double>(n));
    }
    SUBCASE("discrete integration by parts across the cross blocks") {
        const auto last = aug.iterated_at(n - 1);
        double cross = 0.0;
        for (std::size_t j = 0; j + 1 < n; ++j)
            cross += (w.time(j + 1) - w.time(j)) * (w.value(j + 1) - w.value(j));
        const double lhs = last[1] + last[2] + cross; // I^{01} + I^{10} + sum corrections
        CHECK(lhs == doctest::Approx(w.time(n - 1) * w.value(n - 1)).epsilon(1e-12));
    }
    SUBCASE("Chen holds exactly for the augmented object") {
        std::vector<double> xst(4), xsu(4), xut(4);
        aug.second_level(100, 200, xst);
        aug.second_level(100, 150, xsu);
        aug.second_level(150, 200, xut);
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b) {
                const double chen = xst[a * 2 + b] - xsu[a * 2 + b] - xut[a * 2 + b] -
                                    (aug.base().value(150, a) - aug.base().value(100, a)) *
                                        (aug.base().value(200, b) - aug.base().value(150, b));
                CHECK(std::abs(chen) <= 1e-14);
            }
    }
    SUBCASE("augmenting the time path duplicates its lift in every block") {
        const SampledPath gamma = identity_on(16);
        const RoughPath glift = RoughPath::rie_lift(gamma);
        const TimeAugmentedRoughPath gaug = time_augment(glift);
        for (std::size_t j = 0; j < gamma.size(); ++j) {
            const auto one = glift.iterated_at(j)[0];
            const auto blocks = gaug.iterated_at(j);
            for (std::size_t k = 0; k < 4; ++k) CHECK(blocks[k] == doctest::Approx(one));
        }
    }
}

TEST_CASE("rough norm of the time path at p=2") {
    const std::size_t n = 1 << 8;
    const RoughPath lift = RoughPath::rie_lift(identity_on(n));
    const double norm = rough_norm(lift, 2.0);
    CHECK(norm == doctest::Approx(1.5).epsilon(0.02)); // ||gamma||_2 + ||XX||_1 -> 1 + 1/2

    const double c = 7.0;
    std::vector<double> t{0.0, 0.5, 1.0};
    const RoughPath flat = RoughPath::rie_lift(SampledPath::constant(t, std::span(&c, 1)));
    CHECK(rough_norm(flat, 2.5) == 0.0);
}

TEST_CASE("rough distance") {
    const SampledPath w = brownian(6, 1);
    const SampledPath v = brownian(6, 2);
    const SampledPath u = brownian(6, 3);
    const RoughPath lw = RoughPath::rie_lift(w);
    const RoughPath lv = RoughPath::rie_lift(v);
    const RoughPath lu = RoughPath::rie_lift(u);
    CHECK(rough_distance(lw, lw, 2.5) == 0.0);
    const double duv = rough_distance(lu, lv, 2.5);
    const double duw = rough_distance(lu, lw, 2.5);
    const double dwv = rough_distance(lw, lv, 2.5);
    CHECK(duv <= duw + dwv + 1e-12);
    CHECK_THROWS(rough_distance(lw, RoughPath::rie_lift(identity_on(16)), 2.5));
}

TEST_CASE("RIE diagnostic") {
    SUBCASE("smooth path: part (ii) error bounded by T^2/n") {
        const SampledPath gamma = identity_on(1 << 8);
        const std::vector<std::size_t> ns{1, 2, 3, 4, 5};
        const RieReport report = rie_diagnostic(gamma, PartitionScheme::dyadic(), ns, 2.5);
        for (const auto& stat : report.levels) {
            const double pieces = std::exp2(static_cast<double>(stat.level));
            CHECK(stat.part2_sup_err <= 1.0 / pieces + 1e-12);
        }
    }
    SUBCASE("Brownian path: part (ii) error decreasing with slope <= -0.3") {
        const SampledPath w = brownian(14, 42);
        const std::vector<std::size_t> ns{6, 7, 8, 9, 10, 11, 12};
        const RieReport report = rie_diagnostic(w, PartitionScheme::dyadic(), ns, 2.5);
        double num = 0.0, den = 0.0;
        const double x0 = 9.0;
        double mean_y = 0.0;
        std::vector<double> ys;
        for (const auto& stat : report.levels) ys.push_back(std::log2(stat.part2_sup_err));
        for (double y : ys) mean_y += y / static_cast<double>(ys.size());
        for (std::size_t i = 0; i < ys.size(); ++i) {
            const double dx = static_cast<double>(ns[i]) - x0;
            num += dx * (ys[i] - mean_y);
            den += dx * dx;
        }
        CHECK(num / den <= -0.3);
    }
    SUBCASE("single-jump staircase on the first partition has zero defects") {
        std::vector<double> t{0.0, 0.25, 0.5, 0.75, 1.0};
        const SampledPath stair = SampledPath::scalar(t, {0, 0, 1, 1, 1});
        const std::vector<std::size_t> ns{1, 2};
        const RieReport report = rie_diagnostic(stair, PartitionScheme::dyadic(), ns, 2.5);
        for (const auto& stat : report.levels) {
            CHECK(stat.part2_sup_err == 0.0);
            CHECK(stat.part3_sup_stat == 0.0);
        }
    }
}

TEST_CASE("riemann lift error of the time path telescopes") {
    const std::size_t n = 1 << 8;
    const RoughPath lift = RoughPath::rie_lift(identity_on(n));
    for (std::size_t level = 1; level <= 5; ++level) {
        const double pieces = std::exp2(static_cast<double>(level));
        const double expect = 0.5 * (1.0 / pieces - 1.0 / static_cast<double>(n));
        CHECK(riemann_lift_sup_error(lift, PartitionScheme::dyadic(), level) ==
              doctest::Approx(expect).epsilon(1e-10));
    }
}
