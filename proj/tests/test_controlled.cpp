#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "roughfolio/controlled.hpp"
#include "roughfolio/noise.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace roughfolio;

namespace {

std::shared_ptr<const RoughPath> brownian_lift(std::size_t level, std::uint64_t seed) {
    NoiseSpec spec;
    spec.kind = NoiseSpec::Kind::brownian;
    spec.master_level = level;
    spec.seed = seed;
    return std::make_shared<const RoughPath>(RoughPath::rie_lift(generate(spec)));
}

/// Polynomial of the reference path: value poly(W_t), derivative poly'(W_t).
ControlledPath polynomial(const std::shared_ptr<const RoughPath>& ref,
                          std::span<const double> coeffs) {
    const std::size_t n = ref->size();
    std::vector<double> values(n), derivs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = ref->base().value(i);
        double v = 0.0, dv = 0.0, pw = 1.0;
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            v += coeffs[k] * pw;
            if (k + 1 < coeffs.size()) dv += coeffs[k + 1] * static_cast<double>(k + 1) * pw;
            pw *= w;
        }
        values[i] = v;
        derivs[i] = dv;
    }
    return ControlledPath(ref, std::move(values), std::move(derivs), 1);
}

} // namespace

TEST_CASE("remainders of basic controlled paths") {
    auto lift = brownian_lift(8, 3);
    const std::size_t n = lift->size();
    SUBCASE("the reference controlled by itself has zero remainder") {
        const ControlledPath x = ControlledPath::identity(lift);
        for (std::size_t t = 0; t < n; t += 37) CHECK(x.remainder_norm(0, t) == 0.0);
        const double norm = controlled_norm(x, 2.5);
        CHECK(norm == doctest::Approx(std::abs(lift->base().value(0)) + 1.0));
    }
    SUBCASE("a constant path has norm |c|") {
        const double c = -2.0;
        const ControlledPath cp = ControlledPath::constant(lift, std::span(&c, 1));
        CHECK(controlled_norm(cp, 2.5) == doctest::Approx(2.0));
    }
    SUBCASE("Y = X^2 with Y' = 2X has remainder (dX)^2") {
        const ControlledPath x = ControlledPath::identity(lift);
        const ControlledPath x2 = product(x, x);
        std::vector<double> r(1);
        for (std::size_t s = 0; s < n; s += 41) {
            const std::size_t t = std::min(n - 1, s + 57);
            x2.remainder(s, t, r);
            const double dw = lift->base().value(t) - lift->base().value(s);
            CHECK(r[0] == doctest::Approx(dw * dw).epsilon(1e-12));
        }
    }
}

TEST_CASE("controlled distance") {
    auto lift = brownian_lift(7, 5);
    const ControlledPath f = polynomial(lift, std::vector<double>{0.3, 1.0, -0.5});
    CHECK(controlled_distance(f, f, 2.5) == 0.0);
    const ControlledPath g = polynomial(lift, std::vector<double>{0.3, 1.1, -0.5});
    CHECK(controlled_distance(f, g, 2.5) > 0.0);
    auto other = brownian_lift(6, 5);
    CHECK_THROWS(controlled_distance(f, ControlledPath::identity(other), 2.5));
}

TEST_CASE("products") {
    auto lift = brownian_lift(8, 11);
    const ControlledPath x = ControlledPath::identity(lift);
    SUBCASE("(X^2)' = 2X") {
        const ControlledPath x2 = product(x, x);
        for (std::size_t i = 0; i < x.size(); i += 19)
            CHECK(x2.deriv(i, 0, 0) == doctest::Approx(2.0 * x.value(i)).epsilon(1e-15));
    }
    SUBCASE("constant times path scales value and derivative") {
        const double c = 3.0;
        const ControlledPath cp = ControlledPath::constant(lift, std::span(&c, 1));
        const ControlledPath prod = product(cp, x);
        for (std::size_t i = 0; i < x.size(); i += 23) {
            CHECK(prod.value(i) == doctest::Approx(3.0 * x.value(i)));
            CHECK(prod.deriv(i, 0, 0) == doctest::Approx(3.0));
        }
    }
    SUBCASE("product remainder identity at random pairs") {
        const ControlledPath f = polynomial(lift, std::vector<double>{0.2, -1.0, 0.4});
        const ControlledPath g = polynomial(lift, std::vector<double>{-0.1, 0.7, 0.0, 0.2});
        const ControlledPath fg = product(f, g);
        std::vector<double> rf(1), rg(1), rfg(1);
        std::uint64_t state = 77;
        double worst = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            auto draw = [&] {
                return static_cast<std::size_t>((oracles::test_uniform(state) + 1.0) * 0.5 *
                                                static_cast<double>(f.size() - 1));
            };
            std::size_t s = draw(), t = draw();
            if (s > t) std::swap(s, t);
            f.remainder(s, t, rf);
            g.remainder(s, t, rg);
            fg.remainder(s, t, rfg);
            const double expect = rf[0] * g.value(s) + f.value(s) * rg[0] +
                                  (f.value(t) - f.value(s)) * (g.value(t) - g.value(s));
            worst = std::max(worst, std::abs(rfg[0] - expect));
        }
        CHECK(worst <= 1e-12);
    }
    SUBCASE("norm bound over random polynomial pairs") {
        std::uint64_t state = 31;
        const double p = 2.5;
        auto small = brownian_lift(6, 13);
        const std::vector<std::size_t> anchors = default_anchors(small->size(), 12);
        const double xvar = p_variation(small->base(), p, anchors);
        double worst_ratio = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> cf(3), cg(3);
            for (auto& c : cf) c = oracles::test_uniform(state);
            for (auto& c : cg) c = oracles::test_uniform(state);
            const ControlledPath f = polynomial(small, cf);
            const ControlledPath g = polynomial(small, cg);
            const double nf = controlled_norm(f, p, anchors);
            const double ng = controlled_norm(g, p, anchors);
            if (nf == 0.0 || ng == 0.0) continue;
            const double nfg = controlled_norm(product(f, g), p, anchors);
            worst_ratio =
                std::max(worst_ratio, nfg / ((1.0 + xvar) * (1.0 + xvar) * nf * ng));
        }
        CHECK(worst_ratio <= 16.0);
    }
}

TEST_CASE("smooth composition") {
    auto lift = brownian_lift(7, 21);
    const ControlledPath x = ControlledPath::identity(lift);
    SUBCASE("identity map leaves the path unchanged") {
        const ControlledPath same = compose_smooth(x, SmoothMap::identity(1));
        CHECK(controlled_distance(x, same, 2.5) == 0.0);
    }
    SUBCASE("square equals the self-product") {
        const ControlledPath via_map = compose_smooth(x, SmoothMap::square1d());
        const ControlledPath via_product = product(x, x);
        for (std::size_t i = 0; i < x.size(); i += 13) {
            CHECK(via_map.value(i) == doctest::Approx(via_product.value(i)).epsilon(1e-15));
            CHECK(via_map.deriv(i, 0, 0) ==
                  doctest::Approx(via_product.deriv(i, 0, 0)).epsilon(1e-15));
        }
    }
    SUBCASE("reciprocal of a path bounded away from zero multiplies back to one") {
        const ControlledPath y = compose_smooth(x, SmoothMap::affine1d(0.1, 1.5));
        const ControlledPath inv = compose_smooth(y, SmoothMap::reciprocal1d(0.5));
        const ControlledPath unit = product(y, inv);
        for (std::size_t i = 0; i < x.size(); i += 17)
            CHECK(unit.value(i) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("domain guard rejects near the singularity") {
        CHECK_THROWS(compose_smooth(x, SmoothMap::reciprocal1d(1e6)));
    }
    SUBCASE("composition chains") {
        const ControlledPath via_chain =
            compose_smooth(compose_smooth(x, SmoothMap::affine1d(0.5, 0.0)), SmoothMap::exp1d());
        SmoothMap direct;
        direct.value = [](std::span<const double> in, std::span<double> out) {
            out[0] = std::exp(0.5 * in[0]);
        };
        direct.deriv = [](std::span<const double> in, std::span<double> out) {
            out[0] = 0.5 * std::exp(0.5 * in[0]);
        };
        const ControlledPath via_direct = compose_smooth(x, direct);
        for (std::size_t i = 0; i < x.size(); i += 11) {
            CHECK(via_chain.value(i) == doctest::Approx(via_direct.value(i)).epsilon(1e-14));
            CHECK(via_chain.deriv(i, 0, 0) ==
                  doctest::Approx(via_direct.deriv(i, 0, 0)).epsilon(1e-14));
        }
    }
}

TEST_CASE("rough integration") {
    auto lift = brownian_lift(10, 8);
    const std::size_t n = lift->size();
    const ControlledPath x = ControlledPath::identity(lift);
    SUBCASE("integrating one telescopes the integrator") {
        const double one = 1.0;
        const ControlledPath f = ControlledPath::constant(lift, std::span(&one, 1));
        const ControlledPath z = rough_integral(f, x);
        for (std::size_t t = 0; t < n; t += 97)
            CHECK(z.value(t) ==
                  doctest::Approx(lift->base().value(t) - lift->base().value(0)).epsilon(1e-14));
    }
    SUBCASE("int X dX reproduces the stored iterated integral") {
        const ControlledPath z = rough_integral(x, x);
        for (std::size_t t = 0; t < n; t += 101)
            CHECK(z.value(t) == doctest::Approx(lift->iterated_at(t)[0]).epsilon(1e-13));
    }
    SUBCASE("linearity") {
        const ControlledPath f1 = polynomial(lift, std::vector<double>{0.0, 1.0, 0.3});
        const ControlledPath f2 = polynomial(lift, std::vector<double>{0.5, -0.2});
        const double a = 2.0, b = -3.0;
        const ControlledPath combined = rough_integral(add(scale(f1, a), scale(f2, b)), x);
        const ControlledPath split =
            add(scale(rough_integral(f1, x), a), scale(rough_integral(f2, x), b));
        double worst = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            worst = std::max(worst, std::abs(combined.value(t) - split.value(t)));
        CHECK(worst <= 1e-12);
    }
    SUBCASE("output derivative is F G'") {
        const ControlledPath f = polynomial(lift, std::vector<double>{0.1, 0.7});
        const ControlledPath z = rough_integral(f, product(x, x));
        for (std::size_t t = 0; t < n; t += 211)
            CHECK(z.deriv(t, 0, 0) ==
                  doctest::Approx(f.value(t) * 2.0 * x.value(t)).epsilon(1e-13));
    }
}

TEST_CASE("Riemann-sum integral diagnostics") {
    SUBCASE("constant integrand is exact at every level") {
        auto lift = brownian_lift(8, 2);
        const double one = 1.0;
        const ControlledPath f = ControlledPath::constant(lift, std::span(&one, 1));
        const ControlledPath x = ControlledPath::identity(lift);
        const SampledPath sums = riemann_sum_integral(f, x, PartitionScheme::dyadic(), 3);
        const ControlledPath exact = rough_integral(f, x);
        CHECK(sup_distance(sums, exact.value_path()) <= 1e-14);
    }
    SUBCASE("smooth integrand: left-point error bounded by T^2/n") {
        std::vector<double> times(257);
        for (std::size_t i = 0; i < times.size(); ++i)
            times[i] = static_cast<double>(i) / 256.0;
        auto lift =
            std::make_shared<const RoughPath>(RoughPath::rie_lift(SampledPath::identity(times)));
        const ControlledPath g = ControlledPath::identity(lift);
        for (std::size_t level = 1; level <= 5; ++level) {
            const SampledPath sums = riemann_sum_integral(g, g, PartitionScheme::dyadic(), level);
            const ControlledPath exact = rough_integral(g, g);
            const double pieces = std::exp2(static_cast<double>(level));
            CHECK(sup_distance(sums, exact.value_path()) <= 1.0 / pieces);
        }
    }
    SUBCASE("W against W: error decays with slope at most -0.3 over levels 6..12") {
        auto lift = brownian_lift(15, 19);
        const ControlledPath w = ControlledPath::identity(lift);
        const ControlledPath exact = rough_integral(w, w);
        std::vector<double> errors;
        for (std::size_t level = 6; level <= 12; ++level) {
            const SampledPath sums = riemann_sum_integral(w, w, PartitionScheme::dyadic(), level);
            errors.push_back(sup_distance(sums, exact.value_path()));
        }
        CHECK(errors.back() < errors.front());
        const double slope = std::log2(errors.back() / errors.front()) /
                             static_cast<double>(errors.size() - 1);
        CHECK(slope <= -0.3);
    }
}

TEST_CASE("canonical lift") {
    auto lift = brownian_lift(9, 44);
    SUBCASE("the identity pairing returns the original lift") {
        const RoughPath again = canonical_lift(ControlledPath::identity(lift));
        for (std::size_t t = 0; t < lift->size(); t += 61)
            CHECK(again.iterated_at(t)[0] ==
                  doctest::Approx(lift->iterated_at(t)[0]).epsilon(1e-13));
    }
    SUBCASE("a constant path lifts to a vanishing second level") {
        const double c = 5.0;
        const RoughPath zero = canonical_lift(ControlledPath::constant(lift, std::span(&c, 1)));
        std::vector<double> xx(1);
        zero.second_level(0, zero.size() - 1, xx);
        CHECK(xx[0] == 0.0);
    }
    SUBCASE("Chen holds exactly for lifted controlled paths") {
        const ControlledPath z = polynomial(lift, std::vector<double>{0.0, 1.0, 0.25});
        const RoughPath zlift = canonical_lift(z);
        std::vector<double> xst(1), xsu(1), xut(1);
        const std::size_t s = 40, u = 300, t = 501;
        zlift.second_level(s, t, xst);
        zlift.second_level(s, u, xsu);
        zlift.second_level(u, t, xut);
        const double res = xst[0] - xsu[0] - xut[0] -
                           (z.value(u) - z.value(s)) * (z.value(t) - z.value(u));
        CHECK(std::abs(res) <= 1e-13);
    }
}

TEST_CASE("associativity of rough integration") {
    auto lift = brownian_lift(12, 91);
    const ControlledPath x = ControlledPath::identity(lift);
    const double one = 1.0;
    const ControlledPath ones = ControlledPath::constant(lift, std::span(&one, 1));
    SUBCASE("trivial outer or inner integrand") {
        CHECK(associativity_residual(ones, polynomial(lift, std::vector<double>{0.1, 1.0}), x) <=
              1e-15);
        CHECK(associativity_residual(polynomial(lift, std::vector<double>{0.1, 1.0}), ones, x) <=
              1e-15);
    }
    SUBCASE("random polynomial integrands agree up to roundoff") {
        std::uint64_t state = 6;
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<double> cy(3), cf(3);
            for (auto& c : cy) c = oracles::test_uniform(state);
            for (auto& c : cf) c = oracles::test_uniform(state);
            const ControlledPath y = polynomial(lift, cy);
            const ControlledPath f = polynomial(lift, cf);
            const double norms = (1.0 + controlled_norm(y, 2.5)) *
                                 (1.0 + controlled_norm(f, 2.5)) *
                                 (1.0 + controlled_norm(x, 2.5));
            CHECK(associativity_residual(y, f, x) <= 1e-8 * norms);
        }
    }
}

TEST_CASE("stability of the integration map under perturbations") {
    auto lift = brownian_lift(9, 15);
    const ControlledPath x = ControlledPath::identity(lift);
    const ControlledPath f = polynomial(lift, std::vector<double>{0.2, 0.8, -0.1});
    const ControlledPath bump = polynomial(lift, std::vector<double>{0.1, 0.3, 0.2});
    const ControlledPath base = rough_integral(f, x);
    double prev = 1e100;
    for (int k = 1; k <= 6; ++k) {
        const double delta = std::exp2(-k);
        const ControlledPath perturbed = rough_integral(add(f, scale(bump, delta)), x);
        const double dist = controlled_distance(base, perturbed, 2.5);
        const double input_dist = controlled_distance(f, add(f, scale(bump, delta)), 2.5);
        CHECK(dist <= 10.0 * input_dist); // Lipschitz-type bound with a generous constant
        CHECK(dist <= prev);
        prev = dist;
    }
}

TEST_CASE("sewing bound dominates the local defect") {
    auto lift = brownian_lift(8, 33);
    const ControlledPath f = polynomial(lift, std::vector<double>{0.3, 1.0});
    const ControlledPath g = ControlledPath::identity(lift);
    const ControlledPath z = rough_integral(f, g);
    std::vector<double> xx(1);
    for (const std::size_t s : {std::size_t{0}, std::size_t{60}}) {
        const std::size_t t = s + 150;
        lift->second_level(s, t, xx);
        const double germ = f.value(s) * (g.value(t) - g.value(s)) +
                            f.deriv(s, 0, 0) * g.deriv(s, 0, 0) * xx[0];
        const double defect = std::abs(z.value(t) - z.value(s) - germ);
        CHECK(sewing_bound(f, g, s, t, 2.5) >= defect);
    }
}
