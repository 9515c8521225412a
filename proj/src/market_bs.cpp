#include "roughfolio/market_bs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roughfolio {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

double param(const std::map<std::string, double>& params, const std::string& key) {
    const auto it = params.find(key);
    if (it == params.end())
        throw std::invalid_argument("coefficient registry: missing parameter '" + key + "'");
    return it->second;
}

/// Solves (sigma sigma^T) h = b at one grid point from flat value arrays.
double solve_h_values(std::span<const double> sigma, std::span<const double> b, std::size_t m,
                      std::size_t d, std::span<double> h) {
    std::vector<double> c(m * m, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t s = 0; s < m; ++s) {
            double v = 0.0;
            for (std::size_t k = 0; k < d; ++k) v += sigma[r * d + k] * sigma[s * d + k];
            c[r * m + s] = v;
        }
    std::vector<double> rhs(b.begin(), b.end());
    double det = 1.0;
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::abs(c[r * m + col]) > std::abs(c[pivot * m + col])) pivot = r;
        if (pivot != col) {
            for (std::size_t cc = col; cc < m; ++cc) std::swap(c[pivot * m + cc], c[col * m + cc]);
            std::swap(rhs[pivot], rhs[col]);
            det = -det;
        }
        const double p = c[col * m + col];
        det *= p;
        if (p == 0.0) return 0.0;
        for (std::size_t r = col + 1; r < m; ++r) {
            const double f = c[r * m + col] / p;
            if (f == 0.0) continue;
            for (std::size_t cc = col; cc < m; ++cc) c[r * m + cc] -= f * c[col * m + cc];
            rhs[r] -= f * rhs[col];
        }
    }
    for (std::size_t ri = m; ri-- > 0;) {
        double v = rhs[ri];
        for (std::size_t cc = ri + 1; cc < m; ++cc) v -= c[ri * m + cc] * h[cc];
        h[ri] = v / c[ri * m + ri];
    }
    return det;
}

ControlledPath remaining_clock(const ConsumptionClock& clock,
                               std::shared_ptr<const RoughPath> lift) {
    const std::size_t n = clock.path().size();
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = clock.total() - clock.at(i);
    return ControlledPath::finite_variation(
        std::move(lift), SampledPath::scalar(clock.path().times(), std::move(values)));
}

} // namespace

std::vector<ControlledPath> xi(const ControlledCoefficients& coeffs,
                               std::shared_ptr<const TimeAugmentedRoughPath> lift) {
    const std::size_t m = coeffs.assets();
    const std::size_t d = lift->dim() - 1;
    std::vector<ControlledPath> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        require(coeffs.vol_rows[i].codim() == d, "xi: vol row dimension mismatch");
        std::vector<ControlledPath> comps;
        comps.push_back(coeffs.drift[i]);
        for (std::size_t k = 0; k < d; ++k) comps.push_back(coeffs.vol_rows[i].component(k));
        out.push_back(rough_integral_vs_reference(from_components(comps)));
    }
    return out;
}

PriceExponentialResult price_exponential(const ControlledCoefficients& coeffs,
                                         std::span<const double> s0,
                                         std::shared_ptr<const TimeAugmentedRoughPath> lift) {
    const std::size_t m = coeffs.assets();
    require(s0.size() == m, "price_exponential: initial price dimension mismatch");
    const std::size_t d = lift->dim() - 1;
    const std::size_t n = lift->size();
    PriceExponentialResult result;
    for (std::size_t i = 0; i < m; ++i) {
        require(s0[i] > 0.0, "price_exponential: initial prices must be positive");
        LinearRdeSolution sol = linear_rde_solve(coeffs.drift[i], coeffs.vol_rows[i], s0[i], lift);

        // Direct representation exp(A), A = int (b - |sigma|^2/2) dt + int sigma dW.
        const ControlledPath& b = coeffs.drift[i];
        const ControlledPath& sig = coeffs.vol_rows[i];
        std::vector<ControlledPath> comps;
        comps.push_back(subtract(b, scale(dot(sig, sig), 0.5)));
        for (std::size_t k = 0; k < d; ++k) comps.push_back(sig.component(k));
        const ControlledPath a = rough_integral_vs_reference(from_components(comps));
        double worst = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double direct = s0[i] * std::exp(a.value(j));
            const double gap = std::abs(sol.price.value(j) - direct) / std::abs(direct);
            worst = std::max(worst, gap);
        }
        result.cross_check_sup = std::max(result.cross_check_sup, worst);
        for (std::size_t j = 0; j < n; ++j)
            if (!(sol.price.value(j) > 0.0))
                throw std::runtime_error("price_exponential: positivity lost at t=" +
                                         std::to_string(lift->base().time(j)));
        result.prices.push_back(std::move(sol.price));
    }
    return result;
}

LogOptimalBsResult log_optimal_portfolio_bs(const ControlledCoefficients& coeffs,
                                            const std::vector<ControlledPath>& prices,
                                            const ConsumptionClock& clock,
                                            std::shared_ptr<const TimeAugmentedRoughPath> lift) {
    const std::size_t m = coeffs.assets();
    const std::size_t d = lift->dim() - 1;
    require(prices.size() == m, "log_optimal_portfolio_bs: price count mismatch");
    require(clock.total() > 0.0, "log_optimal_portfolio_bs: K_T must be positive");

    // Stack the rows into matrix-valued paths sigma (m x d) and b (m x 1).
    std::vector<ControlledPath> sigma_comps, b_comps;
    for (std::size_t i = 0; i < m; ++i) {
        b_comps.push_back(coeffs.drift[i]);
        for (std::size_t k = 0; k < d; ++k) sigma_comps.push_back(coeffs.vol_rows[i].component(k));
    }
    const ControlledPath sigma = from_components(sigma_comps);
    const ControlledPath b = from_components(b_comps);
    const ControlledPath sigma_t = transpose(sigma, m, d);
    const ControlledPath c = matmul(sigma, m, d, sigma_t, m);

    double det_min = std::numeric_limits<double>::infinity();
    {
        std::vector<double> h(m);
        for (std::size_t j = 0; j < lift->size(); ++j) {
            const double det = solve_h_values(sigma.value_at(j), b.value_at(j), m, d, h);
            det_min = std::min(det_min, std::abs(det));
            if (!(std::abs(det) >= coeffs.det_floor))
                throw std::runtime_error(
                    "log_optimal_portfolio_bs: det(sigma sigma^T) below floor at t=" +
                    std::to_string(lift->base().time(j)));
        }
    }

    const ControlledPath cinv = matrix_inverse(c, m, coeffs.det_floor);
    const ControlledPath h = matmul(cinv, m, m, b, 1);

    double sup_inv_price = 0.0;
    std::vector<ControlledPath> big_h;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < lift->size(); ++j) {
            const double s = prices[i].value(j);
            if (!(s > 0.0))
                throw std::runtime_error("log_optimal_portfolio_bs: price not positive at t=" +
                                         std::to_string(lift->base().time(j)));
            sup_inv_price = std::max(sup_inv_price, 1.0 / s);
        }
        const ControlledPath inv_s =
            compose_smooth(prices[i], SmoothMap::reciprocal1d(1e-300));
        big_h.push_back(product(h.component(i), inv_s));
    }

    // U = int (h^T b / 2, h^T sigma) d(.,W); kappa = exp(U)/K_T.
    const ControlledPath hts = matmul(transpose(h, m, 1), 1, m, sigma, d); // 1 x d
    std::vector<ControlledPath> theta_comps;
    theta_comps.push_back(scale(dot(h, b), 0.5));
    for (std::size_t k = 0; k < d; ++k) theta_comps.push_back(hts.component(k));
    const ControlledPath u = rough_integral_vs_reference(from_components(theta_comps));
    const ControlledPath kappa = scale(compose_smooth(u, SmoothMap::exp1d()), 1.0 / clock.total());
    const ControlledPath v = product(kappa, remaining_clock(clock, lift));

    std::vector<ControlledPath> phi;
    for (std::size_t i = 0; i < m; ++i) phi.push_back(product(big_h[i], v));
    std::optional<ControlledPath> phi0;
    for (std::size_t i = 0; i < m; ++i) {
        ControlledPath term = subtract(rough_integral(phi[i], prices[i]), product(phi[i], prices[i]));
        phi0 = phi0 ? add(*phi0, term) : std::move(term);
    }

    WealthPath wealth{v.value_path(), WealthPath::Mode::optimal};
    return {PortfolioPath{std::move(*phi0), std::move(phi), std::move(kappa)}, std::move(wealth),
            det_min, sup_inv_price};
}

DiscretizedBsResult discretized_portfolio_bs(const ControlledCoefficients& coeffs,
                                             const std::vector<ControlledPath>& prices_true,
                                             const ConsumptionClock& clock,
                                             const PartitionScheme& scheme, std::size_t n) {
    const std::size_t m = coeffs.assets();
    const auto lift = prices_true[0].reference_ptr();
    const std::size_t d = lift->dim() - 1;
    const auto& times = lift->base().times();
    const auto idx = scheme.indices(times, n);
    const std::size_t cells = idx.size() - 1;
    require(clock.jumps_in_partition(scheme, n),
            "discretized_portfolio_bs: clock jumps must lie on the partition");
    for (std::size_t s : coeffs.jump_indices)
        require(std::binary_search(idx.begin(), idx.end(), s),
                "discretized_portfolio_bs: coefficient jumps must lie on the partition");

    const double kt = clock.total();
    std::vector<double> s_pts((cells + 1) * m), a_pts(m, 0.0);
    std::vector<double> u_pts(cells + 1, 0.0), kappa_pts(cells + 1);
    std::vector<double> h_pts((cells + 1) * m), gains_pts((cells + 1) * m, 0.0);
    std::vector<double> b_now(m), sig_now(m * d), h(m);

    for (std::size_t i = 0; i < m; ++i) s_pts[i] = prices_true[i].value(0);
    for (std::size_t k = 0; k <= cells; ++k) {
        const std::size_t g = idx[k];
        for (std::size_t i = 0; i < m; ++i) {
            b_now[i] = coeffs.drift[i].value(g);
            for (std::size_t c = 0; c < d; ++c) sig_now[i * d + c] = coeffs.vol_rows[i].value(g, c);
        }
        const double det = solve_h_values(sig_now, b_now, m, d, h);
        if (!(std::abs(det) >= coeffs.det_floor))
            throw std::runtime_error("discretized_portfolio_bs: det below floor at t=" +
                                     std::to_string(times[g]));
        for (std::size_t i = 0; i < m; ++i) h_pts[k * m + i] = h[i];
        kappa_pts[k] = std::exp(u_pts[k]) / kt;
        if (k == cells) break;

        const double dt = times[idx[k + 1]] - times[g];
        const auto w0 = lift->base().at(g);
        const auto w1 = lift->base().at(idx[k + 1]);
        for (std::size_t i = 0; i < m; ++i) {
            double s2 = 0.0, dws = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                s2 += sig_now[i * d + c] * sig_now[i * d + c];
                dws += sig_now[i * d + c] * (w1[1 + c] - w0[1 + c]);
            }
            a_pts[i] += (b_now[i] - 0.5 * s2) * dt + dws;
            s_pts[(k + 1) * m + i] = prices_true[i].value(0) * std::exp(a_pts[i]);
        }
        double du = 0.0;
        for (std::size_t i = 0; i < m; ++i) du += 0.5 * h[i] * b_now[i] * dt;
        for (std::size_t c = 0; c < d; ++c) {
            double hs = 0.0;
            for (std::size_t i = 0; i < m; ++i) hs += h[i] * sig_now[i * d + c];
            du += hs * (w1[1 + c] - w0[1 + c]);
        }
        u_pts[k + 1] = u_pts[k] + du;
    }

    const SampledPath k_stair = piecewise_constant(clock.path(), scheme, n);
    std::vector<double> v_pts(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k)
        v_pts[k] = kappa_pts[k] * (kt - k_stair.value(idx[k]));
    for (std::size_t k = 0; k + 1 <= cells; ++k)
        for (std::size_t i = 0; i < m; ++i) {
            const double phi = (h_pts[k * m + i] / s_pts[k * m + i]) * v_pts[k];
            const double ds = s_pts[(k + 1) * m + i] - s_pts[k * m + i];
            gains_pts[(k + 1) * m + i] = gains_pts[k * m + i] + phi * ds;
        }

    const std::size_t npts = times.size();
    auto expand = [&](const std::function<double(std::size_t)>& at_point) {
        std::vector<double> out(npts);
        std::size_t cell = 0;
        for (std::size_t j = 0; j + 1 < npts; ++j) {
            while (cell + 1 < cells && idx[cell + 1] <= j) ++cell;
            out[j] = at_point(cell);
        }
        out[npts - 1] = at_point(cells);
        return out;
    };

    SampledPath kappa_n = SampledPath::scalar(times, expand([&](std::size_t k) { return kappa_pts[k]; }));
    SampledPath v_n = SampledPath::scalar(times, expand([&](std::size_t k) { return v_pts[k]; }));
    std::vector<ControlledPath> phi_n;
    for (std::size_t i = 0; i < m; ++i)
        phi_n.push_back(ControlledPath::finite_variation(
            lift, SampledPath::scalar(times, expand([&](std::size_t k) {
                      return (h_pts[k * m + i] / s_pts[k * m + i]) * v_pts[k];
                  }))));
    SampledPath phi0_n = SampledPath::scalar(times, expand([&](std::size_t k) {
        double v = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            v += gains_pts[k * m + i] - (h_pts[k * m + i] / s_pts[k * m + i]) * v_pts[k] * s_pts[k * m + i];
        return v;
    }));

    // Staircase-vs-original bookkeeping for the coefficient data, using
    // (b^n)' = (b')^n and R^{b^n} = (R^b)^n.
    CoefficientStaircaseGap gap;
    {
        const auto anchors = default_anchors(npts, 256);
        for (std::size_t i = 0; i < m; ++i) {
            const ControlledPath& bcp = coeffs.drift[i];
            const ControlledPath& scp = coeffs.vol_rows[i];
            const SampledPath bder = bcp.derivative_path();
            const SampledPath sder = scp.derivative_path();
            const SampledPath bder_n = piecewise_constant(bder, scheme, n);
            const SampledPath sder_n = piecewise_constant(sder, scheme, n);
            gap.drift_deriv_sup = std::max(gap.drift_deriv_sup, sup_distance(bder, bder_n));
            gap.vol_deriv_sup = std::max(gap.vol_deriv_sup, sup_distance(sder, sder_n));
            // Remainder gap on anchor pairs: R^{b^n}(s,t) sampled via the
            // staircase value path with staircase derivative.
            const SampledPath bval_n = piecewise_constant(bcp.value_path(), scheme, n);
            const SampledPath sval_n = piecewise_constant(scp.value_path(), scheme, n);
            const ControlledPath bn(lift, bval_n.raw_values(), bder_n.raw_values(), 1);
            const ControlledPath sn(lift, sval_n.raw_values(), sder_n.raw_values(), d);
            std::vector<double> r1(1), r2(1), rs1(d), rs2(d);
            for (std::size_t ai = 0; ai < anchors.size(); ++ai)
                for (std::size_t bi = ai + 1; bi < anchors.size(); ++bi) {
                    bcp.remainder(anchors[ai], anchors[bi], r1);
                    bn.remainder(anchors[ai], anchors[bi], r2);
                    gap.drift_remainder_sup =
                        std::max(gap.drift_remainder_sup, std::abs(r1[0] - r2[0]));
                    scp.remainder(anchors[ai], anchors[bi], rs1);
                    sn.remainder(anchors[ai], anchors[bi], rs2);
                    double acc = 0.0;
                    for (std::size_t c = 0; c < d; ++c) acc += (rs1[c] - rs2[c]) * (rs1[c] - rs2[c]);
                    gap.vol_remainder_sup = std::max(gap.vol_remainder_sup, std::sqrt(acc));
                }
        }
    }

    PortfolioPath portfolio{ControlledPath::finite_variation(lift, phi0_n), std::move(phi_n),
                            ControlledPath::finite_variation(lift, kappa_n)};
    WealthPath wealth{std::move(v_n), WealthPath::Mode::optimal};

    std::vector<double> hat(npts, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
        const ControlledPath gains = rough_integral(portfolio.phi[i], prices_true[i]);
        for (std::size_t j = 0; j < npts; ++j) hat[j] += gains.value(j);
    }
    const SampledPath consumed = clock_integral(portfolio.kappa.value_path(), clock);
    for (std::size_t j = 0; j < npts; ++j) hat[j] -= consumed.value(j);
    WealthPath wealth_hat{SampledPath::scalar(times, std::move(hat)), WealthPath::Mode::realized};

    return {std::move(portfolio), std::move(wealth), std::move(wealth_hat), gap};
}

// ---------------------------------------------------------------------------

ControlledCoefficients make_bs_coefficients(const BsCoeffSpec& spec,
                                            std::shared_ptr<const TimeAugmentedRoughPath> lift) {
    const std::size_t n = lift->size();
    const std::size_t d = lift->dim() - 1;
    require(d == 1, "bs registry: families are single-asset single-noise");
    ControlledCoefficients out;

    auto constant_path = [&](double value) {
        std::vector<double> v(1, value);
        return ControlledPath::constant(lift, v);
    };

    if (spec.family == "bs.const") {
        const double b = param(spec.params, "b");
        const double s = param(spec.params, "sigma");
        require(std::abs(s) > 0.0, "bs.const: sigma must be nonzero");
        out.drift.push_back(constant_path(b));
        out.vol_rows.push_back(constant_path(s));
        out.det_floor = std::min(1e-8, 0.5 * s * s);
        return out;
    }
    if (spec.family == "bs.sin") {
        // b_t = b0 + b1 sin(omega t), deterministic smooth; sigma constant.
        const double b0 = param(spec.params, "b0");
        const double b1 = param(spec.params, "b1");
        const double omega = param(spec.params, "omega");
        const double s = param(spec.params, "sigma");
        require(std::abs(s) > 0.0, "bs.sin: sigma must be nonzero");
        std::vector<double> values(n), derivs(n * (1 + d), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double t = lift->base().time(j);
            values[j] = b0 + b1 * std::sin(omega * t);
            derivs[j * (1 + d)] = b1 * omega * std::cos(omega * t); // time coordinate
        }
        out.drift.emplace_back(lift, std::move(values), std::move(derivs), 1);
        out.vol_rows.push_back(constant_path(s));
        out.det_floor = std::min(1e-8, 0.5 * s * s);
        return out;
    }
    if (spec.family == "bs.tanhw") {
        // b_t = b0 + b1 tanh(W_t), sigma_t = s0 + s1 tanh(W_t); W-driven
        // coefficients with Gubinelli derivative in the noise coordinate.
        const double b0 = param(spec.params, "b0");
        const double b1 = param(spec.params, "b1");
        const double s0 = param(spec.params, "s0");
        const double s1 = param(spec.params, "s1");
        require(s0 - std::abs(s1) > 0.0, "bs.tanhw: need s0 > |s1|");
        std::vector<double> bv(n), bd(n * (1 + d), 0.0), sv(n), sd(n * (1 + d), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double w = lift->base().value(j, 1);
            const double th = std::tanh(w);
            const double sech2 = 1.0 - th * th;
            bv[j] = b0 + b1 * th;
            bd[j * (1 + d) + 1] = b1 * sech2;
            sv[j] = s0 + s1 * th;
            sd[j * (1 + d) + 1] = s1 * sech2;
        }
        out.drift.emplace_back(lift, std::move(bv), std::move(bd), 1);
        out.vol_rows.emplace_back(lift, std::move(sv), std::move(sd), 1);
        const double smin = s0 - std::abs(s1);
        out.det_floor = std::min(1e-8, 0.5 * smin * smin);
        return out;
    }
    throw std::invalid_argument("unknown bs coefficient family '" + spec.family + "'");
}

std::pair<BsCoeffSpec, double> perturb_bs(const BsCoeffSpec& spec, double delta,
                                          const std::string& which) {
    BsCoeffSpec out = spec;
    if (spec.family == "bs.const" || spec.family == "bs.sin") {
        if (which == "drift") {
            out.params[spec.family == "bs.const" ? "b" : "b0"] += delta;
            return {out, 1.0}; // constant direction: |dY_0| = 1, derivative and R vanish
        }
        if (which == "vol") {
            out.params["sigma"] += delta;
            return {out, 1.0};
        }
    } else if (spec.family == "bs.tanhw") {
        if (which == "drift") {
            out.params["b0"] += delta;
            return {out, 1.0};
        }
        if (which == "vol") {
            out.params["s0"] += delta;
            return {out, 1.0};
        }
    }
    throw std::invalid_argument("perturb_bs: unknown direction '" + which + "'");
}

} // namespace roughfolio
