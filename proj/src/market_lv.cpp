#include "roughfolio/market_lv.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roughfolio {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

double param(const std::map<std::string, double>& params, const std::string& key,
             std::optional<double> fallback = std::nullopt) {
    const auto it = params.find(key);
    if (it != params.end()) return it->second;
    if (fallback) return *fallback;
    throw std::invalid_argument("field registry: missing parameter '" + key + "'");
}

/// Solves (sigma sigma^T) h = b at one point; returns det(sigma sigma^T).
double solve_h(std::span<const double> sigma, std::span<const double> b, std::size_t m,
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
    const double total = clock.total();
    for (std::size_t i = 0; i < n; ++i) values[i] = total - clock.at(i);
    return ControlledPath::finite_variation(
        std::move(lift), SampledPath::scalar(clock.path().times(), std::move(values)));
}

} // namespace

PricePathResult price_path(const CoefficientField& field, std::span<const double> s0,
                           std::shared_ptr<const TimeAugmentedRoughPath> lift, double p) {
    RdeSolution sol = rde_solve(field, s0, std::move(lift));
    const double norm = controlled_norm(sol.path, p);
    return {std::move(sol.path), sol.residual_sup, norm};
}

LogOptimalResult log_optimal_portfolio(const CoefficientField& field, const ControlledPath& s,
                                       const ConsumptionClock& clock,
                                       std::shared_ptr<const TimeAugmentedRoughPath> lift) {
    const std::size_t m = field.m, d = field.d;
    require(s.codim() == m, "log_optimal_portfolio: price codimension mismatch");
    require(clock.path().same_grid(lift->base()), "log_optimal_portfolio: clock grid mismatch");
    require(clock.total() > 0.0, "log_optimal_portfolio: K_T must be positive");

    const auto composed = field_along(field, s);
    const ControlledPath vol_t = transpose(composed.vol, m, d);
    const ControlledPath c = matmul(composed.vol, m, d, vol_t, m);

    double det_min = std::numeric_limits<double>::infinity();
    {
        std::vector<double> h(m);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double det =
                solve_h(composed.vol.value_at(i), composed.drift.value_at(i), m, d, h);
            det_min = std::min(det_min, std::abs(det));
            if (!(std::abs(det) >= field.det_floor))
                throw std::runtime_error(
                    "log_optimal_portfolio: det(sigma sigma^T) below floor at t=" +
                    std::to_string(lift->base().time(i)));
        }
    }

    const ControlledPath cinv = matrix_inverse(c, m, field.det_floor);
    const ControlledPath H = matmul(cinv, m, m, composed.drift, 1);
    const ControlledPath theta_w = matmul(vol_t, d, m, H, 1); // sigma^T H
    std::vector<ControlledPath> theta_comps;
    theta_comps.push_back(scale(dot(theta_w, theta_w), 0.5));
    for (std::size_t k = 0; k < d; ++k) theta_comps.push_back(theta_w.component(k));
    const ControlledPath theta = from_components(theta_comps);

    const ControlledPath u = rough_integral_vs_reference(theta);
    const ControlledPath kappa = scale(compose_smooth(u, SmoothMap::exp1d()), 1.0 / clock.total());
    const ControlledPath v = product(kappa, remaining_clock(clock, s.reference_ptr()));

    std::vector<ControlledPath> phi;
    for (std::size_t i = 0; i < m; ++i) phi.push_back(product(H.component(i), v));

    std::optional<ControlledPath> phi0;
    for (std::size_t i = 0; i < m; ++i) {
        ControlledPath term =
            subtract(rough_integral(phi[i], s.component(i)), product(phi[i], s.component(i)));
        phi0 = phi0 ? add(*phi0, term) : std::move(term);
    }

    WealthPath wealth{v.value_path(), WealthPath::Mode::optimal};
    return {PortfolioPath{std::move(*phi0), std::move(phi), std::move(kappa)}, std::move(wealth),
            det_min};
}

WealthPath realized_wealth(const PortfolioPath& portfolio, const ControlledPath& s,
                           const ConsumptionClock& clock) {
    const std::size_t m = s.codim();
    require(portfolio.phi.size() == m, "realized_wealth: portfolio/price dimension mismatch");
    require(clock.path().same_grid(s.reference().base()), "realized_wealth: clock grid mismatch");
    const std::size_t n = s.size();
    std::vector<double> values(n, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
        const ControlledPath gains = rough_integral(portfolio.phi[i], s.component(i));
        for (std::size_t j = 0; j < n; ++j) values[j] += gains.value(j);
    }
    const SampledPath consumed = clock_integral(portfolio.kappa.value_path(), clock);
    for (std::size_t j = 0; j < n; ++j) values[j] -= consumed.value(j);
    return {SampledPath::scalar(s.reference().base().times(), std::move(values)),
            WealthPath::Mode::realized};
}

DiscretizedResult discretized_portfolio(const CoefficientField& field,
                                        const ControlledPath& s_true,
                                        const ConsumptionClock& clock,
                                        const PartitionScheme& scheme, std::size_t n) {
    const std::size_t m = field.m, d = field.d;
    const auto lift = s_true.reference_ptr();
    const auto& times = lift->base().times();
    const auto idx = scheme.indices(times, n);
    const std::size_t cells = idx.size() - 1;
    require(clock.jumps_in_partition(scheme, n),
            "discretized_portfolio: clock jumps must lie on the partition");

    // Euler states at partition points, coefficients evaluated at
    // (gamma^n, S^n), i.e. at the left partition point.
    std::vector<double> states((cells + 1) * m);
    for (std::size_t i = 0; i < m; ++i) states[i] = s_true.value(0, i);
    std::vector<double> b(m), sig(m * d), h(m), theta_w(d);
    std::vector<double> kappa_pts(cells + 1), u_pts(cells + 1, 0.0);
    std::vector<double> h_pts((cells + 1) * m);
    std::vector<double> gains_pts((cells + 1) * m, 0.0); // int phi^n dS^n per asset

    const double kt = clock.total();
    for (std::size_t k = 0; k <= cells; ++k) {
        const double t0 = times[idx[k]];
        const double* cur = states.data() + k * m;
        field.drift(t0, {cur, m}, b);
        field.vol(t0, {cur, m}, sig);
        const double det = solve_h(sig, b, m, d, h);
        if (!(std::abs(det) >= field.det_floor))
            throw std::runtime_error("discretized_portfolio: det below floor at t=" +
                                     std::to_string(t0));
        for (std::size_t i = 0; i < m; ++i) h_pts[k * m + i] = h[i];
        kappa_pts[k] = std::exp(u_pts[k]) / kt;
        if (k == cells) break;

        const double dt = times[idx[k + 1]] - t0;
        const auto w0 = lift->base().at(idx[k]);
        const auto w1 = lift->base().at(idx[k + 1]);
        double* next = states.data() + (k + 1) * m;
        for (std::size_t i = 0; i < m; ++i) {
            double v = cur[i] + b[i] * dt;
            for (std::size_t j = 0; j < d; ++j)
                v += sig[i * d + j] * (w1[1 + j] - w0[1 + j]);
            next[i] = v;
        }
        for (std::size_t j = 0; j < d; ++j) {
            double v = 0.0;
            for (std::size_t i = 0; i < m; ++i) v += sig[i * d + j] * h[i];
            theta_w[j] = v;
        }
        double du = 0.0;
        for (std::size_t j = 0; j < d; ++j) du += 0.5 * theta_w[j] * theta_w[j] * dt;
        for (std::size_t j = 0; j < d; ++j) du += theta_w[j] * (w1[1 + j] - w0[1 + j]);
        u_pts[k + 1] = u_pts[k] + du;
    }

    // K^n and V^n at partition points (left value of the K staircase).
    const SampledPath k_stair = piecewise_constant(clock.path(), scheme, n);
    std::vector<double> v_pts(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k)
        v_pts[k] = kappa_pts[k] * (kt - k_stair.value(idx[k]));

    // phi^{n,i} = H^{n,i} V^n and its gains against S^n at partition points.
    for (std::size_t k = 0; k + 1 <= cells; ++k)
        for (std::size_t i = 0; i < m; ++i) {
            const double phi = h_pts[k * m + i] * v_pts[k];
            const double ds = states[(k + 1) * m + i] - states[k * m + i];
            gains_pts[(k + 1) * m + i] = gains_pts[k * m + i] + phi * ds;
        }

    // Staircase expansion onto the master grid.
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
    std::vector<SampledPath> phi_paths;
    for (std::size_t i = 0; i < m; ++i) {
        SampledPath p = SampledPath::scalar(
            times, expand([&](std::size_t k) { return h_pts[k * m + i] * v_pts[k]; }));
        phi_n.push_back(ControlledPath::finite_variation(lift, p));
        phi_paths.push_back(std::move(p));
    }
    SampledPath phi0_n = SampledPath::scalar(times, expand([&](std::size_t k) {
        double v = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            v += gains_pts[k * m + i] - h_pts[k * m + i] * v_pts[k] * states[k * m + i];
        return v;
    }));

    PortfolioPath portfolio{ControlledPath::finite_variation(lift, phi0_n), std::move(phi_n),
                            ControlledPath::finite_variation(lift, kappa_n)};
    WealthPath wealth{std::move(v_n), WealthPath::Mode::optimal};
    WealthPath wealth_hat = realized_wealth(portfolio, s_true, clock);
    return {std::move(portfolio), std::move(wealth), std::move(wealth_hat)};
}

DiscretizedResult discretized_portfolio(const CoefficientField& field, const SampledPath& noise,
                                        const ConsumptionClock& clock,
                                        const PartitionScheme& scheme, std::size_t n) {
    auto lift = std::make_shared<const TimeAugmentedRoughPath>(
        time_augment(RoughPath::rie_lift(noise)));
    std::vector<double> s0(field.m, 1.0);
    RdeSolution sol = rde_solve(field, s0, lift);
    return discretized_portfolio(field, sol.path, clock, scheme, n);
}

// ---------------------------------------------------------------------------

CoefficientField make_lv_field(const LvFieldSpec& spec) {
    CoefficientField field;
    field.m = 1;
    field.d = 1;
    field.name = spec.family;
    if (spec.family == "lv.const") {
        const double b = param(spec.params, "b");
        const double s = param(spec.params, "sigma");
        require(std::abs(s) > 0.0, "lv.const: sigma must be nonzero");
        field.drift = [b](double, std::span<const double>, std::span<double> out) { out[0] = b; };
        field.vol = [s](double, std::span<const double>, std::span<double> out) { out[0] = s; };
        field.drift_jacobian = [](double, std::span<const double>, std::span<double> out) {
            out[0] = out[1] = 0.0;
        };
        field.vol_jacobian = [](double, std::span<const double>, std::span<double> out) {
            out[0] = out[1] = 0.0;
        };
        field.c3_bound = std::max(std::abs(b), std::abs(s));
        field.det_floor = std::min(1e-8, 0.5 * s * s);
        return field;
    }
    if (spec.family == "lv.tanh") {
        const double b0 = param(spec.params, "b0");
        const double b1 = param(spec.params, "b1");
        const double s0 = param(spec.params, "s0");
        const double s1 = param(spec.params, "s1");
        require(s0 - std::abs(s1) > 0.0, "lv.tanh: need s0 > |s1| for uniform ellipticity");
        field.drift = [b0, b1](double, std::span<const double> x, std::span<double> out) {
            out[0] = b0 + b1 * std::tanh(x[0]);
        };
        field.vol = [s0, s1](double, std::span<const double> x, std::span<double> out) {
            out[0] = s0 + s1 * std::tanh(x[0]);
        };
        field.drift_jacobian = [b1](double, std::span<const double> x, std::span<double> out) {
            const double th = std::tanh(x[0]);
            out[0] = 0.0;
            out[1] = b1 * (1.0 - th * th);
        };
        field.vol_jacobian = [s1](double, std::span<const double> x, std::span<double> out) {
            const double th = std::tanh(x[0]);
            out[0] = 0.0;
            out[1] = s1 * (1.0 - th * th);
        };
        // C^3_b norm of tanh: sup|tanh| + sup|tanh'| + sup|tanh''| + sup|tanh'''|
        //                   = 1 + 1 + 4/(3 sqrt(3)) + 2.
        const double tanh_c3 = 1.0 + 1.0 + 4.0 / (3.0 * std::sqrt(3.0)) + 2.0;
        field.c3_bound = std::max(std::abs(b0) + std::abs(b1) * tanh_c3,
                                  std::abs(s0) + std::abs(s1) * tanh_c3);
        const double smin = s0 - std::abs(s1);
        field.det_floor = std::min(1e-8, 0.5 * smin * smin);
        return field;
    }
    throw std::invalid_argument("unknown lv field family '" + spec.family + "'");
}

std::pair<LvFieldSpec, double> perturb_lv(const LvFieldSpec& spec, double delta,
                                          const std::string& which) {
    LvFieldSpec out = spec;
    // C^2_b norm of tanh: sup|tanh| + sup|tanh'| + sup|tanh''|.
    const double tanh_c2 = 1.0 + 1.0 + 4.0 / (3.0 * std::sqrt(3.0));
    if (spec.family == "lv.const") {
        if (which == "drift") {
            out.params["b"] += delta;
            return {out, 1.0};
        }
        if (which == "vol") {
            out.params["sigma"] += delta;
            return {out, 1.0};
        }
    } else if (spec.family == "lv.tanh") {
        if (which == "drift") {
            out.params["b1"] += delta;
            return {out, tanh_c2};
        }
        if (which == "vol") {
            out.params["s1"] += delta;
            return {out, tanh_c2};
        }
    }
    throw std::invalid_argument("perturb_lv: unknown direction '" + which + "'");
}

} // namespace roughfolio
