#include "roughfolio/rde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roughfolio {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void check_state(std::span<const double> state, std::size_t step) {
    for (double v : state) {
        if (!std::isfinite(v))
            throw std::runtime_error("euler_solve: non-finite state at step " +
                                     std::to_string(step));
        if (std::abs(v) > kStateGuard)
            throw std::runtime_error("euler_solve: state guard exceeded at step " +
                                     std::to_string(step));
    }
}

/// Euler states at the partition points of P^n.
std::vector<double> euler_states(const CoefficientField& field, std::span<const double> s0,
                                 const SampledPath& noise, const std::vector<std::size_t>& idx) {
    const std::size_t m = field.m, d = field.d;
    require(noise.dim() == d, "euler_solve: noise dimension mismatch");
    require(s0.size() == m, "euler_solve: initial state dimension mismatch");
    const std::size_t cells = idx.size() - 1;
    std::vector<double> states((cells + 1) * m);
    std::copy(s0.begin(), s0.end(), states.begin());
    std::vector<double> b(m), sig(m * d);
    for (std::size_t k = 0; k < cells; ++k) {
        const double t0 = noise.time(idx[k]);
        const double dt = noise.time(idx[k + 1]) - t0;
        const auto w0 = noise.at(idx[k]);
        const auto w1 = noise.at(idx[k + 1]);
        const double* cur = states.data() + k * m;
        double* next = states.data() + (k + 1) * m;
        field.drift(t0, {cur, m}, b);
        field.vol(t0, {cur, m}, sig);
        for (std::size_t i = 0; i < m; ++i) {
            double v = cur[i] + b[i] * dt;
            for (std::size_t j = 0; j < d; ++j) v += sig[i * d + j] * (w1[j] - w0[j]);
            next[i] = v;
        }
        check_state({next, m}, k + 1);
    }
    return states;
}

} // namespace

SampledPath euler_solve(const CoefficientField& field, std::span<const double> s0,
                        const SampledPath& noise, const PartitionScheme& scheme, std::size_t n) {
    const auto idx = scheme.indices(noise.times(), n);
    const auto states = euler_states(field, s0, noise, idx);
    const std::size_t m = field.m;
    const std::size_t npts = noise.size();
    std::vector<double> values(npts * m);
    std::size_t cell = 0;
    for (std::size_t j = 0; j + 1 < npts; ++j) {
        while (cell + 1 < idx.size() - 1 && idx[cell + 1] <= j) ++cell;
        for (std::size_t i = 0; i < m; ++i) values[j * m + i] = states[cell * m + i];
    }
    for (std::size_t i = 0; i < m; ++i)
        values[(npts - 1) * m + i] = states[(idx.size() - 1) * m + i];
    return SampledPath(noise.times(), std::move(values), m);
}

ComposedCoefficients field_along(const CoefficientField& field, const ControlledPath& s) {
    const std::size_t m = field.m, d = field.d;
    require(s.codim() == m, "field_along: state codimension mismatch");
    require(s.ref_dim() == 1 + d, "field_along: reference must be time-augmented");
    const std::size_t n = s.size();
    const std::size_t e = 1 + d;

    std::vector<double> bval(n * m), bder(n * m * e);
    std::vector<double> sval(n * m * d), sder(n * m * d * e);
    std::vector<double> jb(m * (1 + m)), js(m * d * (1 + m));
    std::vector<double> btmp(m), stmp(m * d);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = s.reference().base().time(i);
        const auto x = s.value_at(i);
        field.drift(t, x, btmp);
        field.vol(t, x, stmp);
        field.drift_jacobian(t, x, jb);
        field.vol_jacobian(t, x, js);
        for (std::size_t c = 0; c < m; ++c) bval[i * m + c] = btmp[c];
        for (std::size_t c = 0; c < m * d; ++c) sval[i * m * d + c] = stmp[c];
        // chain rule: (f(.,S))'_j = d_t f * gamma'_j + D_x f * S'_j, gamma' = e_0
        for (std::size_t c = 0; c < m; ++c)
            for (std::size_t j = 0; j < e; ++j) {
                double v = (j == 0) ? jb[c * (1 + m)] : 0.0;
                for (std::size_t a = 0; a < m; ++a)
                    v += jb[c * (1 + m) + 1 + a] * s.deriv(i, a, j);
                bder[(i * m + c) * e + j] = v;
            }
        for (std::size_t c = 0; c < m * d; ++c)
            for (std::size_t j = 0; j < e; ++j) {
                double v = (j == 0) ? js[c * (1 + m)] : 0.0;
                for (std::size_t a = 0; a < m; ++a)
                    v += js[c * (1 + m) + 1 + a] * s.deriv(i, a, j);
                sder[(i * m * d + c) * e + j] = v;
            }
    }
    return {ControlledPath(s.reference_ptr(), std::move(bval), std::move(bder), m),
            ControlledPath(s.reference_ptr(), std::move(sval), std::move(sder), m * d)};
}

RdeSolution rde_solve(const CoefficientField& field, std::span<const double> s0,
                      std::shared_ptr<const TimeAugmentedRoughPath> lift) {
    const std::size_t m = field.m, d = field.d;
    require(lift->dim() == 1 + d, "rde_solve: lift must be time-augmented over the noise");
    const std::size_t n = lift->size();
    const std::size_t e = 1 + d;

    // Euler on the master grid itself; increments read off the augmented base.
    std::vector<double> values(n * m);
    std::copy(s0.begin(), s0.end(), values.begin());
    std::vector<double> b(m), sig(m * d);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const auto x0 = lift->base().at(j);
        const auto x1 = lift->base().at(j + 1);
        const double* cur = values.data() + j * m;
        double* next = values.data() + (j + 1) * m;
        field.drift(x0[0], {cur, m}, b);
        field.vol(x0[0], {cur, m}, sig);
        const double dt = x1[0] - x0[0];
        for (std::size_t i = 0; i < m; ++i) {
            double v = cur[i] + b[i] * dt;
            for (std::size_t k = 0; k < d; ++k) v += sig[i * d + k] * (x1[1 + k] - x0[1 + k]);
            next[i] = v;
        }
        check_state({next, m}, j + 1);
    }

    // S' = (b,sigma)(., S), an m x (1+d) matrix per point.
    std::vector<double> derivs(n * m * e);
    for (std::size_t j = 0; j < n; ++j) {
        const auto x = lift->base().at(j);
        const double* cur = values.data() + j * m;
        field.drift(x[0], {cur, m}, b);
        field.vol(x[0], {cur, m}, sig);
        for (std::size_t i = 0; i < m; ++i) {
            derivs[(j * m + i) * e] = b[i];
            for (std::size_t k = 0; k < d; ++k) derivs[(j * m + i) * e + 1 + k] = sig[i * d + k];
        }
    }
    ControlledPath S(lift, std::move(values), std::move(derivs), m);

    // Self-consistency: S - s0 - int (b,sigma)(.,S) d(.,W).
    const auto composed = field_along(field, S);
    std::vector<ControlledPath> rows;
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<ControlledPath> comps;
        comps.push_back(composed.drift.component(i));
        for (std::size_t k = 0; k < d; ++k) comps.push_back(composed.vol.component(i * d + k));
        rows.push_back(from_components(comps));
    }
    double residual = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const ControlledPath zi = rough_integral_vs_reference(rows[i]);
        for (std::size_t j = 0; j < n; ++j)
            residual = std::max(residual, std::abs(S.value(j, i) - s0[i] - zi.value(j)));
    }
    return {std::move(S), residual};
}

double euler_refinement_error(const CoefficientField& field, std::span<const double> s0,
                              const SampledPath& coarse_noise, const SampledPath& fine_noise) {
    const std::size_t nc = coarse_noise.size() - 1;
    const std::size_t nf = fine_noise.size() - 1;
    require(nf % nc == 0, "euler_refinement_error: grids not nested");
    const std::size_t stride = nf / nc;

    std::vector<std::size_t> full_c(nc + 1), full_f(nf + 1);
    for (std::size_t i = 0; i <= nc; ++i) full_c[i] = i;
    for (std::size_t i = 0; i <= nf; ++i) full_f[i] = i;
    const auto ec = euler_states(field, s0, coarse_noise, full_c);
    const auto ef = euler_states(field, s0, fine_noise, full_f);

    const std::size_t m = field.m;
    double worst = 0.0;
    for (std::size_t k = 0; k <= nc; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double diff = ec[k * m + i] - ef[k * stride * m + i];
            acc += diff * diff;
        }
        worst = std::max(worst, std::sqrt(acc));
    }
    return worst;
}

RoughExponential rough_exponential(const ControlledPath& z,
                                   std::shared_ptr<const RoughPath> z_lift,
                                   std::span<const std::size_t> jump_indices,
                                   const std::optional<SampledPath>& gamma_override) {
    require(z.codim() == 1, "rough_exponential: Z must be scalar");
    require(std::abs(z.value(0)) == 0.0, "rough_exponential: Z_0 must vanish");
    require(z_lift->dim() == 1 && z_lift->size() == z.size(),
            "rough_exponential: lift mismatch");
    const std::size_t n = z.size();

    std::vector<double> bracket(n);
    if (gamma_override) {
        require(gamma_override->dim() == 1 && gamma_override->size() == n,
                "rough_exponential: bracket override mismatch");
        for (std::size_t i = 0; i < n; ++i) bracket[i] = gamma_override->value(i);
    } else {
        const SampledPath br = z_lift->bracket();
        for (std::size_t i = 0; i < n; ++i) bracket[i] = br.value(i);
    }

    std::vector<bool> is_jump(n, false);
    for (std::size_t s : jump_indices) {
        require(s > 0 && s < n, "rough_exponential: jump index out of range");
        is_jump[s] = true;
    }

    // The bracket jump must equal the squared path jump at declared jump
    // times; checked rather than assumed (skipped when the bracket is
    // supplied externally).
    if (!gamma_override) {
        for (std::size_t s : jump_indices) {
            const double dz = z_lift->base().value(s) - z_lift->base().value(s - 1);
            const double dbr = bracket[s] - bracket[s - 1];
            if (std::abs(dbr - dz * dz) > 1e-9 * std::max(1.0, dz * dz))
                throw std::runtime_error(
                    "rough_exponential: bracket jump differs from squared path jump at index " +
                    std::to_string(s));
        }
    }

    bool all_positive = true;
    bool hit_zero = false;
    for (std::size_t s = 1; s < n; ++s) {
        if (!is_jump[s]) continue;
        const double factor = 1.0 + (z.value(s) - z.value(s - 1));
        if (factor <= 0.0) {
            all_positive = false;
            if (factor == 0.0) hit_zero = true;
        }
    }

    std::vector<double> values(n), derivs(n * z.ref_dim());
    double log_prod = 0.0;   // log of the jump product (all-positive mode)
    double direct_prod = 1.0;
    double gamma_sq = 0.0;   // running sum of squared jumps
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && is_jump[i]) {
            const double dz = z.value(i) - z.value(i - 1);
            gamma_sq += dz * dz;
            if (all_positive)
                log_prod += std::log1p(dz) - dz;
            else
                direct_prod *= (1.0 + dz) * std::exp(-dz);
        }
        const double gamma = bracket[i] - gamma_sq;
        const double cont = z.value(i) - 0.5 * gamma;
        const double v = all_positive ? std::exp(cont + log_prod) : std::exp(cont) * direct_prod;
        values[i] = v;
        for (std::size_t j = 0; j < z.ref_dim(); ++j)
            derivs[i * z.ref_dim() + j] = v * z.deriv(i, 0, j);
        if (values[i] == 0.0) hit_zero = true;
    }
    ControlledPath V(z.reference_ptr(), std::move(values), std::move(derivs), 1);

    // Residual of V = 1 + int V dZ against the supplied lift.
    std::vector<double> v_vals(n), v_ders(n);
    for (std::size_t i = 0; i < n; ++i) v_vals[i] = v_ders[i] = V.value(i);
    ControlledPath v_on_z(z_lift, std::move(v_vals), std::move(v_ders), 1);
    const ControlledPath integral = rough_integral_vs_reference(v_on_z);
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        residual = std::max(residual, std::abs(V.value(i) - 1.0 - integral.value(i)));

    return {std::move(V), residual, hit_zero};
}

LinearRdeSolution linear_rde_solve(const ControlledPath& b, const ControlledPath& sigma_row,
                                   double s0,
                                   std::shared_ptr<const TimeAugmentedRoughPath> lift) {
    require(s0 > 0.0, "linear_rde_solve: initial price must be positive");
    require(b.codim() == 1, "linear_rde_solve: drift coefficient must be scalar");
    const std::size_t d = lift->dim() - 1;
    require(sigma_row.codim() == d, "linear_rde_solve: vol row dimension mismatch");
    const std::size_t n = lift->size();

    std::vector<ControlledPath> comps;
    comps.push_back(b);
    for (std::size_t k = 0; k < d; ++k) comps.push_back(sigma_row.component(k));
    const ControlledPath integrand = from_components(comps);
    ControlledPath xi = rough_integral_vs_reference(integrand);

    // Young bracket of Xi from the known decomposition: int |sigma|^2 dt.
    std::vector<double> gamma(n, 0.0);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        double s2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) s2 += sigma_row.value(j, k) * sigma_row.value(j, k);
        gamma[j + 1] = gamma[j] + s2 * (lift->base().time(j + 1) - lift->base().time(j));
    }
    SampledPath gamma_path = SampledPath::scalar(lift->base().times(), std::move(gamma));
    const double gamma_T = gamma_path.value(n - 1);

    auto xi_lift = std::make_shared<const RoughPath>(canonical_lift(xi));
    RoughExponential exp_part = rough_exponential(xi, xi_lift, {}, gamma_path);
    ControlledPath price = scale(exp_part.path, s0);
    return {std::move(price), std::move(xi), gamma_T};
}

} // namespace roughfolio
