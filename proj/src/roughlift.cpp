#include "roughfolio/roughlift.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roughfolio {

RoughPath::RoughPath(SampledPath base, std::vector<double> iterated)
    : base_(std::move(base)), iterated_(std::move(iterated)) {
    const std::size_t dd = base_.dim() * base_.dim();
    if (iterated_.size() != base_.size() * dd)
        throw std::invalid_argument("RoughPath: iterated integral size mismatch");
    for (std::size_t k = 0; k < dd; ++k)
        if (iterated_[k] != 0.0)
            throw std::invalid_argument("RoughPath: I_0 must vanish");
}

RoughPath RoughPath::rie_lift(SampledPath path) {
    const std::size_t n = path.size();
    const std::size_t d = path.dim();
    std::vector<double> iterated(n * d * d, 0.0);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const auto x = path.at(j);
        const auto y = path.at(j + 1);
        const double* prev = iterated.data() + j * d * d;
        double* next = iterated.data() + (j + 1) * d * d;
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                next[a * d + b] = prev[a * d + b] + x[a] * (y[b] - x[b]);
    }
    return RoughPath(std::move(path), std::move(iterated));
}

RoughPath RoughPath::from_parts(SampledPath base, std::vector<double> iterated) {
    return RoughPath(std::move(base), std::move(iterated));
}

void RoughPath::second_level(std::size_t s, std::size_t t, std::span<double> out) const {
    const std::size_t d = base_.dim();
    const auto is = iterated_at(s);
    const auto it = iterated_at(t);
    const auto xs = base_.at(s);
    const auto xt = base_.at(t);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
            out[a * d + b] = it[a * d + b] - is[a * d + b] - xs[a] * (xt[b] - xs[b]);
}

double RoughPath::second_level_norm(std::size_t s, std::size_t t) const {
    const std::size_t d = base_.dim();
    double acc = 0.0;
    const auto is = iterated_at(s);
    const auto it = iterated_at(t);
    const auto xs = base_.at(s);
    const auto xt = base_.at(t);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
            const double v = it[a * d + b] - is[a * d + b] - xs[a] * (xt[b] - xs[b]);
            acc += v * v;
        }
    return std::sqrt(acc);
}

SampledPath RoughPath::bracket() const {
    const std::size_t n = base_.size();
    const std::size_t d = base_.dim();
    std::vector<double> values(n * d * d, 0.0);
    std::vector<double> xx(d * d);
    const auto x0 = base_.at(0);
    for (std::size_t j = 0; j < n; ++j) {
        second_level(0, j, xx);
        const auto xj = base_.at(j);
        double* out = values.data() + j * d * d;
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                out[a * d + b] = (xj[a] - x0[a]) * (xj[b] - x0[b]) - (xx[a * d + b] + xx[b * d + a]);
    }
    return SampledPath(base_.times(), std::move(values), d * d);
}

TimeAugmentedRoughPath time_augment(const RoughPath& rp) {
    const std::size_t n = rp.size();
    const std::size_t d = rp.dim();
    const std::size_t e = d + 1;
    const auto& times = rp.base().times();

    std::vector<double> values(n * e);
    for (std::size_t j = 0; j < n; ++j) {
        values[j * e] = times[j];
        const auto x = rp.base().at(j);
        for (std::size_t k = 0; k < d; ++k) values[j * e + 1 + k] = x[k];
    }
    SampledPath base(times, std::move(values), e);

    // Time-cross blocks accumulate by left-point sums; the (W,W) block is
    // carried over from the underlying lift unchanged.
    std::vector<double> iterated(n * e * e, 0.0);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double t0 = times[j];
        const double dt = times[j + 1] - times[j];
        const auto x = rp.base().at(j);
        const auto y = rp.base().at(j + 1);
        const double* prev = iterated.data() + j * e * e;
        double* next = iterated.data() + (j + 1) * e * e;
        next[0] = prev[0] + t0 * dt;
        for (std::size_t k = 0; k < d; ++k) {
            next[0 * e + 1 + k] = prev[0 * e + 1 + k] + t0 * (y[k] - x[k]);
            next[(1 + k) * e + 0] = prev[(1 + k) * e + 0] + x[k] * dt;
        }
        const auto iw = rp.iterated_at(j + 1);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                next[(1 + a) * e + (1 + b)] = iw[a * d + b];
    }
    return RoughPath::from_parts(std::move(base), std::move(iterated));
}

double rough_norm(const RoughPath& rp, double p, std::optional<std::vector<std::size_t>> anchors) {
    std::vector<std::size_t> a =
        anchors ? std::move(*anchors) : default_anchors(rp.size(), kTwoParamCap);
    const double first = p_variation(rp.base(), p, a);
    const double second = two_param_p_variation(
        [&](std::size_t s, std::size_t t) { return rp.second_level_norm(s, t); }, p / 2.0, a);
    return first + second;
}

double rough_distance(const RoughPath& rp, const RoughPath& rq, double p,
                      std::optional<std::vector<std::size_t>> anchors) {
    if (rp.dim() != rq.dim()) throw std::invalid_argument("rough_distance: dimension mismatch");
    if (!rp.base().same_grid(rq.base()))
        throw std::invalid_argument("rough_distance: grid mismatch");
    std::vector<std::size_t> a =
        anchors ? std::move(*anchors) : default_anchors(rp.size(), kTwoParamCap);

    const std::size_t d = rp.dim();
    std::vector<double> values(rp.size() * d);
    for (std::size_t j = 0; j < rp.size(); ++j) {
        const auto x = rp.base().at(j);
        const auto y = rq.base().at(j);
        for (std::size_t k = 0; k < d; ++k) values[j * d + k] = x[k] - y[k];
    }
    SampledPath diff(rp.base().times(), std::move(values), d);
    const double first = p_variation(diff, p, a);

    std::vector<double> xp(d * d), xq(d * d);
    const double second = two_param_p_variation(
        [&](std::size_t s, std::size_t t) {
            rp.second_level(s, t, xp);
            rq.second_level(s, t, xq);
            double acc = 0.0;
            for (std::size_t k = 0; k < d * d; ++k) {
                const double v = xp[k] - xq[k];
                acc += v * v;
            }
            return std::sqrt(acc);
        },
        p / 2.0, a);
    return first + second;
}

double riemann_lift_sup_error(const RoughPath& lift, const PartitionScheme& scheme,
                              std::size_t n) {
    const SampledPath& path = lift.base();
    const std::size_t d = path.dim();
    const std::size_t dd = d * d;
    const auto idx = scheme.indices(path.times(), n);
    std::vector<double> sum(dd, 0.0);
    double worst = 0.0;
    std::size_t cell = 0;
    for (std::size_t j = 1; j < path.size(); ++j) {
        if (idx[cell + 1] < j) ++cell;
        const auto xk = path.at(idx[cell]);
        const auto xprev = path.at(j - 1);
        const auto xj = path.at(j);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) sum[a * d + b] += xk[a] * (xj[b] - xprev[b]);
        const auto ij = lift.iterated_at(j);
        double acc = 0.0;
        for (std::size_t k = 0; k < dd; ++k) {
            const double v = sum[k] - ij[k];
            acc += v * v;
        }
        worst = std::max(worst, std::sqrt(acc));
    }
    return worst;
}

RieReport rie_diagnostic(const SampledPath& path, const PartitionScheme& scheme,
                         std::span<const std::size_t> ns, double p) {
    const RoughPath lift = RoughPath::rie_lift(path);
    const std::size_t d = path.dim();
    const std::size_t dd = d * d;
    RieReport report;
    report.p = p;

    for (std::size_t n : ns) {
        const auto idx = scheme.indices(path.times(), n);
        RieLevelStat stat;
        stat.level = n;

        // Part (ii): left-point Riemann sums along P^n against the lift.
        stat.part2_sup_err = riemann_lift_sup_error(lift, scheme, n);

        // Part (iii): defects of the compensated sums between partition
        // points, normalized by the elapsed-time control w(s,t) = t - s.
        {
            const std::size_t m = idx.size();
            // cumulative left-point sums along P^n at partition points
            std::vector<double> cum(m * dd, 0.0);
            for (std::size_t k = 0; k + 1 < m; ++k) {
                const auto xk = path.at(idx[k]);
                const auto xk1 = path.at(idx[k + 1]);
                const double* prev = cum.data() + k * dd;
                double* next = cum.data() + (k + 1) * dd;
                for (std::size_t a = 0; a < d; ++a)
                    for (std::size_t b = 0; b < d; ++b)
                        next[a * d + b] = prev[a * d + b] + xk[a] * (xk1[b] - xk[b]);
            }
            const auto pair_anchors = default_anchors(m, 2048);
            for (std::size_t ki = 0; ki < pair_anchors.size(); ++ki) {
                for (std::size_t li = ki + 1; li < pair_anchors.size(); ++li) {
                    const std::size_t k = pair_anchors[ki];
                    const std::size_t l = pair_anchors[li];
                    const auto xk = path.at(idx[k]);
                    const auto xl = path.at(idx[l]);
                    const double* ck = cum.data() + k * dd;
                    const double* cl = cum.data() + l * dd;
                    double acc = 0.0;
                    for (std::size_t a = 0; a < d; ++a)
                        for (std::size_t b = 0; b < d; ++b) {
                            const double v =
                                cl[a * d + b] - ck[a * d + b] - xk[a] * (xl[b] - xk[b]);
                            acc += v * v;
                        }
                    const double dt = path.time(idx[l]) - path.time(idx[k]);
                    const double defect = std::pow(std::sqrt(acc), p / 2.0) / dt;
                    stat.part3_sup_stat = std::max(stat.part3_sup_stat, defect);
                }
            }
        }
        report.levels.push_back(stat);
    }

    if (report.levels.size() >= 3) {
        const auto& L = report.levels;
        const std::size_t m = L.size();
        report.part3_increasing = L[m - 1].part3_sup_stat > L[m - 2].part3_sup_stat &&
                                  L[m - 2].part3_sup_stat > L[m - 3].part3_sup_stat;
    }
    return report;
}

} // namespace roughfolio
