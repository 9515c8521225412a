#include "roughfolio/controlled.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roughfolio {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_shared_reference(const ControlledPath& f, const ControlledPath& g,
                              const char* where) {
    require(f.reference_ptr().get() == g.reference_ptr().get(),
            std::string(where) + ": operands must share the reference rough path");
}

double euclid(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

double euclid_diff(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace

ControlledPath::ControlledPath(std::shared_ptr<const RoughPath> reference,
                               std::vector<double> values, std::vector<double> derivs,
                               std::size_t codim)
    : ref_(std::move(reference)), values_(std::move(values)), derivs_(std::move(derivs)),
      codim_(codim) {
    require(ref_ != nullptr, "ControlledPath: null reference");
    require(codim_ >= 1, "ControlledPath: codimension must be >= 1");
    require(values_.size() == ref_->size() * codim_, "ControlledPath: value size mismatch");
    require(derivs_.size() == ref_->size() * codim_ * ref_->dim(),
            "ControlledPath: derivative size mismatch");
    for (double v : values_) require(std::isfinite(v), "ControlledPath: non-finite value");
    for (double v : derivs_) require(std::isfinite(v), "ControlledPath: non-finite derivative");
}

ControlledPath ControlledPath::identity(std::shared_ptr<const RoughPath> reference) {
    const std::size_t n = reference->size();
    const std::size_t d = reference->dim();
    std::vector<double> values(reference->base().raw_values());
    std::vector<double> derivs(n * d * d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) derivs[(i * d + k) * d + k] = 1.0;
    return ControlledPath(std::move(reference), std::move(values), std::move(derivs), d);
}

ControlledPath ControlledPath::constant(std::shared_ptr<const RoughPath> reference,
                                        std::span<const double> value) {
    const std::size_t n = reference->size();
    const std::size_t d = reference->dim();
    const std::size_t m = value.size();
    std::vector<double> values(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) values[i * m + k] = value[k];
    std::vector<double> derivs(n * m * d, 0.0);
    return ControlledPath(std::move(reference), std::move(values), std::move(derivs), m);
}

ControlledPath ControlledPath::finite_variation(std::shared_ptr<const RoughPath> reference,
                                                const SampledPath& values) {
    require(values.same_grid(reference->base()), "finite_variation: grid mismatch");
    std::vector<double> derivs(reference->size() * values.dim() * reference->dim(), 0.0);
    return ControlledPath(std::move(reference), values.raw_values(), std::move(derivs),
                          values.dim());
}

void ControlledPath::remainder(std::size_t s, std::size_t t, std::span<double> out) const {
    const std::size_t d = ref_->dim();
    const auto xs = ref_->base().at(s);
    const auto xt = ref_->base().at(t);
    for (std::size_t c = 0; c < codim_; ++c) {
        double r = values_[t * codim_ + c] - values_[s * codim_ + c];
        const double* dc = derivs_.data() + (s * codim_ + c) * d;
        for (std::size_t j = 0; j < d; ++j) r -= dc[j] * (xt[j] - xs[j]);
        out[c] = r;
    }
}

double ControlledPath::remainder_norm(std::size_t s, std::size_t t) const {
    const std::size_t d = ref_->dim();
    const auto xs = ref_->base().at(s);
    const auto xt = ref_->base().at(t);
    double acc = 0.0;
    for (std::size_t c = 0; c < codim_; ++c) {
        double r = values_[t * codim_ + c] - values_[s * codim_ + c];
        const double* dc = derivs_.data() + (s * codim_ + c) * d;
        for (std::size_t j = 0; j < d; ++j) r -= dc[j] * (xt[j] - xs[j]);
        acc += r * r;
    }
    return std::sqrt(acc);
}

ControlledPath ControlledPath::component(std::size_t comp) const {
    require(comp < codim_, "component: index out of range");
    const std::size_t n = ref_->size();
    const std::size_t d = ref_->dim();
    std::vector<double> values(n), derivs(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        values[i] = values_[i * codim_ + comp];
        for (std::size_t j = 0; j < d; ++j)
            derivs[i * d + j] = derivs_[(i * codim_ + comp) * d + j];
    }
    return ControlledPath(ref_, std::move(values), std::move(derivs), 1);
}

SampledPath ControlledPath::value_path() const {
    return SampledPath(ref_->base().times(), values_, codim_);
}

SampledPath ControlledPath::derivative_path() const {
    return SampledPath(ref_->base().times(), derivs_, codim_ * ref_->dim());
}

// ---------------------------------------------------------------------------

double controlled_norm(const ControlledPath& cp, double p,
                       std::optional<std::vector<std::size_t>> anchors) {
    std::vector<std::size_t> a =
        anchors ? std::move(*anchors) : default_anchors(cp.size(), kTwoParamCap);
    const double y0 = euclid(cp.value_at(a.front()));
    const double yp0 = euclid(cp.deriv_at(a.front()));
    const double dvar = variation_sup(
        a, [&](std::size_t i, std::size_t j) { return euclid_diff(cp.deriv_at(j), cp.deriv_at(i)); },
        p);
    const double rvar = variation_sup(
        a, [&](std::size_t i, std::size_t j) { return cp.remainder_norm(i, j); }, p / 2.0);
    return y0 + yp0 + dvar + rvar;
}

double controlled_distance(const ControlledPath& cp, const ControlledPath& cq, double p,
                           std::optional<std::vector<std::size_t>> anchors) {
    require(cp.codim() == cq.codim(), "controlled_distance: codimension mismatch");
    require(cp.ref_dim() == cq.ref_dim(), "controlled_distance: reference dimension mismatch");
    require(cp.reference().base().same_grid(cq.reference().base()),
            "controlled_distance: grid mismatch");
    std::vector<std::size_t> a =
        anchors ? std::move(*anchors) : default_anchors(cp.size(), kTwoParamCap);
    const double y0 = euclid_diff(cp.value_at(a.front()), cq.value_at(a.front()));
    const double yp0 = euclid_diff(cp.deriv_at(a.front()), cq.deriv_at(a.front()));
    const double dvar = variation_sup(
        a,
        [&](std::size_t i, std::size_t j) {
            double s = 0.0;
            const auto pi = cp.deriv_at(i), pj = cp.deriv_at(j);
            const auto qi = cq.deriv_at(i), qj = cq.deriv_at(j);
            for (std::size_t k = 0; k < pi.size(); ++k) {
                const double d = (pj[k] - pi[k]) - (qj[k] - qi[k]);
                s += d * d;
            }
            return std::sqrt(s);
        },
        p);
    const std::size_t m = cp.codim();
    std::vector<double> rp(m), rq(m);
    const double rvar = variation_sup(
        a,
        [&](std::size_t i, std::size_t j) {
            cp.remainder(i, j, rp);
            cq.remainder(i, j, rq);
            double s = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                const double d = rp[k] - rq[k];
                s += d * d;
            }
            return std::sqrt(s);
        },
        p / 2.0);
    return y0 + yp0 + dvar + rvar;
}

// ---------------------------------------------------------------------------

ControlledPath add(const ControlledPath& f, const ControlledPath& g) {
    require_shared_reference(f, g, "add");
    require(f.codim() == g.codim(), "add: codimension mismatch");
    const std::size_t n = f.size(), m = f.codim(), d = f.ref_dim();
    std::vector<double> values(n * m), derivs(n * m * d);
    for (std::size_t i = 0; i < n * m; ++i)
        values[i] = f.value(i / m, i % m) + g.value(i / m, i % m);
    const auto& fd = f.derivative_path().raw_values();
    const auto& gd = g.derivative_path().raw_values();
    for (std::size_t i = 0; i < n * m * d; ++i) derivs[i] = fd[i] + gd[i];
    return ControlledPath(f.reference_ptr(), std::move(values), std::move(derivs), m);
}

ControlledPath subtract(const ControlledPath& f, const ControlledPath& g) {
    return add(f, scale(g, -1.0));
}

ControlledPath scale(const ControlledPath& f, double a) {
    const std::size_t n = f.size(), m = f.codim(), d = f.ref_dim();
    std::vector<double> values(n * m), derivs(n * m * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < m; ++c) values[i * m + c] = a * f.value(i, c);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < m; ++c)
            for (std::size_t j = 0; j < d; ++j)
                derivs[(i * m + c) * d + j] = a * f.deriv(i, c, j);
    return ControlledPath(f.reference_ptr(), std::move(values), std::move(derivs), m);
}

ControlledPath shift(const ControlledPath& f, double a) {
    const std::size_t n = f.size(), m = f.codim(), d = f.ref_dim();
    std::vector<double> values(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < m; ++c) values[i * m + c] = f.value(i, c) + a;
    std::vector<double> derivs(f.derivative_path().raw_values());
    (void)d;
    return ControlledPath(f.reference_ptr(), std::move(values), std::move(derivs), m);
}

ControlledPath product(const ControlledPath& f, const ControlledPath& g) {
    require_shared_reference(f, g, "product");
    if (f.codim() != 1 && g.codim() == 1) return product(g, f);
    require(f.codim() == 1 || f.codim() == g.codim(), "product: incompatible codimensions");
    const std::size_t n = f.size(), m = g.codim(), d = f.ref_dim();
    const bool fscalar = f.codim() == 1;
    std::vector<double> values(n * m), derivs(n * m * d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < m; ++c) {
            const double fv = fscalar ? f.value(i) : f.value(i, c);
            const double gv = g.value(i, c);
            values[i * m + c] = fv * gv;
            for (std::size_t j = 0; j < d; ++j) {
                const double fp = fscalar ? f.deriv(i, 0, j) : f.deriv(i, c, j);
                derivs[(i * m + c) * d + j] = fp * gv + fv * g.deriv(i, c, j);
            }
        }
    }
    return ControlledPath(f.reference_ptr(), std::move(values), std::move(derivs), m);
}

ControlledPath dot(const ControlledPath& f, const ControlledPath& g) {
    require_shared_reference(f, g, "dot");
    require(f.codim() == g.codim(), "dot: codimension mismatch");
    const std::size_t n = f.size(), m = f.codim(), d = f.ref_dim();
    std::vector<double> values(n, 0.0), derivs(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (std::size_t e = 0; e < m; ++e) v += f.value(i, e) * g.value(i, e);
        values[i] = v;
        for (std::size_t j = 0; j < d; ++j) {
            double dv = 0.0;
            for (std::size_t e = 0; e < m; ++e)
                dv += f.deriv(i, e, j) * g.value(i, e) + f.value(i, e) * g.deriv(i, e, j);
            derivs[i * d + j] = dv;
        }
    }
    return ControlledPath(f.reference_ptr(), std::move(values), std::move(derivs), 1);
}

ControlledPath matmul(const ControlledPath& f, std::size_t rows, std::size_t inner,
                      const ControlledPath& g, std::size_t cols) {
    require_shared_reference(f, g, "matmul");
    require(f.codim() == rows * inner && g.codim() == inner * cols,
            "matmul: shape mismatch");
    const std::size_t n = f.size(), d = f.ref_dim(), m = rows * cols;
    std::vector<double> values(n * m, 0.0), derivs(n * m * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                double v = 0.0;
                for (std::size_t e = 0; e < inner; ++e)
                    v += f.value(i, r * inner + e) * g.value(i, e * cols + c);
                values[i * m + r * cols + c] = v;
                for (std::size_t j = 0; j < d; ++j) {
                    double dv = 0.0;
                    for (std::size_t e = 0; e < inner; ++e)
                        dv += f.deriv(i, r * inner + e, j) * g.value(i, e * cols + c) +
                              f.value(i, r * inner + e) * g.deriv(i, e * cols + c, j);
                    derivs[(i * m + r * cols + c) * d + j] = dv;
                }
            }
    }
    return ControlledPath(f.reference_ptr(), std::move(values), std::move(derivs), m);
}

ControlledPath transpose(const ControlledPath& f, std::size_t rows, std::size_t cols) {
    require(f.codim() == rows * cols, "transpose: shape mismatch");
    const std::size_t n = f.size(), d = f.ref_dim(), m = rows * cols;
    std::vector<double> values(n * m), derivs(n * m * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                values[i * m + c * rows + r] = f.value(i, r * cols + c);
                for (std::size_t j = 0; j < d; ++j)
                    derivs[(i * m + c * rows + r) * d + j] = f.deriv(i, r * cols + c, j);
            }
    return ControlledPath(f.reference_ptr(), std::move(values), std::move(derivs), m);
}

ControlledPath from_components(const std::vector<ControlledPath>& comps) {
    require(!comps.empty(), "from_components: empty");
    const std::size_t n = comps[0].size(), d = comps[0].ref_dim(), m = comps.size();
    for (const auto& c : comps) {
        require_shared_reference(comps[0], c, "from_components");
        require(c.codim() == 1, "from_components: components must be scalar");
    }
    std::vector<double> values(n * m), derivs(n * m * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < m; ++c) {
            values[i * m + c] = comps[c].value(i);
            for (std::size_t j = 0; j < d; ++j)
                derivs[(i * m + c) * d + j] = comps[c].deriv(i, 0, j);
        }
    return ControlledPath(comps[0].reference_ptr(), std::move(values), std::move(derivs), m);
}

namespace {

/// Inverts `a` (m x m, row-major) into `inv`; returns the determinant.
double invert_matrix(std::span<const double> a, std::size_t m, std::span<double> inv) {
    std::vector<double> work(a.begin(), a.end());
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < m; ++c) inv[r * m + c] = (r == c) ? 1.0 : 0.0;
    double det = 1.0;
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::abs(work[r * m + col]) > std::abs(work[pivot * m + col])) pivot = r;
        if (pivot != col) {
            for (std::size_t c = 0; c < m; ++c) {
                std::swap(work[pivot * m + c], work[col * m + c]);
                std::swap(inv[pivot * m + c], inv[col * m + c]);
            }
            det = -det;
        }
        const double p = work[col * m + col];
        det *= p;
        if (p == 0.0) return 0.0;
        const double pinv = 1.0 / p;
        for (std::size_t c = 0; c < m; ++c) {
            work[col * m + c] *= pinv;
            inv[col * m + c] *= pinv;
        }
        for (std::size_t r = 0; r < m; ++r) {
            if (r == col) continue;
            const double factor = work[r * m + col];
            if (factor == 0.0) continue;
            for (std::size_t c = 0; c < m; ++c) {
                work[r * m + c] -= factor * work[col * m + c];
                inv[r * m + c] -= factor * inv[col * m + c];
            }
        }
    }
    return det;
}

} // namespace

ControlledPath matrix_inverse(const ControlledPath& a, std::size_t m, double det_floor) {
    require(a.codim() == m * m, "matrix_inverse: shape mismatch");
    const std::size_t n = a.size(), d = a.ref_dim(), mm = m * m;
    std::vector<double> values(n * mm), derivs(n * mm * d);
    std::vector<double> inv(mm), tmp(mm), tmp2(mm);
    for (std::size_t i = 0; i < n; ++i) {
        const double det = invert_matrix(a.value_at(i), m, inv);
        if (!(std::abs(det) >= det_floor))
            throw std::runtime_error("matrix_inverse: |det| below floor at t=" +
                                     std::to_string(a.reference().base().time(i)) +
                                     " (det=" + std::to_string(det) + ")");
        std::copy(inv.begin(), inv.end(), values.begin() + i * mm);
        for (std::size_t j = 0; j < d; ++j) {
            // dA in direction j
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < m; ++c) tmp[r * m + c] = a.deriv(i, r * m + c, j);
            // -inv * dA * inv
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < m; ++c) {
                    double v = 0.0;
                    for (std::size_t e = 0; e < m; ++e) v += inv[r * m + e] * tmp[e * m + c];
                    tmp2[r * m + c] = v;
                }
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < m; ++c) {
                    double v = 0.0;
                    for (std::size_t e = 0; e < m; ++e) v += tmp2[r * m + e] * inv[e * m + c];
                    derivs[(i * mm + r * m + c) * d + j] = -v;
                }
        }
    }
    return ControlledPath(a.reference_ptr(), std::move(values), std::move(derivs), mm);
}

// ---------------------------------------------------------------------------

SmoothMap SmoothMap::identity(std::size_t n) {
    SmoothMap f;
    f.in_dim = f.out_dim = n;
    f.value = [](std::span<const double> x, std::span<double> y) {
        std::copy(x.begin(), x.end(), y.begin());
    };
    f.deriv = [n](std::span<const double>, std::span<double> J) {
        std::fill(J.begin(), J.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) J[i * n + i] = 1.0;
    };
    f.name = "identity";
    return f;
}

SmoothMap SmoothMap::exp1d() {
    SmoothMap f;
    f.value = [](std::span<const double> x, std::span<double> y) { y[0] = std::exp(x[0]); };
    f.deriv = [](std::span<const double> x, std::span<double> J) { J[0] = std::exp(x[0]); };
    f.name = "exp";
    return f;
}

SmoothMap SmoothMap::square1d() {
    SmoothMap f;
    f.value = [](std::span<const double> x, std::span<double> y) { y[0] = x[0] * x[0]; };
    f.deriv = [](std::span<const double> x, std::span<double> J) { J[0] = 2.0 * x[0]; };
    f.name = "square";
    return f;
}

SmoothMap SmoothMap::reciprocal1d(double floor) {
    SmoothMap f;
    f.value = [](std::span<const double> x, std::span<double> y) { y[0] = 1.0 / x[0]; };
    f.deriv = [](std::span<const double> x, std::span<double> J) { J[0] = -1.0 / (x[0] * x[0]); };
    f.domain_ok = [floor](std::span<const double> x) { return std::abs(x[0]) >= floor; };
    f.name = "reciprocal";
    return f;
}

SmoothMap SmoothMap::affine1d(double a, double b) {
    SmoothMap f;
    f.value = [a, b](std::span<const double> x, std::span<double> y) { y[0] = a * x[0] + b; };
    f.deriv = [a](std::span<const double>, std::span<double> J) { J[0] = a; };
    f.name = "affine";
    return f;
}

ControlledPath compose_smooth(const ControlledPath& cp, const SmoothMap& f) {
    require(f.in_dim == cp.codim(), "compose_smooth: domain dimension mismatch");
    const std::size_t n = cp.size(), d = cp.ref_dim(), k = f.out_dim, m = cp.codim();
    std::vector<double> values(n * k), derivs(n * k * d);
    std::vector<double> y(k), J(k * m);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = cp.value_at(i);
        if (f.domain_ok && !f.domain_ok(x))
            throw std::runtime_error("compose_smooth(" + f.name + "): domain guard at t=" +
                                     std::to_string(cp.reference().base().time(i)));
        f.value(x, y);
        f.deriv(x, J);
        for (std::size_t c = 0; c < k; ++c) values[i * k + c] = y[c];
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t j = 0; j < d; ++j) {
                double v = 0.0;
                for (std::size_t e = 0; e < m; ++e) v += J[c * m + e] * cp.deriv(i, e, j);
                derivs[(i * k + c) * d + j] = v;
            }
    }
    return ControlledPath(cp.reference_ptr(), std::move(values), std::move(derivs), k);
}

// ---------------------------------------------------------------------------

ControlledPath rough_integral(const ControlledPath& f, const ControlledPath& g,
                              std::size_t out_rows) {
    require_shared_reference(f, g, "rough_integral");
    const std::size_t e = g.codim();
    require(f.codim() == out_rows * e, "rough_integral: integrand shape mismatch");
    const std::size_t n = f.size(), d = f.ref_dim(), k = out_rows;
    std::vector<double> values(n * k, 0.0), derivs(n * k * d, 0.0);
    std::vector<double> xx(d * d);
    // compensated sums, reduced in fixed left-to-right order
    std::vector<double> acc(k, 0.0);
    for (std::size_t u = 0; u + 1 < n; ++u) {
        f.reference().second_level(u, u + 1, xx);
        for (std::size_t i = 0; i < k; ++i) {
            double germ = 0.0;
            for (std::size_t c = 0; c < e; ++c)
                germ += f.value(u, i * e + c) * (g.value(u + 1, c) - g.value(u, c));
            double comp = 0.0;
            for (std::size_t c = 0; c < e; ++c)
                for (std::size_t j = 0; j < d; ++j) {
                    const double fp = f.deriv(u, i * e + c, j);
                    if (fp == 0.0) continue;
                    for (std::size_t l = 0; l < d; ++l)
                        comp += fp * g.deriv(u, c, l) * xx[j * d + l];
                }
            acc[i] += germ + comp;
        }
        for (std::size_t i = 0; i < k; ++i) values[(u + 1) * k + i] = acc[i];
    }
    // Z' = F G'
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double v = 0.0;
                for (std::size_t c = 0; c < e; ++c) v += f.value(t, i * e + c) * g.deriv(t, c, j);
                derivs[(t * k + i) * d + j] = v;
            }
    return ControlledPath(f.reference_ptr(), std::move(values), std::move(derivs), k);
}

ControlledPath rough_integral_vs_reference(const ControlledPath& f, std::size_t out_rows) {
    return rough_integral(f, ControlledPath::identity(f.reference_ptr()), out_rows);
}

SampledPath riemann_sum_integral(const ControlledPath& f, const ControlledPath& g,
                                 const PartitionScheme& scheme, std::size_t n) {
    require_shared_reference(f, g, "riemann_sum_integral");
    const std::size_t e = g.codim();
    require(f.codim() % e == 0, "riemann_sum_integral: integrand shape mismatch");
    const std::size_t k = f.codim() / e;
    const auto& times = f.reference().base().times();
    const auto idx = scheme.indices(times, n);
    const std::size_t npts = f.size();
    std::vector<double> values(npts * k, 0.0);
    std::vector<double> acc(k, 0.0);
    std::size_t cell = 0;
    for (std::size_t j = 1; j < npts; ++j) {
        if (idx[cell + 1] < j) ++cell;
        const std::size_t left = idx[cell];
        for (std::size_t i = 0; i < k; ++i) {
            double germ = 0.0;
            for (std::size_t c = 0; c < e; ++c)
                germ += f.value(left, i * e + c) * (g.value(j, c) - g.value(j - 1, c));
            acc[i] += germ;
        }
        for (std::size_t i = 0; i < k; ++i) values[j * k + i] = acc[i];
    }
    return SampledPath(times, std::move(values), k);
}

RoughPath canonical_lift(const ControlledPath& cp) {
    const std::size_t n = cp.size(), e = cp.codim(), d = cp.ref_dim();
    std::vector<double> iterated(n * e * e, 0.0);
    std::vector<double> xx(d * d);
    for (std::size_t u = 0; u + 1 < n; ++u) {
        cp.reference().second_level(u, u + 1, xx);
        const double* prev = iterated.data() + u * e * e;
        double* next = iterated.data() + (u + 1) * e * e;
        for (std::size_t a = 0; a < e; ++a)
            for (std::size_t b = 0; b < e; ++b) {
                double inc = cp.value(u, a) * (cp.value(u + 1, b) - cp.value(u, b));
                for (std::size_t j = 0; j < d; ++j) {
                    const double za = cp.deriv(u, a, j);
                    if (za == 0.0) continue;
                    for (std::size_t l = 0; l < d; ++l)
                        inc += za * cp.deriv(u, b, l) * xx[j * d + l];
                }
                next[a * e + b] = prev[a * e + b] + inc;
            }
    }
    return RoughPath::from_parts(cp.value_path(), std::move(iterated));
}

double associativity_residual(const ControlledPath& y, const ControlledPath& f,
                              const ControlledPath& g) {
    require(y.codim() == 1 && f.codim() == 1 && g.codim() == 1,
            "associativity_residual: scalar paths expected");
    const ControlledPath z = rough_integral(f, g);
    const ControlledPath lhs = rough_integral(y, z);
    const ControlledPath rhs = rough_integral(product(y, f), g);
    double worst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        worst = std::max(worst, std::abs(lhs.value(i) - rhs.value(i)));
    return worst;
}

double sewing_bound(const ControlledPath& f, const ControlledPath& g, std::size_t s,
                    std::size_t t, double p, double constant) {
    require(s < t && t < f.size(), "sewing_bound: bad interval");
    std::vector<std::size_t> local;
    for (std::size_t i = s; i <= t; ++i) local.push_back(i);
    if (local.size() > 256) {
        std::vector<std::size_t> sub = default_anchors(local.size(), 256);
        std::vector<std::size_t> mapped(sub.size());
        for (std::size_t i = 0; i < sub.size(); ++i) mapped[i] = local[sub[i]];
        local = std::move(mapped);
    }
    double fp_sup = 0.0, gp_sup = 0.0;
    for (std::size_t i : local) {
        fp_sup = std::max(fp_sup, euclid(f.deriv_at(i)));
        gp_sup = std::max(gp_sup, euclid(g.deriv_at(i)));
    }
    const auto& X = f.reference();
    const double x_var = p_variation(X.base(), p, local);
    const double xx_var = two_param_p_variation(
        [&](std::size_t i, std::size_t j) { return X.second_level_norm(i, j); }, p / 2.0, local);
    const double f_var = variation_sup(
        local, [&](std::size_t i, std::size_t j) { return euclid_diff(f.value_at(j), f.value_at(i)); },
        p);
    const double rf_var = variation_sup(
        local, [&](std::size_t i, std::size_t j) { return f.remainder_norm(i, j); }, p / 2.0);
    const double rg_var = variation_sup(
        local, [&](std::size_t i, std::size_t j) { return g.remainder_norm(i, j); }, p / 2.0);
    const double gp_var = variation_sup(
        local, [&](std::size_t i, std::size_t j) { return euclid_diff(g.deriv_at(j), g.deriv_at(i)); },
        p);
    const double fpgp_var = gp_var * fp_sup + f_var * gp_sup; // coarse bound on ||F'G'||_p
    return constant * (fp_sup * std::pow(std::pow(gp_var, p) + std::pow(x_var, p), 2.0 / p) * x_var +
                       f_var * rg_var + rf_var * gp_sup * x_var + fpgp_var * xx_var);
}

} // namespace roughfolio
