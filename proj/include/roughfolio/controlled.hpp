#pragma once

#include "roughfolio/roughlift.hpp"

#include <memory>

namespace roughfolio {

/// A controlled path (Y, Y') over a shared reference rough path: Y takes
/// values in R^m, Y'_t is an m x d matrix (d = reference dimension), and the
/// remainder R^Y_{s,t} = Y_{s,t} - Y'_s X_{s,t} is derived on demand rather
/// than stored.  Gubinelli derivatives are always carried explicitly.
class ControlledPath {
public:
    ControlledPath(std::shared_ptr<const RoughPath> reference, std::vector<double> values,
                   std::vector<double> derivs, std::size_t codim);

    /// (X, Id): the reference path controlled by itself.
    static ControlledPath identity(std::shared_ptr<const RoughPath> reference);
    static ControlledPath constant(std::shared_ptr<const RoughPath> reference,
                                   std::span<const double> value);
    /// Wraps a finite-variation path as a controlled path with zero
    /// Gubinelli derivative (all increments sit in the remainder).
    static ControlledPath finite_variation(std::shared_ptr<const RoughPath> reference,
                                           const SampledPath& values);

    const RoughPath& reference() const { return *ref_; }
    const std::shared_ptr<const RoughPath>& reference_ptr() const { return ref_; }
    std::size_t size() const { return ref_->size(); }
    std::size_t codim() const { return codim_; }
    std::size_t ref_dim() const { return ref_->dim(); }

    double value(std::size_t i, std::size_t comp = 0) const {
        return values_[i * codim_ + comp];
    }
    std::span<const double> value_at(std::size_t i) const {
        return {values_.data() + i * codim_, codim_};
    }
    /// Derivative entry dY^comp / dX^j at grid index i.
    double deriv(std::size_t i, std::size_t comp, std::size_t j) const {
        return derivs_[(i * codim_ + comp) * ref_->dim() + j];
    }
    std::span<const double> deriv_at(std::size_t i) const {
        return {derivs_.data() + i * codim_ * ref_->dim(), codim_ * ref_->dim()};
    }

    /// R^Y_{s,t} written into out (m values).
    void remainder(std::size_t s, std::size_t t, std::span<double> out) const;
    double remainder_norm(std::size_t s, std::size_t t) const;

    ControlledPath component(std::size_t comp) const;
    SampledPath value_path() const;
    SampledPath derivative_path() const;

private:
    std::shared_ptr<const RoughPath> ref_;
    std::vector<double> values_; // size * codim
    std::vector<double> derivs_; // size * codim * ref dim
    std::size_t codim_;
};

// ---------------------------------------------------------------------------
// Norms and distances (Banach norm of V^p_X on an anchor set)
// ---------------------------------------------------------------------------

/// |Y_0| + |Y'_0| + ||Y'||_p + ||R^Y||_{p/2} over the anchors.
double controlled_norm(const ControlledPath& cp, double p,
                       std::optional<std::vector<std::size_t>> anchors = std::nullopt);

/// |Y_0 - Z_0| + |Y'_0 - Z'_0| + ||Y' - Z'||_p + ||R^Y - R^Z||_{p/2}.
/// The references may differ but must share the grid.
double controlled_distance(const ControlledPath& cp, const ControlledPath& cq, double p,
                           std::optional<std::vector<std::size_t>> anchors = std::nullopt);

// ---------------------------------------------------------------------------
// Algebra
// ---------------------------------------------------------------------------

ControlledPath add(const ControlledPath& f, const ControlledPath& g);
ControlledPath subtract(const ControlledPath& f, const ControlledPath& g);
ControlledPath scale(const ControlledPath& f, double a);
ControlledPath shift(const ControlledPath& f, double a);

/// Leibniz product; at least one factor must be scalar, or both share the
/// codimension (componentwise product).  (FG)' = F'G + FG'.
ControlledPath product(const ControlledPath& f, const ControlledPath& g);

/// Euclidean pairing sum_e F^e G^e of two paths with equal codimension.
ControlledPath dot(const ControlledPath& f, const ControlledPath& g);

/// Matrix product of matrix-valued controlled paths: f is rows x inner,
/// g is inner x cols, both stored row-major in their codimension.
ControlledPath matmul(const ControlledPath& f, std::size_t rows, std::size_t inner,
                      const ControlledPath& g, std::size_t cols);

ControlledPath transpose(const ControlledPath& f, std::size_t rows, std::size_t cols);

/// Assembles a controlled path from scalar components.
ControlledPath from_components(const std::vector<ControlledPath>& comps);

/// Componentwise inverse of a matrix-valued controlled path (codim = m*m);
/// rejects when |det| falls below the floor, reporting the first offending
/// grid time.  (A^{-1})' = -A^{-1} A' A^{-1}.
ControlledPath matrix_inverse(const ControlledPath& a, std::size_t m, double det_floor);

/// A smooth map together with its Jacobian, for composition.
struct SmoothMap {
    std::size_t in_dim = 1;
    std::size_t out_dim = 1;
    std::function<void(std::span<const double>, std::span<double>)> value;
    /// Jacobian, out_dim x in_dim row-major.
    std::function<void(std::span<const double>, std::span<double>)> deriv;
    /// Optional domain guard; compose rejects where it returns false.
    std::function<bool(std::span<const double>)> domain_ok;
    std::string name = "f";

    static SmoothMap identity(std::size_t n);
    static SmoothMap exp1d();
    static SmoothMap square1d();
    static SmoothMap reciprocal1d(double floor);
    static SmoothMap affine1d(double a, double b); // x -> a x + b
};

/// f(Y) with Gubinelli derivative Df(Y) Y'.
ControlledPath compose_smooth(const ControlledPath& cp, const SmoothMap& f);

// ---------------------------------------------------------------------------
// Rough integration
// ---------------------------------------------------------------------------

/// Compensated-sum rough integral over the master grid,
///   Z_t = sum over cells [u,v] <= t of  F_u G_{u,v} + F'_u G'_u XX_{u,v},
/// where F is (out_rows x e)-valued, G is e-valued, and the output carries
/// the Gubinelli derivative Z' = F G'.  The master grid is the evaluation
/// grid; partition limits are diagnostics, not the evaluator.
ControlledPath rough_integral(const ControlledPath& f, const ControlledPath& g,
                              std::size_t out_rows = 1);

/// Integral of an (out_rows x d)-valued controlled path against the
/// reference rough path itself.
ControlledPath rough_integral_vs_reference(const ControlledPath& f, std::size_t out_rows = 1);

/// Plain left-point Riemann sums along P^n, evaluated at every master time;
/// a convergence diagnostic against the compensated rough integral.
SampledPath riemann_sum_integral(const ControlledPath& f, const ControlledPath& g,
                                 const PartitionScheme& scheme, std::size_t n);

/// Canonical rough path lift of a controlled path:
///   ZZ_{s,t} = int_s^t Z (x) dZ - Z_s (x) Z_{s,t},
/// with the iterated integral accumulated by compensated sums per cell
/// (the derivative pair being the 4-tensor Z' (x) Z').
RoughPath canonical_lift(const ControlledPath& cp);

/// sup-distance between int Y d(int F dG) and int (YF) dG (all scalar).
double associativity_residual(const ControlledPath& y, const ControlledPath& f,
                              const ControlledPath& g);

/// Local sewing-type error bound for |int_s^t F dG - F_s G_{s,t} -
/// F'_s G'_s XX_{s,t}| with a configurable constant (bounds are reported,
/// never enforced).
double sewing_bound(const ControlledPath& f, const ControlledPath& g, std::size_t s,
                    std::size_t t, double p, double constant = 10.0);

} // namespace roughfolio
