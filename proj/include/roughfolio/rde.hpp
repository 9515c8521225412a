#pragma once

#include "roughfolio/controlled.hpp"

namespace roughfolio {

/// (t,x)-dependent coefficients b: R^{1+m} -> R^m, sigma: R^{1+m} -> R^{m x d},
/// with first-order derivative callables (for Gubinelli derivatives of
/// composed paths) and declared bound constants.
struct CoefficientField {
    std::size_t m = 1;
    std::size_t d = 1;
    /// b(t,x), out size m.
    std::function<void(double, std::span<const double>, std::span<double>)> drift;
    /// sigma(t,x), out size m*d row-major.
    std::function<void(double, std::span<const double>, std::span<double>)> vol;
    /// [d_t b | D_x b], out size m*(1+m) row-major.
    std::function<void(double, std::span<const double>, std::span<double>)> drift_jacobian;
    /// [d_t sigma | D_x sigma], out size (m*d)*(1+m) row-major.
    std::function<void(double, std::span<const double>, std::span<double>)> vol_jacobian;
    /// Declared bound on the C^3_b norms of b and sigma.
    double c3_bound = 1.0;
    double det_floor = 1e-8;
    std::string name = "field";
};

inline constexpr double kStateGuard = 1e12;

/// Classical Euler approximation along P^n, returned as the staircase on the
/// master grid (constant between partition points, jump at partition points).
SampledPath euler_solve(const CoefficientField& field, std::span<const double> s0,
                        const SampledPath& noise, const PartitionScheme& scheme, std::size_t n);

/// b(.,S) and sigma(.,S) as controlled paths on the time-augmented reference.
struct ComposedCoefficients {
    ControlledPath drift; // codim m
    ControlledPath vol;   // codim m*d
};
ComposedCoefficients field_along(const CoefficientField& field, const ControlledPath& s);

struct RdeSolution {
    ControlledPath path;      // S with S' = (b,sigma)(.,S)
    double residual_sup = 0.0; // ||S - s0 - int (b,sigma)(.,S) d(.,W)||_inf
};

/// The master-grid Euler solution packaged as a controlled path on the
/// time-augmented lift; the self-consistency residual is reported.
RdeSolution rde_solve(const CoefficientField& field, std::span<const double> s0,
                      std::shared_ptr<const TimeAugmentedRoughPath> lift);

/// Cross-level refinement diagnostic: sup distance at the coarse grid points
/// between the Euler solution driven on the coarse grid and the one driven
/// on the fine grid (same noise realization restricted).
double euler_refinement_error(const CoefficientField& field, std::span<const double> s0,
                              const SampledPath& coarse_noise, const SampledPath& fine_noise);

struct RoughExponential {
    ControlledPath path;               // V with V' = V Z' on Z's reference
    double linear_rde_residual = 0.0;  // ||V - 1 - int V dZ||_inf
    bool hit_zero = false;             // some jump factor (1 + dZ) <= 0
};

/// Rough exponential of a scalar controlled path Z with Z_0 = 0:
///   V_t = exp(Z_t - Gamma_t / 2) prod_{jumps s <= t} (1 + dZ_s) exp(-dZ_s),
/// where Gamma = [Z] - sum of squared jumps, [Z] from the supplied lift.
/// The jump set is explicit (empty for continuous noise).  When the
/// decomposition of Z is known, `gamma_override` supplies [Z] directly
/// (e.g. the Young bracket int sigma sigma^T dt of a diffusion-type Z).
RoughExponential rough_exponential(const ControlledPath& z,
                                   std::shared_ptr<const RoughPath> z_lift,
                                   std::span<const std::size_t> jump_indices = {},
                                   const std::optional<SampledPath>& gamma_override = std::nullopt);

struct LinearRdeSolution {
    ControlledPath price; // S = s0 E(Xi), with S' = S Xi'
    ControlledPath xi;    // Xi = int b dt + int sigma dW
    double gamma_horizon = 0.0;
};

/// Solves S = s0 + int S dXi for Xi = int b dt + int sigma dW, via the rough
/// exponential with the Young bracket int |sigma|^2 dt of the known
/// decomposition.  Requires s0 > 0; the solution stays positive.
LinearRdeSolution linear_rde_solve(const ControlledPath& b, const ControlledPath& sigma_row,
                                   double s0,
                                   std::shared_ptr<const TimeAugmentedRoughPath> lift);

} // namespace roughfolio
