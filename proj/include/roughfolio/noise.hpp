#pragma once

#include "roughfolio/roughlift.hpp"

#include <cstdint>

namespace roughfolio {

/// Seeded specification of a driving path on a dyadic master grid of
/// 2^master_level + 1 points.  Same spec => bit-identical path, and the
/// path at level L restricted to the level L-1 grid equals the level L-1
/// path for the same seed (midpoint refinement keeps one omega fixed as
/// the resolution grows).
struct NoiseSpec {
    enum class Kind { brownian, zero, identity, sine };
    Kind kind = Kind::brownian;
    std::size_t dimension = 1;
    double horizon = 1.0;
    std::size_t master_level = 10; // grid has 2^level cells
    std::uint64_t seed = 0;

    static Kind parse_kind(const std::string& text);
    std::string kind_name() const;
};

/// Dyadic grid times j * T / 2^level; exact under restriction across levels.
std::vector<double> dyadic_times(double horizon, std::size_t level);

SampledPath generate(const NoiseSpec& spec);

/// Standard normal from a counter-based generator keyed by
/// (seed, dimension, level, node); stateless and order-independent.
double counter_gaussian(std::uint64_t seed, std::uint64_t dim, std::uint64_t level,
                        std::uint64_t node);

/// Runs the RIE diagnostic on the generated path for levels 1..n_max of the
/// scheme (skipping levels the master grid does not refine).
RieReport rie_report(const NoiseSpec& spec, const PartitionScheme& scheme, double p,
                     std::size_t n_max);

} // namespace roughfolio
