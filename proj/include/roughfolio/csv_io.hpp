#pragma once

#include "roughfolio/roughlift.hpp"

#include <iosfwd>
#include <string>

namespace roughfolio {

/// CSV schema: header `t,x1,...,xd`, one row per grid point, full-precision
/// decimal (round-trip exact).
void write_path_csv(const SampledPath& path, std::ostream& out);
void write_path_csv(const SampledPath& path, const std::string& filename);
SampledPath read_path_csv(std::istream& in);
SampledPath read_path_csv(const std::string& filename);

/// Lift export: `t, x1..xd, I11, I12, ..., Idd`.
void write_lift_csv(const RoughPath& lift, std::ostream& out);
void write_lift_csv(const RoughPath& lift, const std::string& filename);

/// Shortest round-trip decimal formatting used by all CSV writers.
std::string format_double(double value);

} // namespace roughfolio
