#pragma once

#include <cstdint>

#include "kinreg/geometry.hpp"
#include "kinreg/report.hpp"

namespace kinreg {

/// Samples whose exit direction makes |zeta . n| / |zeta| smaller than this are
/// treated as grazing and excluded from constant-measuring checks.
inline constexpr double kGrazingTolerance = 1e-6;

/// Random triples (x0, x1, y) with d = |x0-x1| <= 1 and |y-x0| > 2 d^a; counts
/// violations of angle(x0 y x1) < (pi/4) d^(1-a). Triples outside the hypothesis
/// are excluded.
CheckReport check_parallax_bound(std::size_t samples, double a, std::uint64_t seed);

/// Quotients |p(x,z)-p(y,z)| / ((1+1/d0)|x-y|) and |tau(x,z)-tau(y,z)| |z| / ((1+1/d0)|x-y|)
/// over random nearby interior pairs; d0 = min(d(x), d(y)). Evaluates 2N samples so
/// the report carries the sup drift between N and 2N.
CheckReport check_exit_continuity(const ConvexDomain& domain, std::size_t samples, std::uint64_t seed);

/// Quotients |P1-P2| / ((1+1/d0) theta) and ||xP1|-|xP2|| / ((1+1/d0) theta) for two
/// velocities at angle theta from the same interior point.
CheckReport check_angle_continuity(const ConvexDomain& domain, std::size_t samples, std::uint64_t seed);

/// Points z on the chord from x to X = p(x, zeta): counts violations of
/// |zX| <= (R / d0) d(z, boundary) with d0 = d(x, boundary).
CheckReport check_segment_distance(const ConvexDomain& domain, std::size_t samples, std::uint64_t seed);

}  // namespace kinreg
