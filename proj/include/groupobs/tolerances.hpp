#pragma once

namespace groupobs {

// Central numeric tolerances. Single tuning point for the invariant checks
// spread across the library and its tests.
inline constexpr double kOrthoTol = 1e-9;        // rotation orthonormality / det
inline constexpr double kExactTol = 1e-12;       // identities expected to hold to roundoff
inline constexpr double kPFloor = 1e-12;         // eigenvalue floor for Riccati covariances
inline constexpr double kRankRelTol = 1e-8;      // sigma below kRankRelTol * sigma_max counts as zero
inline constexpr double kSeriesTol = 1e-13;      // matrix exponential series truncation
inline constexpr double kBearingMinNorm = 1e-6;  // below this a raw bearing is degenerate
inline constexpr double kCondLimit = 1e12;       // condition-number limit for normal equations

}  // namespace groupobs
