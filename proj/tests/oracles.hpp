#pragma once

// Reference values computed outside the library (closed forms evaluated at
// 30 significant digits, exact binomial sums, independent Monte Carlo).

namespace oracle {

// CIR survival exp(A(t) - B(t) l0), (sigma, alpha, lbar, l0) = (.9, 4, .2, .2)
inline constexpr double kCirSurvivalT1 = 0.821285399577957635554390034581;
inline constexpr double kCirSurvivalT05 = 0.905696046218946153059249572097;

// Same closed form at (sigma, alpha, lbar, l0) = (.5, .5, 2, .2), t = 1
inline constexpr double kTable1Survival = 0.56455589642338115130003148047;
inline constexpr double kTable1DefaultProb = 0.43544410357661884869996851953;

// Type C with phi(t) = 0.5 t: closed form with lbar shifted to 3, and a
// 1e5-path Euler Monte Carlo of the forced intensity.
inline constexpr double kTypeCForcedSurvival = 0.45779272508424443251793814404;
inline constexpr double kTypeCForcedMc = 0.45818383069265584;
inline constexpr double kTypeCForcedMcStderr = 0.0002461113029406326;

// Constant intensity 2 over [0, 1]
inline constexpr double kExpClock = 0.8646647167633873;

// P(Bin(10, .3) >= 5)
inline constexpr double kBinomTail = 0.15026833259999992;
// Binomial relative entropy at p = .3, l = .5
inline constexpr double kRateIndependent = 0.08717669357238891;
// P(sum >= 6), five names at p = .2 and five at p = .4
inline constexpr double kPoissonBinomTail = 0.0428115968;

}  // namespace oracle
