#pragma once

#include <string>
#include <vector>

#include "kel/curve.hpp"
#include "kel/sampling.hpp"
#include "json.hpp"

namespace kel::energies {

struct EnergyParams {
    double alpha = 2.0;
    double p = 1.0;

    double s() const { return (alpha * p - 1.0) / (2.0 * p); }
    bool in_blatt_range() const { return p >= 1.0 && alpha * p >= 2.0 && alpha * p < 2.0 * p + 1.0; }
    bool heavy_tail() const { return (alpha - 2.0) * p > 0.5; }
};

// Refinement-growth divergence detector: with ladder values E_{N/4}, E_{N/2},
// E_N, the increment ratio (E_N - E_{N/2}) / (E_{N/2} - E_{N/4}) stays near
// 1 for logarithmic growth and at or below ~0.5 for convergent quadratures.
struct DivergenceRule {
    double ratio_threshold = 0.75;
    double rel_floor = 1e-9;  // increments below rel_floor * max(1,|E|) count as converged
};

struct EnergyReport {
    std::string functional;
    double value = 0;  // finest-resolution value (finite part even when divergent)
    bool divergent = false;
    EnergyParams params;
    int resolution = 0;  // grid N, sample count n, or vertex count m
    long long seed = -1;
    double runtime_s = 0;
    std::vector<double> ladder;
    DivergenceRule rule;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

// (|g(x)-g(y)|^-alpha - D(x,y)^-alpha)^p, clamped at 0 (chord <= arc holds
// analytically for unit-speed curves; rounding can cross it).
double integrand(const curve_model::ClosedCurve& curve, double x, double y,
                 const EnergyParams& params);

// Midpoint-rule double sum over the N x N torus grid plus the analytic local
// integral of the skipped diagonal cells. Curve must be unit speed, N >= 64.
EnergyReport ohara_energy(const curve_model::ClosedCurve& curve, const EnergyParams& params, int N);

EnergyReport weighted_ohara_energy(const curve_model::ClosedCurve& curve,
                                   const sampling::Density& density, const EnergyParams& params,
                                   int N);

// (1/n^2) sum over ordered distinct sample pairs. Pairs closer than 1e-5 L
// along the curve are skipped (chord cancellation noise) and counted in the
// warnings.
EnergyReport random_ohara_energy(const curve_model::ClosedCurve& curve,
                                 const sampling::SampleSet& S, const EnergyParams& params);

enum class KKVariant { Endpoint, Averaged };

EnergyReport kim_kusner_energy(const curve_model::Polygon& P, KKVariant variant);

// Minimal Euclidean distance between two closed segments.
double segment_distance(const Vec& a0, const Vec& a1, const Vec& b0, const Vec& b1);

// Normalized minimal-distance energy: tilde-E(P) - tilde-E(regular m-gon) + 4.
EnergyReport simon_energy(const curve_model::Polygon& P);
double simon_tilde_energy(const curve_model::Polygon& P);

EnergyReport cos_energy(const curve_model::Polygon& P);

// [t]_{W^{s,p}}^p of the finite-difference tangent, offsets on the dual
// lattice, |w| < L/(2N) band skipped; same ladder divergence rule.
EnergyReport sobolev_seminorm(const curve_model::ClosedCurve& curve, double s, double p, int N);

struct BlattReport {
    EnergyReport energy;
    EnergyReport seminorm;  // of the tangent, s = (alpha p - 1)/(2p), exponent 2p
    double tangent_lp_norm = 0;  // ||gamma'||_{L^{2p}}^{2p}
    bool verdicts_agree = false;
    nlohmann::json to_json() const;
};

BlattReport blatt_report(const curve_model::ClosedCurve& curve, const EnergyParams& params, int N);

}  // namespace kel::energies
