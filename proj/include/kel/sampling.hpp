#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kel/density.hpp"

namespace kel::sampling {

// n i.i.d. parameter samples in [0,L); the empirical measure.
struct SampleSet {
    std::vector<double> samples;     // original draw order
    int n = 0;
    std::uint64_t seed = 0;
    Density density = Density::uniform(1.0);
    std::vector<int> sorted_index;   // permutation sorting `samples`

    double sorted(int i) const { return samples[static_cast<size_t>(sorted_index[static_cast<size_t>(i)])]; }
};

// Counter-based uniform stream: splitmix64 finalizer of seed + (i+1)*golden.
double counter_uniform(std::uint64_t seed, std::uint64_t index);

// Deterministic inverse-CDF sampling; identical (density, n, seed) gives
// bit-identical output regardless of thread count. Exact duplicates are
// replaced from reserve counter indices; a slot failing 3 retries throws.
SampleSet sample_iid(const Density& density, int n, std::uint64_t seed);

// Builds a SampleSet around externally chosen positions (tests, deterministic
// grids). Seed recorded as given; duplicates rejected.
SampleSet sampleset_from_values(std::vector<double> xs, const Density& density,
                                std::uint64_t seed = 0);

// sup_x |F_n(x) - F(x)|, exact from the sorted samples.
double gc_statistic(const SampleSet& S);

// Piecewise-constant quantile map [0,L) -> sample positions. Stored in
// cut-shifted coordinates: block i = (edges[i-1], edges[i]] -> targets[i-1].
struct TransportMap {
    double L = 1;
    double cut = 0;
    std::vector<double> edges;    // shifted coords, size n+1, edges[0]=0, edges[n]=L
    std::vector<double> targets;  // shifted coords, ascending
    double sup_displacement = 0;
    Density density = Density::uniform(1.0);

    int n() const { return static_cast<int>(targets.size()); }
    int block_of_shifted(double xs) const;
    double apply(double x) const;          // original coords -> sample position
    double block_mass(int i) const;        // rho-mass of block i (0-based)
};

inline constexpr const char* CUT_OPTIMIZE = "optimize";

TransportMap quantile_transport_map(const Density& density, const SampleSet& S, double cut);
// Scans the n candidate cuts at sample positions, returns the sup-minimizing map.
TransportMap quantile_transport_map_optimized(const Density& density, const SampleSet& S);

// integral of d_circ(x, T(x))^q rho(x) dx; exact per block for uniform rho,
// Gauss-Legendre per linear piece otherwise.
double stagnation_statistic(const TransportMap& T, double q);

// CSV dump: header `index,x`; JSON sidecar {seed, n, density} at path + ".json".
void write_sampleset_csv(const SampleSet& S, const std::string& path);

}  // namespace kel::sampling
