#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kel/density.hpp"
#include "kel/geom.hpp"
#include "kel/sampling.hpp"
#include "json.hpp"

namespace kel::transport_metric {

using sampling::Density;
using sampling::SampleSet;
using sampling::TransportMap;

// A point of TL^q data on the circle R/LZ: a measure paired with a function
// into R^d.  Discrete elements carry atoms with positions, values, and
// weights; continuum elements carry a density and an evaluable function.
struct TLqElement {
    bool discrete = true;
    double L = 1.0;
    int dim = 1;  // value dimension

    // discrete side: positions ascending in [0, L), values aligned
    std::vector<double> positions;
    std::vector<Vec> values;
    std::vector<double> weights;  // sum 1

    // continuum side
    Density density = Density::uniform(1.0);
    std::function<Vec(double)> func;

    int n() const { return static_cast<int>(positions.size()); }

    static TLqElement from_samples(const SampleSet& S, const std::vector<Vec>& vals);
    static TLqElement from_atoms(double L, std::vector<double> positions,
                                 std::vector<Vec> vals);
    static TLqElement continuum(const Density& rho, std::function<Vec(double)> f, int dim);
    // Equal-mass quantization of a continuum element: n atoms at the quantile
    // midpoints F^{-1}((k+1/2)/n).
    static TLqElement quantize(const TLqElement& cont, int n);
};

inline Vec scalar_value(double x) {
    Vec v(1);
    v[0] = x;
    return v;
}

struct CouplingMatrix {
    int rows = 0, cols = 0;
    struct Entry {
        int i, j;
        double mass;
    };
    std::vector<Entry> entries;

    std::vector<double> row_marginal() const;
    std::vector<double> col_marginal() const;
    nlohmann::json to_json() const;
    void write_csv(const std::string& path) const;  // header i,j,weight
};

struct TLqReport {
    double cost = 0;      // sum of mass * ground cost
    double distance = 0;  // cost^(1/q)
    double q = 1;
    std::string method;
    CouplingMatrix coupling;
    double runtime_s = 0;

    nlohmann::json to_json() const;
};

// Atom-to-atom ground cost d_circ(x,y)^q + |f-g|^q.
double tlq_ground_cost(double x, const Vec& fx, double y, const Vec& gy, double L,
                       double q);

// Exact TL^q distance between discrete elements: min-cost perfect matching
// for equal atom counts, min-cost flow otherwise.  Uniform weights required;
// atom counts above the cap are refused (use tlq_map_bound instead).
TLqReport tlq_exact(const TLqElement& a, const TLqElement& b, double q,
                    int atom_cap = 1024);

// Exhaustive minimum over all matchings; equal atom counts n <= 8.
TLqReport tlq_brute_force(const TLqElement& a, const TLqElement& b, double q);

// Upper bound on the TL^q distance from a continuum element to a discrete one
// along a quantile transport map: the coupling (Id, T) gives
// (integral of [d_circ(x,T(x))^q + |f(x) - g(T(x))|^q] rho dx)^(1/q).
// Verifies that T pushes rho onto the discrete weights blockwise.
double tlq_map_bound(const TLqElement& cont, const TLqElement& disc,
                     const TransportMap& T, double q);

// W_1 on the circle between two discrete measures (values ignored): minimum
// over vertical shifts s of the integral of |F1 - F2 - s|, with the optimal s
// a weighted median.  Exact from sorted atoms.
double circular_wasserstein(const TLqElement& a, const TLqElement& b, double q = 1);

struct SequenceEntry {
    TLqElement element;  // discrete
    TransportMap map;
};

struct SequenceReport {
    std::vector<int> ns;
    std::vector<double> bounds;       // map bound per entry
    std::vector<double> stagnations;  // displacement integral per entry
    bool converging = false;
    double eps = 0.05;
    int window = 3;

    nlohmann::json to_json() const;
};

// Tabulates map bound and stagnation statistic along a sequence of discrete
// elements with transport maps; declares convergence when both columns are
// decreasing in windowed median and the final bound is below eps.
SequenceReport tlq_sequence_convergence(const std::vector<SequenceEntry>& seq,
                                        const TLqElement& target, double q,
                                        double eps = 0.05, int window = 3);

}  // namespace kel::transport_metric
