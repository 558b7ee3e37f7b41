#include "kel/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "kel/geom.hpp"

namespace kel::sampling {

double counter_uniform(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z = z ^ (z >> 31);
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

namespace {

void fill_sorted_index(SampleSet& S) {
    S.sorted_index.resize(S.samples.size());
    std::iota(S.sorted_index.begin(), S.sorted_index.end(), 0);
    std::stable_sort(S.sorted_index.begin(), S.sorted_index.end(), [&](int a, int b) {
        return S.samples[static_cast<size_t>(a)] < S.samples[static_cast<size_t>(b)];
    });
}

}  // namespace

SampleSet sample_iid(const Density& density, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_iid: n >= 1 required");
    SampleSet S;
    S.n = n;
    S.seed = seed;
    S.density = density;
    S.samples.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        S.samples[static_cast<size_t>(i)] =
            density.inverse_cdf(counter_uniform(seed, static_cast<std::uint64_t>(i)));

    // exact-duplicate rejection from reserve counter indices
    std::uint64_t reserve = static_cast<std::uint64_t>(n);
    std::vector<int> retries(static_cast<size_t>(n), 0);
    for (;;) {
        std::vector<int> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            double xa = S.samples[static_cast<size_t>(a)], xb = S.samples[static_cast<size_t>(b)];
            return xa < xb || (xa == xb && a < b);
        });
        std::vector<int> dup_slots;
        for (int k = 1; k < n; ++k) {
            int a = order[static_cast<size_t>(k - 1)], b = order[static_cast<size_t>(k)];
            if (S.samples[static_cast<size_t>(a)] == S.samples[static_cast<size_t>(b)])
                dup_slots.push_back(std::max(a, b));
        }
        if (dup_slots.empty()) break;
        std::sort(dup_slots.begin(), dup_slots.end());
        dup_slots.erase(std::unique(dup_slots.begin(), dup_slots.end()), dup_slots.end());
        for (int slot : dup_slots) {
            if (++retries[static_cast<size_t>(slot)] > 3)
                throw std::runtime_error("sample_iid: duplicate sample persists after 3 retries");
            S.samples[static_cast<size_t>(slot)] = density.inverse_cdf(counter_uniform(seed, reserve++));
        }
    }
    fill_sorted_index(S);
    return S;
}

SampleSet sampleset_from_values(std::vector<double> xs, const Density& density, std::uint64_t seed) {
    if (xs.empty()) throw std::invalid_argument("sampleset_from_values: empty");
    double L = density.L();
    for (double& x : xs) x = wrap(x, L);
    SampleSet S;
    S.n = static_cast<int>(xs.size());
    S.seed = seed;
    S.density = density;
    S.samples = std::move(xs);
    fill_sorted_index(S);
    for (int i = 1; i < S.n; ++i)
        if (S.sorted(i) == S.sorted(i - 1))
            throw std::invalid_argument("sampleset_from_values: duplicate samples");
    return S;
}

double gc_statistic(const SampleSet& S) {
    int n = S.n;
    double worst = 0;
    for (int i = 1; i <= n; ++i) {
        double F = S.density.cdf(S.sorted(i - 1));
        worst = std::max(worst, std::fabs(static_cast<double>(i) / n - F));
        worst = std::max(worst, std::fabs(static_cast<double>(i - 1) / n - F));
    }
    return worst;
}

namespace {

// mass of [cut, cut+x') under the density's cut-0 CDF
double shifted_cdf(const Density& d, double cut, double xs) {
    if (xs <= 0) return 0;
    if (xs >= d.L()) return 1;
    double we = wrap(cut + xs, d.L()), ws = wrap(cut, d.L());
    double v = d.cdf(we) - d.cdf(ws);
    if (we < ws) v += 1;
    return std::min(std::max(v, 0.0), 1.0);
}

double shifted_inverse(const Density& d, double cut, double u) {
    if (u <= 0) return 0;
    if (u >= 1) return d.L();
    double base = d.cdf(wrap(cut, d.L()));
    double uu = u + base;
    if (uu >= 1) uu -= 1;
    return wrap(d.inverse_cdf(uu) - cut, d.L());
}

double circ_dist(double a, double b, double L) {
    double t = std::fabs(a - b);
    return std::min(t, L - t);
}

TransportMap build_map(const Density& density, const SampleSet& S, double cut) {
    int n = S.n;
    double L = density.L();
    TransportMap T;
    T.L = L;
    T.cut = wrap(cut, L);
    T.density = density;
    T.targets.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        T.targets[static_cast<size_t>(i)] = wrap(S.sorted(i) - T.cut, L);
    std::sort(T.targets.begin(), T.targets.end());
    T.edges.resize(static_cast<size_t>(n) + 1);
    T.edges[0] = 0;
    T.edges[static_cast<size_t>(n)] = L;
    for (int i = 1; i < n; ++i)
        T.edges[static_cast<size_t>(i)] = shifted_inverse(density, T.cut, static_cast<double>(i) / n);

    double sup = 0;
    for (int i = 0; i < n; ++i) {
        double a = T.edges[static_cast<size_t>(i)], b = T.edges[static_cast<size_t>(i) + 1];
        double t = T.targets[static_cast<size_t>(i)];
        sup = std::max(sup, circ_dist(a, t, L));
        sup = std::max(sup, circ_dist(b, t, L));
        double anti = t + L / 2;
        if (anti >= L) anti -= L;
        if (anti > a && anti <= b) sup = std::max(sup, L / 2);
    }
    T.sup_displacement = sup;
    return T;
}

}  // namespace

int TransportMap::block_of_shifted(double xs) const {
    auto it = std::upper_bound(edges.begin(), edges.end(), xs);
    int i = static_cast<int>(it - edges.begin()) - 1;
    if (i < 0) i = 0;
    if (i >= n()) i = n() - 1;
    return i;
}

double TransportMap::apply(double x) const {
    double xs = wrap(x - cut, L);
    // block i is the half-open interval (edges[i], edges[i+1]]
    if (xs == 0) xs = L;  // the cut point itself belongs to the last block
    auto it = std::lower_bound(edges.begin(), edges.end(), xs);
    int i = static_cast<int>(it - edges.begin()) - 1;
    if (i < 0) i = 0;
    if (i >= n()) i = n() - 1;
    return wrap(targets[static_cast<size_t>(i)] + cut, L);
}

double TransportMap::block_mass(int i) const {
    double a = edges[static_cast<size_t>(i)], b = edges[static_cast<size_t>(i) + 1];
    return shifted_cdf(density, cut, b) - shifted_cdf(density, cut, a);
}

TransportMap quantile_transport_map(const Density& density, const SampleSet& S, double cut) {
    return build_map(density, S, cut);
}

TransportMap quantile_transport_map_optimized(const Density& density, const SampleSet& S) {
    TransportMap best = build_map(density, S, 0.0);
    for (int i = 0; i < S.n; ++i) {
        TransportMap T = build_map(density, S, S.sorted(i));
        if (T.sup_displacement < best.sup_displacement) best = std::move(T);
    }
    return best;
}

namespace {

constexpr double GL16_X[8] = {0.0052995325041750
, 0.0277124884633837, 0.0671843988060841,
                              0.1222977958224985, 0.1910618777986781, 0.2709916111713863,
                              0.3591982246103705, 0.4524937450811813};
constexpr double GL16_W[8] = {0.0135762297058770, 0.0311267619693239, 0.0475792558412464,
                              0.0623144856277669, 0.0747979944082884, 0.0845782596975013,
                              0.0913017075224618, 0.0947253052275343};

// integral of g(x)^q * rho(x+cut) over [a,b] where g is linear distance to t
// on this piece; exact for uniform rho, GL16 otherwise
double piece_integral(const Density& d, double cut, double t, double a, double b, double q) {
    if (b <= a) return 0;
    double L = d.L();
    if (d.kind() == Density::Kind::Uniform) {
        double da = circ_dist(a, t, L), db = circ_dist(b, t, L);
        double lo = std::min(da, db), hi = std::max(da, db);
        return (std::pow(hi, q + 1) - std::pow(lo, q + 1)) / (q + 1) / L;
    }
    double acc = 0, h = b - a;
    for (int g = 0; g < 8; ++g) {
        for (double xi : {GL16_X[g], 1.0 - GL16_X[g]}) {
            double x = a + xi * h;
            acc += GL16_W[g] * std::pow(circ_dist(x, t, L), q) * d.pdf(wrap(x + cut, L));
        }
    }
    return acc * h;
}

}  // namespace

double stagnation_statistic(const TransportMap& T, double q) {
    if (q < 1) throw std::invalid_argument("stagnation_statistic: q >= 1 required");
    double total = 0, L = T.L;
    for (int i = 0; i < T.n(); ++i) {
        double a = T.edges[static_cast<size_t>(i)], b = T.edges[static_cast<size_t>(i) + 1];
        double t = T.targets[static_cast<size_t>(i)];
        // split where d_circ(., t) kinks: at t and at its antipode
        std::vector<double> cuts = {a, b};
        double anti = t + L / 2;
        if (anti >= L) anti -= L;
        if (t > a && t < b) cuts.push_back(t);
        if (anti > a && anti < b) cuts.push_back(anti);
        std::sort(cuts.begin(), cuts.end());
        for (size_t k = 0; k + 1 < cuts.size(); ++k)
            total += piece_integral(T.density, T.cut, t, cuts[k], cuts[k + 1], q);
    }
    return total;
}

void write_sampleset_csv(const SampleSet& S, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "index,x\n";
    char buf[64];
    for (int i = 0; i < S.n; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", S.samples[static_cast<size_t>(i)]);
        out << i << "," << buf << "\n";
    }
    nlohmann::json side;
    side["seed"] = S.seed;
    side["n"] = S.n;
    side["density"] = S.density.descriptor();
    std::ofstream sj(path + ".json");
    sj << side.dump(2) << "\n";
}

}  // namespace kel::sampling
