#include "kel/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "kel/parallel.hpp"

namespace kel::transport_metric {

namespace {

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double pow_q(double x, double q) {
    if (q == 1.0) return x;
    if (q == 2.0) return x * x;
    return std::pow(x, q);
}

constexpr double GL16_X[8] = {0.0052995325041750, 0.0277124884633837, 0.0671843988060841,
                              0.1222977958224985, 0.1910618777986781, 0.2709916111713863,
                              0.3591982246103705, 0.4524937450811813};
constexpr double GL16_W[8] = {0.0135762297058770, 0.0311267619693239, 0.0475792558412464,
                              0.0623144856277669, 0.0747979944082884, 0.0845782596975013,
                              0.0913017075224618, 0.0947253052275343};

void require_uniform_weights(const TLqElement& e, const char* who) {
    double w = 1.0 / e.n();
    for (double wi : e.weights)
        if (std::fabs(wi - w) > 1e-12)
            throw std::invalid_argument(std::string(who) + ": uniform atom weights required");
}

std::vector<double> cost_matrix(const TLqElement& a, const TLqElement& b, double q) {
    size_t nA = a.positions.size(), nB = b.positions.size();
    std::vector<double> C(nA * nB);
    parallel_for(static_cast<int>(nA), [&](int i) {
        size_t si = static_cast<size_t>(i);
        for (size_t j = 0; j < nB; ++j)
            C[si * nB + j] = tlq_ground_cost(a.positions[si], a.values[si], b.positions[j],
                                             b.values[j], a.L, q);
    });
    return C;
}

// Shortest-augmenting-path assignment on a dense n x n cost matrix.
// Returns the row matched to each column.
std::vector<int> solve_assignment(int n, const std::vector<double>& C) {
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
    std::vector<double> minv(static_cast<size_t>(n) + 1);
    std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), INF);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            int i0 = p[static_cast<size_t>(j0)], j1 = 0;
            double delta = INF;
            const double* row = C.data() + static_cast<size_t>(i0 - 1) * n;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                double cur = row[j - 1] - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> col_row(static_cast<size_t>(n));
    for (int j = 1; j <= n; ++j) col_row[static_cast<size_t>(j - 1)] = p[static_cast<size_t>(j)] - 1;
    return col_row;
}

// Successive-shortest-path transportation solve in integer mass units:
// source i carries nB units, sink j absorbs nA units, one unit = 1/(nA nB).
std::vector<long long> solve_flow(int nA, int nB, const std::vector<double>& C) {
    std::vector<long long> flow(static_cast<size_t>(nA) * nB, 0);
    std::vector<long long> srem(static_cast<size_t>(nA), nB);
    std::vector<long long> drem(static_cast<size_t>(nB), nA);
    long long need = static_cast<long long>(nA) * nB;
    const double INF = std::numeric_limits<double>::infinity();
    int V = nA + nB;
    std::vector<double> dist(static_cast<size_t>(V));
    std::vector<int> par(static_cast<size_t>(V));
    std::vector<char> inq(static_cast<size_t>(V), 0);
    long long guard = 8 * need + 64;
    while (need > 0) {
        if (--guard < 0) throw std::runtime_error("tlq_exact: flow solver stalled");
        std::fill(dist.begin(), dist.end(), INF);
        std::fill(par.begin(), par.end(), -1);
        std::deque<int> Q;
        for (int i = 0; i < nA; ++i)
            if (srem[static_cast<size_t>(i)] > 0) {
                dist[static_cast<size_t>(i)] = 0;
                Q.push_back(i);
                inq[static_cast<size_t>(i)] = 1;
            }
        while (!Q.empty()) {
            int uc = Q.front();
            Q.pop_front();
            inq[static_cast<size_t>(uc)] = 0;
            if (uc < nA) {
                const double* row = C.data() + static_cast<size_t>(uc) * nB;
                for (int j = 0; j < nB; ++j) {
                    int t = nA + j;
                    double nd = dist[static_cast<size_t>(uc)] + row[j];
                    if (nd < dist[static_cast<size_t>(t)] - 1e-15) {
                        dist[static_cast<size_t>(t)] = nd;
                        par[static_cast<size_t>(t)] = uc;
                        if (!inq[static_cast<size_t>(t)]) {
                            Q.push_back(t);
                            inq[static_cast<size_t>(t)] = 1;
                        }
                    }
                }
            } else {
                int j = uc - nA;
                for (int i = 0; i < nA; ++i) {
                    if (flow[static_cast<size_t>(i) * nB + j] <= 0) continue;
                    double nd = dist[static_cast<size_t>(uc)] - C[static_cast<size_t>(i) * nB + j];
                    if (nd < dist[static_cast<size_t>(i)] - 1e-15) {
                        dist[static_cast<size_t>(i)] = nd;
                        par[static_cast<size_t>(i)] = uc;
                        if (!inq[static_cast<size_t>(i)]) {
                            Q.push_back(i);
                            inq[static_cast<size_t>(i)] = 1;
                        }
                    }
                }
            }
        }
        int best = -1;
        for (int j = 0; j < nB; ++j)
            if (drem[static_cast<size_t>(j)] > 0 && dist[static_cast<size_t>(nA + j)] < INF &&
                (best < 0 ||
                 dist[static_cast<size_t>(nA + j)] < dist[static_cast<size_t>(nA + best)]))
                best = j;
        if (best < 0) throw std::runtime_error("tlq_exact: no augmenting path");
        long long push = drem[static_cast<size_t>(best)];
        int node = nA + best;
        while (par[static_cast<size_t>(node)] >= 0) {
            int pn = par[static_cast<size_t>(node)];
            if (node < nA)  // backward arc rides existing flow
                push = std::min(push, flow[static_cast<size_t>(node) * nB + (pn - nA)]);
            node = pn;
        }
        push = std::min(push, srem[static_cast<size_t>(node)]);
        int cur = nA + best;
        while (par[static_cast<size_t>(cur)] >= 0) {
            int pn = par[static_cast<size_t>(cur)];
            if (cur >= nA)
                flow[static_cast<size_t>(pn) * nB + (cur - nA)] += push;
            else
                flow[static_cast<size_t>(cur) * nB + (pn - nA)] -= push;
            cur = pn;
        }
        srem[static_cast<size_t>(cur)] -= push;
        drem[static_cast<size_t>(best)] -= push;
        need -= push;
    }
    return flow;
}

double median_range(const std::vector<double>& v, int lo, int hi) {  // [lo, hi)
    std::vector<double> t(v.begin() + lo, v.begin() + hi);
    std::sort(t.begin(), t.end());
    size_t m = t.size();
    return m % 2 ? t[m / 2] : 0.5 * (t[m / 2 - 1] + t[m / 2]);
}

// True when the final window's median is (within slack) the smallest of all
// sliding-window medians.
bool decreasing_in_median(const std::vector<double>& col, int window) {
    int K = static_cast<int>(col.size());
    int w = std::min(window, K);
    std::vector<double> med;
    for (int end = w; end <= K; ++end) med.push_back(median_range(col, end - w, end));
    double last = med.back();
    for (double m : med)
        if (last > m + 1e-12 * std::max(1.0, std::fabs(m))) return false;
    return true;
}

}  // namespace

TLqElement TLqElement::from_samples(const SampleSet& S, const std::vector<Vec>& vals) {
    if (static_cast<int>(vals.size()) != S.n)
        throw std::invalid_argument("TLqElement: one value per sample required");
    if (S.n == 0) throw std::invalid_argument("TLqElement: empty sample set");
    TLqElement e;
    e.discrete = true;
    e.L = S.density.L();
    e.dim = vals.front().d;
    e.positions.reserve(vals.size());
    e.values.reserve(vals.size());
    for (int k = 0; k < S.n; ++k) {
        int i = S.sorted_index[static_cast<size_t>(k)];
        e.positions.push_back(S.samples[static_cast<size_t>(i)]);
        e.values.push_back(vals[static_cast<size_t>(i)]);
    }
    e.weights.assign(vals.size(), 1.0 / S.n);
    return e;
}

TLqElement TLqElement::from_atoms(double L, std::vector<double> positions,
                                  std::vector<Vec> vals) {
    if (positions.empty() || positions.size() != vals.size())
        throw std::invalid_argument("TLqElement: positions/values size mismatch");
    if (!(L > 0)) throw std::invalid_argument("TLqElement: L > 0 required");
    TLqElement e;
    e.discrete = true;
    e.L = L;
    e.dim = vals.front().d;
    for (const Vec& v : vals)
        if (v.d != e.dim) throw std::invalid_argument("TLqElement: inconsistent value dimensions");
    std::vector<int> idx(positions.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (double& x : positions) x = wrap(x, L);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return positions[static_cast<size_t>(a)] < positions[static_cast<size_t>(b)];
    });
    for (int i : idx) {
        e.positions.push_back(positions[static_cast<size_t>(i)]);
        e.values.push_back(vals[static_cast<size_t>(i)]);
    }
    e.weights.assign(positions.size(), 1.0 / static_cast<double>(positions.size()));
    return e;
}

TLqElement TLqElement::continuum(const Density& rho, std::function<Vec(double)> f, int dim) {
    if (!f) throw std::invalid_argument("TLqElement: continuum element needs a function");
    TLqElement e;
    e.discrete = false;
    e.L = rho.L();
    e.dim = dim;
    e.density = rho;
    e.func = std::move(f);
    return e;
}

TLqElement TLqElement::quantize(const TLqElement& cont, int n) {
    if (cont.discrete) throw std::invalid_argument("TLqElement::quantize: continuum input required");
    if (n < 1) throw std::invalid_argument("TLqElement::quantize: n >= 1 required");
    TLqElement e;
    e.discrete = true;
    e.L = cont.L;
    e.dim = cont.dim;
    for (int k = 0; k < n; ++k) {
        double x = cont.density.inverse_cdf((k + 0.5) / n);
        e.positions.push_back(x);
        e.values.push_back(cont.func(x));
    }
    e.weights.assign(static_cast<size_t>(n), 1.0 / n);
    return e;
}

std::vector<double> CouplingMatrix::row_marginal() const {
    std::vector<double> m(static_cast<size_t>(rows), 0.0);
    for (const Entry& e : entries) m[static_cast<size_t>(e.i)] += e.mass;
    return m;
}

std::vector<double> CouplingMatrix::col_marginal() const {
    std::vector<double> m(static_cast<size_t>(cols), 0.0);
    for (const Entry& e : entries) m[static_cast<size_t>(e.j)] += e.mass;
    return m;
}

nlohmann::json CouplingMatrix::to_json() const {
    nlohmann::json j;
    j["rows"] = rows;
    j["cols"] = cols;
    nlohmann::json arr = nlohmann::json::array();
    for (const Entry& e : entries) arr.push_back({e.i, e.j, e.mass});
    j["entries"] = arr;
    return j;
}

void CouplingMatrix::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "i,j,weight\n";
    char buf[64];
    for (const Entry& e : entries) {
        std::snprintf(buf, sizeof buf, "%.17g", e.mass);
        out << e.i << "," << e.j << "," << buf << "\n";
    }
}

nlohmann::json TLqReport::to_json() const {
    nlohmann::json j;
    j["cost"] = cost;
    j["distance"] = distance;
    j["q"] = q;
    j["method"] = method;
    j["runtime_s"] = runtime_s;
    j["coupling"] = coupling.to_json();
    return j;
}

double tlq_ground_cost(double x, const Vec& fx, double y, const Vec& gy, double L,
                       double q) {
    double dc = intrinsic_distance(x, y, L);
    double df = dist(fx, gy);
    return pow_q(dc, q) + pow_q(df, q);
}

TLqReport tlq_exact(const TLqElement& a, const TLqElement& b, double q, int atom_cap) {
    double t0 = now_s();
    if (!a.discrete || !b.discrete)
        throw std::invalid_argument("tlq_exact: both elements must be discrete");
    if (q < 1) throw std::invalid_argument("tlq_exact: q >= 1 required");
    int nA = a.n(), nB = b.n();
    if (nA == 0 || nB == 0) throw std::invalid_argument("tlq_exact: empty element");
    if (nA > atom_cap || nB > atom_cap)
        throw std::invalid_argument("tlq_exact: atom count above cap (" +
                                    std::to_string(atom_cap) +
                                    "); use tlq_map_bound for large instances");
    if (std::fabs(a.L - b.L) > 1e-12 * std::max(a.L, b.L))
        throw std::invalid_argument("tlq_exact: mismatched circle lengths");
    if (a.dim != b.dim) throw std::invalid_argument("tlq_exact: mismatched value dimensions");
    require_uniform_weights(a, "tlq_exact");
    require_uniform_weights(b, "tlq_exact");

    std::vector<double> C = cost_matrix(a, b, q);
    TLqReport rep;
    rep.q = q;
    rep.coupling.rows = nA;
    rep.coupling.cols = nB;
    double cost = 0;
    if (nA == nB) {
        std::vector<int> col_row = solve_assignment(nA, C);
        double w = 1.0 / nA;
        for (int j = 0; j < nA; ++j)
            rep.coupling.entries.push_back({col_row[static_cast<size_t>(j)], j, w});
        std::sort(rep.coupling.entries.begin(), rep.coupling.entries.end(),
                  [](const CouplingMatrix::Entry& x, const CouplingMatrix::Entry& y) {
                      return x.i < y.i;
                  });
        for (const auto& e : rep.coupling.entries)
            cost += e.mass * C[static_cast<size_t>(e.i) * nA + e.j];
        rep.method = "matching";
    } else {
        std::vector<long long> flow = solve_flow(nA, nB, C);
        double unit = 1.0 / (static_cast<double>(nA) * nB);
        for (int i = 0; i < nA; ++i)
            for (int j = 0; j < nB; ++j) {
                long long f = flow[static_cast<size_t>(i) * nB + j];
                if (f <= 0) continue;
                double mass = static_cast<double>(f) * unit;
                rep.coupling.entries.push_back({i, j, mass});
                cost += mass * C[static_cast<size_t>(i) * nB + j];
            }
        rep.method = "flow";
    }
    rep.cost = cost;
    rep.distance = q == 1.0 ? cost : std::pow(cost, 1.0 / q);
    rep.runtime_s = now_s() - t0;
    return rep;
}

TLqReport tlq_brute_force(const TLqElement& a, const TLqElement& b, double q) {
    double t0 = now_s();
    if (!a.discrete || !b.discrete)
        throw std::invalid_argument("tlq_brute_force: both elements must be discrete");
    if (a.n() != b.n()) throw std::invalid_argument("tlq_brute_force: equal atom counts required");
    int n = a.n();
    if (n < 1 || n > 8) throw std::invalid_argument("tlq_brute_force: 1 <= n <= 8 required");
    if (a.dim != b.dim)
        throw std::invalid_argument("tlq_brute_force: mismatched value dimensions");
    require_uniform_weights(a, "tlq_brute_force");
    require_uniform_weights(b, "tlq_brute_force");
    std::vector<double> C = cost_matrix(a, b, q);
    std::vector<int> perm(static_cast<size_t>(n)), best(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    best = perm;
    double bestc = std::numeric_limits<double>::infinity();
    do {
        double c = 0;
        for (int i = 0; i < n; ++i) c += C[static_cast<size_t>(i) * n + perm[static_cast<size_t>(i)]];
        if (c < bestc) {
            bestc = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    TLqReport rep;
    rep.q = q;
    rep.method = "brute";
    rep.coupling.rows = n;
    rep.coupling.cols = n;
    double w = 1.0 / n;
    for (int i = 0; i < n; ++i) rep.coupling.entries.push_back({i, best[static_cast<size_t>(i)], w});
    rep.cost = bestc * w;
    rep.distance = q == 1.0 ? rep.cost : std::pow(rep.cost, 1.0 / q);
    rep.runtime_s = now_s() - t0;
    return rep;
}

double tlq_map_bound(const TLqElement& cont, const TLqElement& disc, const TransportMap& T,
                     double q) {
    if (cont.discrete)
        throw std::invalid_argument("tlq_map_bound: first element must be continuum");
    if (!disc.discrete)
        throw std::invalid_argument("tlq_map_bound: second element must be discrete");
    if (q < 1) throw std::invalid_argument("tlq_map_bound: q >= 1 required");
    if (!cont.func) throw std::invalid_argument("tlq_map_bound: continuum element lacks a function");
    if (cont.dim != disc.dim)
        throw std::invalid_argument("tlq_map_bound: mismatched value dimensions");
    int n = disc.n();
    if (T.n() != n)
        throw std::invalid_argument("tlq_map_bound: map block count != atom count");
    double L = cont.L;
    if (std::fabs(disc.L - L) > 1e-12 * L || std::fabs(T.L - L) > 1e-12 * L)
        throw std::invalid_argument("tlq_map_bound: mismatched circle lengths");
    for (double fr : {0.0, 0.123, 0.37, 0.5, 0.777, 0.93}) {
        double x = fr * L;
        double pa = cont.density.pdf(x), pb = T.density.pdf(x);
        if (std::fabs(pa - pb) > 1e-9 * std::max({pa, pb, 1.0 / L}))
            throw std::invalid_argument("tlq_map_bound: map was built for a different density");
    }

    double total = 0;
    double postol = 1e-9 * L;
    for (int i = 0; i < n; ++i) {
        double ts = T.targets[static_cast<size_t>(i)];
        double pos = wrap(ts + T.cut, L);
        // locate the atom this block feeds
        auto it = std::lower_bound(disc.positions.begin(), disc.positions.end(), pos);
        int m = -1;
        double bestd = postol;
        for (long off : {-1L, 0L}) {
            long k = (it - disc.positions.begin()) + off;
            if (k < 0) k += n;
            if (k >= n) k -= n;
            double d = intrinsic_distance(disc.positions[static_cast<size_t>(k)], pos, L);
            if (d <= bestd) {
                bestd = d;
                m = static_cast<int>(k);
            }
        }
        if (m < 0) throw std::runtime_error("tlq_map_bound: a map target matches no atom");
        if (std::fabs(T.block_mass(i) - disc.weights[static_cast<size_t>(m)]) > 1e-8)
            throw std::runtime_error("tlq_map_bound: push-forward mismatch on a block");
        const Vec& g = disc.values[static_cast<size_t>(m)];

        double a = T.edges[static_cast<size_t>(i)], b = T.edges[static_cast<size_t>(i) + 1];
        double cuts[5];
        int nc = 0;
        cuts[nc++] = a;
        if (ts > a && ts < b) cuts[nc++] = ts;
        for (double anti : {ts - L / 2, ts + L / 2})
            if (anti > a && anti < b) cuts[nc++] = anti;
        cuts[nc++] = b;
        std::sort(cuts, cuts + nc);
        for (int k = 0; k + 1 < nc; ++k) {
            double lo = cuts[k], hi = cuts[k + 1];
            if (hi <= lo) continue;
            double h = hi - lo, acc = 0;
            for (int g16 = 0; g16 < 8; ++g16)
                for (double xi : {GL16_X[g16], 1.0 - GL16_X[g16]}) {
                    double xs = lo + xi * h;
                    double dd = std::fabs(xs - ts);
                    dd = std::min(dd, L - dd);
                    double x = wrap(xs + T.cut, L);
                    double df = dist(cont.func(x), g);
                    acc += GL16_W[g16] * (pow_q(dd, q) + pow_q(df, q)) * cont.density.pdf(x);
                }
            total += acc * h;
        }
    }
    return q == 1.0 ? total : std::pow(total, 1.0 / q);
}

double circular_wasserstein(const TLqElement& a, const TLqElement& b, double q) {
    if (q != 1.0)
        throw std::invalid_argument(
            "circular_wasserstein: q = 1 only; use tlq_exact with zero function values");
    if (!a.discrete || !b.discrete)
        throw std::invalid_argument("circular_wasserstein: discrete measures required");
    double L = a.L;
    if (std::fabs(b.L - L) > 1e-12 * L)
        throw std::invalid_argument("circular_wasserstein: mismatched circle lengths");
    struct Ev {
        double x, d1, d2;
    };
    std::vector<Ev> ev;
    ev.reserve(a.positions.size() + b.positions.size());
    for (size_t i = 0; i < a.positions.size(); ++i) ev.push_back({a.positions[i], a.weights[i], 0.0});
    for (size_t j = 0; j < b.positions.size(); ++j) ev.push_back({b.positions[j], 0.0, b.weights[j]});
    std::sort(ev.begin(), ev.end(), [](const Ev& u, const Ev& v) { return u.x < v.x; });

    // piecewise-constant G = F1 - F2 between events; the wrap segment closes
    // the circle with G = 0
    std::vector<std::pair<double, double>> segs;  // (G, length)
    double F1 = 0, F2 = 0;
    size_t k = 0;
    while (k < ev.size()) {
        double x = ev[k].x;
        while (k < ev.size() && ev[k].x == x) {
            F1 += ev[k].d1;
            F2 += ev[k].d2;
            ++k;
        }
        double nx = k < ev.size() ? ev[k].x : ev.front().x + L;
        if (nx > x) segs.emplace_back(F1 - F2, nx - x);
    }
    std::sort(segs.begin(), segs.end());
    double total = 0;
    for (const auto& s : segs) total += s.second;
    double cum = 0, med = segs.back().first;
    for (const auto& s : segs) {
        cum += s.second;
        if (cum >= total / 2) {
            med = s.first;
            break;
        }
    }
    double W = 0;
    for (const auto& s : segs) W += std::fabs(s.first - med) * s.second;
    return W;
}

nlohmann::json SequenceReport::to_json() const {
    nlohmann::json j;
    j["n"] = ns;
    j["map_bound"] = bounds;
    j["stagnation"] = stagnations;
    j["converging"] = converging;
    j["eps"] = eps;
    j["window"] = window;
    return j;
}

SequenceReport tlq_sequence_convergence(const std::vector<SequenceEntry>& seq,
                                        const TLqElement& target, double q, double eps,
                                        int window) {
    if (seq.empty()) throw std::invalid_argument("tlq_sequence_convergence: empty sequence");
    if (target.discrete)
        throw std::invalid_argument("tlq_sequence_convergence: target must be continuum");
    if (window < 1) throw std::invalid_argument("tlq_sequence_convergence: window >= 1 required");
    SequenceReport rep;
    rep.eps = eps;
    rep.window = window;
    for (const SequenceEntry& e : seq) {
        rep.ns.push_back(e.element.n());
        rep.bounds.push_back(tlq_map_bound(target, e.element, e.map, q));
        rep.stagnations.push_back(sampling::stagnation_statistic(e.map, q));
    }
    rep.converging = decreasing_in_median(rep.bounds, window) &&
                     decreasing_in_median(rep.stagnations, window) && rep.bounds.back() < eps;
    return rep;
}

}  // namespace kel::transport_metric
