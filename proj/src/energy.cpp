#include "kel/energy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include "kel/parallel.hpp"

namespace kel::energies {

namespace {

using curve_model::ClosedCurve;
using curve_model::Polygon;
using sampling::Density;
using sampling::SampleSet;

constexpr double NEAR_PAIR_FRACTION = 1e-5;

double now_s() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

double kernel_M(double c2, double D, const EnergyParams& prm) {
    double base;
    if (prm.alpha == 2.0)
        base = 1.0 / c2 - 1.0 / (D * D);
    else
        base = std::pow(c2, -0.5 * prm.alpha) - std::pow(D, -prm.alpha);
    if (base <= 0) return 0;
    return prm.p == 1.0 ? base : std::pow(base, prm.p);
}

struct GridSum {
    double value = 0;
    bool self_intersection = false;
};

// One midpoint-grid evaluation: pair sum plus the local-model integral of the
// i=j cells, (alpha k_i^2/24)^p * 2 h^(b+2)/((b+1)(b+2)), b = (2-alpha)p.
GridSum grid_energy(const ClosedCurve& curve, const Density* density, const EnergyParams& prm,
                    int N) {
    double L = curve.L, h = L / N;
    std::vector<Vec> P(static_cast<size_t>(N));
    std::vector<double> w;
    for (int i = 0; i < N; ++i) P[static_cast<size_t>(i)] = curve.eval((i + 0.5) * h);
    if (density) {
        w.resize(static_cast<size_t>(N));
        for (int i = 0; i < N; ++i) w[static_cast<size_t>(i)] = density->pdf((i + 0.5) * h);
    }

    std::vector<double> rows(static_cast<size_t>(N), 0.0);
    std::vector<char> bad(static_cast<size_t>(N), 0);
    parallel_for(static_cast<size_t>(N), [&](size_t i) {
        double acc = 0;
        const Vec& pi = P[i];
        for (int j = 0; j < N; ++j) {
            if (static_cast<size_t>(j) == i) continue;
            int k = std::abs(static_cast<int>(i) - j);
            double D = std::min(k, N - k) * h;
            double c2 = dist2(pi, P[static_cast<size_t>(j)]);
            if (c2 == 0.0) {
                bad[i] = 1;
                continue;
            }
            double m = kernel_M(c2, D, prm);
            if (density) m *= w[i] * w[static_cast<size_t>(j)];
            acc += m;
        }
        rows[i] = acc;
    });

    GridSum out;
    for (char b : bad)
        if (b) out.self_intersection = true;
    double total = tree_sum(std::move(rows)) * h * h;

    double beta = (2.0 - prm.alpha) * prm.p;
    double J = 2.0 * std::pow(h, beta + 2.0) / ((beta + 1.0) * (beta + 2.0));
    std::vector<double> diag(static_cast<size_t>(N), 0.0);
    for (int i = 0; i < N; ++i) {
        const Vec& pm = P[static_cast<size_t>((i + N - 1) % N)];
        const Vec& pc = P[static_cast<size_t>(i)];
        const Vec& pp = P[static_cast<size_t>((i + 1) % N)];
        double dd2 = 0;
        for (int c = 0; c < pc.d; ++c) {
            double t = pp[c] - 2 * pc[c] + pm[c];
            dd2 += t * t;
        }
        double kappa2 = dd2 / (h * h * h * h);
        double g = std::pow(prm.alpha * kappa2 / 24.0, prm.p);
        if (density) g *= w[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
        diag[static_cast<size_t>(i)] = g;
    }
    total += tree_sum(std::move(diag)) * J;
    out.value = total;
    return out;
}

// {N/4, N/2, N} ladder with the increment-ratio divergence rule.
EnergyReport ladder_report(const std::string& name, const EnergyParams& prm, int N,
                           const std::function<GridSum(int)>& eval) {
    if (N < 64) throw std::invalid_argument(name + ": N >= 64 required");
    double t0 = now_s();
    EnergyReport rep;
    rep.functional = name;
    rep.params = prm;
    rep.resolution = N;
    bool selfx = false;
    for (int Ni : {N / 4, N / 2, N}) {
        GridSum g = eval(Ni);
        selfx = selfx || g.self_intersection;
        rep.ladder.push_back(g.value);
    }
    rep.value = rep.ladder.back();
    if (selfx) {
        rep.divergent = true;
        rep.warnings.push_back("zero chord between distinct grid points: self-intersecting curve");
    }
    double d1 = rep.ladder[1] - rep.ladder[0];
    double d2 = rep.ladder[2] - rep.ladder[1];
    double floor = rep.rule.rel_floor * std::max(1.0, std::fabs(rep.value));
    if (std::fabs(d2) > floor) {
        if (std::fabs(d1) <= floor || d2 / d1 >= rep.rule.ratio_threshold) rep.divergent = true;
    }
    rep.runtime_s = now_s() - t0;
    return rep;
}

}  // namespace

nlohmann::json EnergyReport::to_json() const {
    nlohmann::json j;
    j["functional"] = functional;
    j["value"] = divergent ? nlohmann::json("inf") : nlohmann::json(value);
    j["finite_part"] = value;
    j["divergent"] = divergent;
    if (functional == "sobolev") {
        j["s"] = params.alpha;
    } else {
        j["alpha"] = params.alpha;
    }
    j["p"] = params.p;
    j["resolution"] = resolution;
    if (seed >= 0) j["seed"] = seed;
    j["runtime_s"] = runtime_s;
    if (!ladder.empty()) {
        j["ladder"] = ladder;
        j["divergence_rule"] = {{"ratio_threshold", rule.ratio_threshold},
                                {"rel_floor", rule.rel_floor}};
    }
    j["warnings"] = warnings;
    return j;
}

double integrand(const ClosedCurve& curve, double x, double y, const EnergyParams& params) {
    double L = curve.L;
    double xr = wrap(x, L), yr = wrap(y, L);
    if (xr == yr) throw std::domain_error("integrand: x = y (mod L)");
    double D = intrinsic_distance(xr, yr, L);
    double c2 = dist2(curve.eval(xr), curve.eval(yr));
    if (c2 == 0.0) return std::numeric_limits<double>::infinity();
    return kernel_M(c2, D, params);
}

EnergyReport ohara_energy(const ClosedCurve& curve, const EnergyParams& params, int N) {
    if (!curve.unit_speed)
        throw std::invalid_argument("ohara_energy: curve must be arc-length parametrized");
    return ladder_report("ohara", params, N,
                         [&](int Ni) { return grid_energy(curve, nullptr, params, Ni); });
}

EnergyReport weighted_ohara_energy(const ClosedCurve& curve, const Density& density,
                                   const EnergyParams& params, int N) {
    if (!curve.unit_speed)
        throw std::invalid_argument("weighted_ohara_energy: curve must be arc-length parametrized");
    if (std::fabs(density.L() - curve.L) > 1e-9 * curve.L)
        throw std::invalid_argument("weighted_ohara_energy: density period != curve length");
    EnergyReport rep = ladder_report("ohara-weighted", params, N, [&](int Ni) {
        return grid_energy(curve, &density, params, Ni);
    });
    return rep;
}

EnergyReport random_ohara_energy(const ClosedCurve& curve, const SampleSet& S,
                                 const EnergyParams& params) {
    if (!curve.unit_speed)
        throw std::invalid_argument("random_ohara_energy: curve must be arc-length parametrized");
    double t0 = now_s();
    int n = S.n;
    double L = curve.L;
    EnergyReport rep;
    rep.functional = "ohara-random";
    rep.params = params;
    rep.resolution = n;
    rep.seed = static_cast<long long>(S.seed);

    // sorted evaluation order makes the sum exactly permutation invariant
    std::vector<double> X(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) X[static_cast<size_t>(i)] = S.sorted(i);
    for (int i = 1; i < n; ++i)
        if (X[static_cast<size_t>(i)] == X[static_cast<size_t>(i - 1)])
            throw std::invalid_argument("random_ohara_energy: duplicate samples");

    std::vector<Vec> P(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) P[static_cast<size_t>(i)] = curve.eval(X[static_cast<size_t>(i)]);

    double drop = NEAR_PAIR_FRACTION * L;
    std::vector<double> rows(static_cast<size_t>(n), 0.0);
    std::vector<int> dropped(static_cast<size_t>(n), 0);
    std::vector<char> bad(static_cast<size_t>(n), 0);
    parallel_for(static_cast<size_t>(n), [&](size_t i) {
        double acc = 0;
        int drops = 0;
        for (int j = 0; j < n; ++j) {
            if (static_cast<size_t>(j) == i) continue;
            double D = intrinsic_distance(X[i], X[static_cast<size_t>(j)], L);
            if (D < drop) {
                ++drops;
                continue;
            }
            double c2 = dist2(P[i], P[static_cast<size_t>(j)]);
            if (c2 == 0.0) {
                bad[i] = 1;
                continue;
            }
            acc += kernel_M(c2, D, params);
        }
        rows[i] = acc;
        dropped[i] = drops;
    });
    rep.value = tree_sum(std::move(rows)) / (static_cast<double>(n) * n);
    long long total_drops = 0;
    for (int d : dropped) total_drops += d;
    for (char b : bad)
        if (b) {
            rep.divergent = true;
            rep.warnings.push_back("zero chord between distinct samples: self-intersecting curve");
            break;
        }
    if (total_drops > 0)
        rep.warnings.push_back("near pairs skipped (intrinsic distance < 1e-5 L): " +
                               std::to_string(total_drops));
    if (params.heavy_tail())
        rep.warnings.push_back("(alpha-2)p > 0.5: estimator variance diverges, expect heavy tails");
    rep.runtime_s = now_s() - t0;
    return rep;
}

EnergyReport kim_kusner_energy(const Polygon& P, KKVariant variant) {
    double t0 = now_s();
    int m = P.m();
    double L = P.total_length;
    EnergyReport rep;
    rep.functional = "kim-kusner";
    rep.params = EnergyParams{2.0, 1.0};
    rep.resolution = m;

    std::vector<double> w(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
        double right = P.edge_lengths[static_cast<size_t>(k)];
        double left = P.edge_lengths[static_cast<size_t>((k + m - 1) % m)];
        w[static_cast<size_t>(k)] = variant == KKVariant::Endpoint ? right : 0.5 * (left + right);
    }
    double total = 0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            double c2 = dist2(P.vertices[static_cast<size_t>(i)], P.vertices[static_cast<size_t>(j)]);
            double ds = std::fabs(P.cum_length[static_cast<size_t>(i)] -
                                  P.cum_length[static_cast<size_t>(j)]);
            double D = std::min(ds, L - ds);
            if (c2 == 0.0) {
                rep.divergent = true;
                rep.warnings.push_back("coincident non-consecutive vertices");
                continue;
            }
            double M = 1.0 / c2 - 1.0 / (D * D);
            if (M > 0) total += M * w[static_cast<size_t>(i)] * w[static_cast<size_t>(j)];
        }
    }
    rep.value = total;
    rep.runtime_s = now_s() - t0;
    return rep;
}

double segment_distance(const Vec& a0, const Vec& a1, const Vec& b0, const Vec& b1) {
    Vec d1 = a1 - a0, d2 = b1 - b0, r = a0 - b0;
    double a = dot(d1, d1), e = dot(d2, d2);
    if (a == 0.0 || e == 0.0) throw std::invalid_argument("segment_distance: zero-length segment");
    double f = dot(d2, r), c = dot(d1, r), b = dot(d1, d2);
    double denom = a * e - b * b;
    double s = 0;
    if (denom > 0) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
    double t = (b * s + f) / e;
    if (t < 0) {
        t = 0;
        s = std::clamp(-c / a, 0.0, 1.0);
    } else if (t > 1) {
        t = 1;
        s = std::clamp((b - c) / a, 0.0, 1.0);
    }
    return dist(a0 + s * d1, b0 + t * d2);
}

double simon_tilde_energy(const Polygon& P) {
    int m = P.m();
    double total = 0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            int dm = std::min(std::abs(i - j), m - std::abs(i - j));
            if (dm <= 1) continue;
            const Vec& a0 = P.vertices[static_cast<size_t>(i)];
            const Vec& a1 = P.vertices[static_cast<size_t>((i + 1) % m)];
            const Vec& b0 = P.vertices[static_cast<size_t>(j)];
            const Vec& b1 = P.vertices[static_cast<size_t>((j + 1) % m)];
            double d = segment_distance(a0, a1, b0, b1);
            if (d == 0.0) return std::numeric_limits<double>::infinity();
            total += P.edge_lengths[static_cast<size_t>(i)] * P.edge_lengths[static_cast<size_t>(j)] /
                     (d * d);
        }
    }
    return total;
}

namespace {
double regular_tilde_cached(int m) {
    static std::map<int, double> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;
    double v = simon_tilde_energy(curve_model::regular_ngon(m, 2, 1.0));
    cache[m] = v;
    return v;
}
}  // namespace

EnergyReport simon_energy(const Polygon& P) {
    double t0 = now_s();
    int m = P.m();
    if (m < 4) throw std::invalid_argument("simon_energy: m >= 4 required");
    EnergyReport rep;
    rep.functional = "simon";
    rep.resolution = m;
    rep.warnings.push_back("cyclic-adjacency convention: segments m and 1 count as adjacent");
    double tilde = simon_tilde_energy(P);
    if (std::isinf(tilde)) {
        rep.divergent = true;
        rep.warnings.push_back("touching non-adjacent segments");
        rep.value = 0;
    } else {
        rep.value = tilde - regular_tilde_cached(m) + 4.0;
    }
    rep.runtime_s = now_s() - t0;
    return rep;
}

namespace {

// Unit tangent at X of the circle through ordered triple (A, B, C), traversal
// oriented A -> B -> C; collinear triples degrade to the line direction.
Vec circumtangent(const Vec& A, const Vec& B, const Vec& C, const Vec& X) {
    Vec u = B - A;
    double nu = norm(u);
    Vec ca = C - A;
    double scale = nu + norm(ca);
    u *= 1.0 / nu;
    Vec wv = ca - dot(ca, u) * u;
    double nw = norm(wv);
    if (nw < 1e-12 * scale) return u;  // collinear: the "circle" is the line through A,B
    Vec v = wv * (1.0 / nw);
    // 2-D coordinates in the (u,v) plane with A at the origin; C has positive
    // v-coordinate, so A->B->C is counterclockwise and the tangent is the
    // +90-degree rotation of the radius.
    double bx = dot(B - A, u);
    double cx = dot(ca, u), cy = dot(ca, v);
    double den = 2.0 * (bx * cy);
    double b2 = bx * bx, c2 = cx * cx + cy * cy;
    double ox = cy * b2 / den;
    double oy = (bx * c2 - cx * b2) / den;
    double xx = dot(X - A, u), xy = dot(X - A, v);
    double rx = xx - ox, ry = xy - oy;
    double rn = std::sqrt(rx * rx + ry * ry);
    if (rn == 0.0) return u;
    double tx = -ry / rn, ty = rx / rn;
    Vec t = tx * u + ty * v;
    return t;
}

}  // namespace

EnergyReport cos_energy(const Polygon& P) {
    double t0 = now_s();
    int m = P.m();
    if (m < 4) throw std::invalid_argument("cos_energy: m >= 4 required");
    EnergyReport rep;
    rep.functional = "cos";
    rep.resolution = m;
    double total = 0;
    auto V = [&](int k) -> const Vec& { return P.vertices[static_cast<size_t>(((k % m) + m) % m)]; };
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            int dm = std::min(std::abs(i - j), m - std::abs(i - j));
            if (dm <= 1) continue;
            const Vec &Pi = V(i), &Pi1 = V(i + 1), &Pj = V(j), &Pj1 = V(j + 1);
            double dij = dist(Pi, Pj), di1j1 = dist(Pi1, Pj1);
            if (dij == 0.0 || di1j1 == 0.0) {
                rep.divergent = true;
                rep.warnings.push_back("coincident vertices in a circle triple");
                continue;
            }
            double factor = (P.edge_lengths[static_cast<size_t>(i)] *
                             P.edge_lengths[static_cast<size_t>(j)]) /
                            (dij * di1j1);
            // alpha: circles (Pi,Pi1,Pj) and (Pj,Pj1,Pi) at shared point Pj
            double ca = dot(circumtangent(Pi, Pi1, Pj, Pj), circumtangent(Pj, Pj1, Pi, Pj));
            // alpha~: circles (Pi,Pi1,Pj1) and (Pj,Pj1,Pi1) at shared point Pi1
            double cat = dot(circumtangent(Pi, Pi1, Pj1, Pi1), circumtangent(Pj, Pj1, Pi1, Pi1));
            double term = 1.0 - 0.5 * (ca + cat);
            if (term < 0) term = 0;  // cos rounding just past 1
            total += factor * term;
        }
    }
    rep.value = total;
    rep.runtime_s = now_s() - t0;
    return rep;
}

EnergyReport sobolev_seminorm(const ClosedCurve& curve, double s, double p, int N) {
    if (!(s > 0 && s < 1)) throw std::invalid_argument("sobolev_seminorm: s in (0,1) required");
    if (p < 1) throw std::invalid_argument("sobolev_seminorm: p >= 1 required");
    if (!curve.unit_speed)
        throw std::invalid_argument("sobolev_seminorm: curve must be arc-length parametrized");
    EnergyParams prm;
    prm.alpha = s;  // reported under the "s" key
    prm.p = p;
    double L = curve.L;
    auto eval = [&](int Ni) {
        double h = L / Ni;
        std::vector<Vec> T(static_cast<size_t>(Ni));
        Vec prev = curve.eval(0.0);
        for (int k = 0; k < Ni; ++k) {
            Vec next = curve.eval((k + 1) * h);
            T[static_cast<size_t>(k)] = (next - prev) * (1.0 / h);
            prev = next;
        }
        std::vector<double> rows(static_cast<size_t>(Ni), 0.0);
        parallel_for(static_cast<size_t>(Ni), [&](size_t i) {
            double acc = 0;
            for (int k = 1; k < Ni; ++k) {
                double w = std::min(k, Ni - k) * h;
                double diff2 = dist2(T[i], T[(i + static_cast<size_t>(k)) % static_cast<size_t>(Ni)]);
                double num = p == 2.0 ? diff2 : std::pow(diff2, 0.5 * p);
                acc += num / std::pow(w, 1.0 + p * s);
            }
            rows[i] = acc;
        });
        GridSum g;
        g.value = tree_sum(std::move(rows)) * h * h;
        return g;
    };
    EnergyReport rep = ladder_report("sobolev", prm, N, eval);
    rep.functional = "sobolev";
    return rep;
}

nlohmann::json BlattReport::to_json() const {
    nlohmann::json j;
    j["energy"] = energy.to_json();
    j["tangent_seminorm"] = seminorm.to_json();
    j["tangent_lp_norm"] = tangent_lp_norm;
    j["energy_finite"] = !energy.divergent;
    j["seminorm_finite"] = !seminorm.divergent;
    j["verdicts_agree"] = verdicts_agree;
    return j;
}

BlattReport blatt_report(const ClosedCurve& curve, const EnergyParams& params, int N) {
    if (!params.in_blatt_range())
        throw std::domain_error("blatt_report: need p >= 1 and 2 <= alpha p < 2p + 1");
    BlattReport rep;
    rep.energy = ohara_energy(curve, params, N);
    rep.seminorm = sobolev_seminorm(curve, params.s(), 2.0 * params.p, N);
    double L = curve.L, h = L / N;
    double acc = 0;
    Vec prev = curve.eval(0.0);
    for (int k = 0; k < N; ++k) {
        Vec next = curve.eval((k + 1) * h);
        double sp2 = dist2(next, prev) / (h * h);
        acc += h * std::pow(sp2, params.p);  // |t|^(2p) = (|t|^2)^p
        prev = next;
    }
    rep.tangent_lp_norm = acc;
    rep.verdicts_agree = rep.energy.divergent == rep.seminorm.divergent;
    return rep;
}

}  // namespace kel::energies
