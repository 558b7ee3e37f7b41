#include "kel/curve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace kel::curve_model {

namespace {

constexpr double PI = std::numbers::pi;

// Gauss-Legendre 5 on [0,1].
constexpr double GL5_X[5] = {0.046910077030668, 0.230765344947158, 0.5,
                             0.769234655052842, 0.953089922969332};
constexpr double GL5_W[5] = {0.118463442528095, 0.239314335249683, 0.284444444444444,
                             0.239314335249683, 0.118463442528095};

// Monotone cubic (Fritsch-Carlson) through strictly increasing knots.
struct Pchip {
    std::vector<double> x, y, m;  // knots and node slopes

    void build(std::vector<double> xs, std::vector<double> ys) {
        x = std::move(xs);
        y = std::move(ys);
        size_t n = x.size();
        if (n < 2) throw std::invalid_argument("pchip: need >= 2 knots");
        std::vector<double> d(n - 1), h(n - 1);
        for (size_t i = 0; i + 1 < n; ++i) {
            h[i] = x[i + 1] - x[i];
            if (h[i] <= 0) throw std::invalid_argument("pchip: knots not increasing");
            d[i] = (y[i + 1] - y[i]) / h[i];
        }
        m.assign(n, 0.0);
        for (size_t i = 1; i + 1 < n; ++i) {
            if (d[i - 1] * d[i] <= 0) {
                m[i] = 0.0;
            } else {
                double w1 = 2 * h[i] + h[i - 1], w2 = h[i] + 2 * h[i - 1];
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        auto end_slope = [](double h0, double h1, double d0, double d1) {
            double s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if (s * d0 <= 0) s = 0;
            else if (d0 * d1 <= 0 && std::fabs(s) > 3 * std::fabs(d0)) s = 3 * d0;
            return s;
        };
        if (n == 2) {
            m[0] = m[1] = d[0];
        } else {
            m[0] = end_slope(h[0], h[1], d[0], d[1]);
            m[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
        }
    }

    double eval(double t) const {
        size_t n = x.size();
        if (t <= x.front()) t = x.front();
        if (t >= x.back()) t = x.back();
        size_t lo = static_cast<size_t>(std::upper_bound(x.begin(), x.end(), t) - x.begin());
        if (lo > 0) --lo;
        if (lo >= n - 1) lo = n - 2;
        double h = x[lo + 1] - x[lo], s = (t - x[lo]) / h;
        double s2 = s * s, s3 = s2 * s;
        double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
        double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        return h00 * y[lo] + h * h10 * m[lo] + h01 * y[lo + 1] + h * h11 * m[lo + 1];
    }
};

// Periodic cubic spline on a uniform grid, one scalar channel.
struct PeriodicSpline {
    std::vector<double> y, M;  // values and second derivatives at knots
    double h = 1;

    void build(const std::vector<double>& ys, double spacing) {
        y = ys;
        h = spacing;
        size_t n = y.size();
        M.assign(n, 0.0);
        if (n < 3) return;
        // cyclic tridiagonal [1 4 1] * M = rhs via Sherman-Morrison
        std::vector<double> rhs(n);
        for (size_t i = 0; i < n; ++i) {
            double ym = y[(i + n - 1) % n], yp = y[(i + 1) % n];
            rhs[i] = 6.0 * (ym - 2 * y[i] + yp) / (h * h);
        }
        const double a = 1.0, b = 4.0;
        double gamma = -b;
        std::vector<double> bb(n, b), u(n, 0.0);
        bb[0] = b - gamma;
        bb[n - 1] = b - a * a / gamma;
        u[0] = gamma;
        u[n - 1] = a;
        auto solve_tri = [&](std::vector<double> r) {
            std::vector<double> c(n), xsol(n);
            c[0] = a / bb[0];
            r[0] /= bb[0];
            for (size_t i = 1; i < n; ++i) {
                double mden = bb[i] - a * c[i - 1];
                c[i] = a / mden;
                r[i] = (r[i] - a * r[i - 1]) / mden;
            }
            xsol[n - 1] = r[n - 1];
            for (size_t i = n - 1; i-- > 0;) xsol[i] = r[i] - c[i] * xsol[i + 1];
            return xsol;
        };
        std::vector<double> sol1 = solve_tri(rhs), sol2 = solve_tri(u);
        double fact = (sol1[0] + a * sol1[n - 1] / gamma) /
                      (1.0 + sol2[0] + a * sol2[n - 1] / gamma);
        for (size_t i = 0; i < n; ++i) M[i] = sol1[i] - fact * sol2[i];
    }

    double eval(double t) const {  // t in knot units of h, periodic
        size_t n = y.size();
        double period = h * static_cast<double>(n);
        double tt = std::fmod(t, period);
        if (tt < 0) tt += period;
        size_t i = static_cast<size_t>(tt / h);
        if (i >= n) i = n - 1;
        double s = tt - static_cast<double>(i) * h;
        size_t j = (i + 1) % n;
        double A = (h - s) / h, B = s / h;
        return A * y[i] + B * y[j] +
               ((A * A * A - A) * M[i] + (B * B * B - B) * M[j]) * h * h / 6.0;
    }
};

Vec fd_point_deriv(const std::function<Vec(double)>& f, double t, double dt) {
    Vec a = f(t + dt), b = f(t - dt);
    Vec r = a - b;
    r *= 1.0 / (2 * dt);
    return r;
}

}  // namespace

Polygon Polygon::from_vertices(std::vector<Vec> vs) {
    if (vs.size() < 3) throw std::invalid_argument("polygon: need m >= 3 vertices");
    Polygon P;
    P.dim = vs[0].d;
    for (auto& v : vs)
        if (v.d != P.dim) throw std::invalid_argument("polygon: mixed dimensions");
    P.vertices = std::move(vs);
    int m = P.m();
    P.edge_lengths.resize(static_cast<size_t>(m));
    P.cum_length.assign(static_cast<size_t>(m) + 1, 0.0);
    for (int k = 0; k < m; ++k) {
        double e = dist(P.vertices[static_cast<size_t>(k)],
                        P.vertices[static_cast<size_t>((k + 1) % m)]);
        if (e <= 0.0) throw std::invalid_argument("polygon: repeated consecutive vertices");
        P.edge_lengths[static_cast<size_t>(k)] = e;
        P.cum_length[static_cast<size_t>(k) + 1] = P.cum_length[static_cast<size_t>(k)] + e;
    }
    P.total_length = P.cum_length[static_cast<size_t>(m)];
    return P;
}

ClosedCurve make_circle(double L, int d) {
    if (L <= 0) throw std::invalid_argument("make_circle: L must be positive");
    if (d < 2 || d > KMAXDIM) throw std::invalid_argument("make_circle: dimension out of range");
    double R = L / (2 * PI);
    ClosedCurve c;
    c.L = L;
    c.dim = d;
    c.kind = "circle";
    c.unit_speed = true;
    c.eval_fn = [R, d](double x) {
        Vec p(d);
        p[0] = R * std::cos(x / R);
        p[1] = R * std::sin(x / R);
        return p;
    };
    return c;
}

ClosedCurve make_ellipse(double a, double b, int d, int grid) {
    if (a <= 0 || b <= 0) throw std::invalid_argument("make_ellipse: axes must be positive");
    if (d < 2 || d > KMAXDIM) throw std::invalid_argument("make_ellipse: dimension out of range");
    ClosedCurve raw;
    raw.L = 2 * PI;
    raw.dim = d;
    raw.kind = "ellipse";
    raw.eval_fn = [a, b, d](double t) {
        Vec p(d);
        p[0] = a * std::cos(t);
        p[1] = b * std::sin(t);
        return p;
    };
    ClosedCurve c = arclength_reparametrize(raw, grid, 1e-3);
    c.kind = "ellipse";
    return c;
}

ClosedCurve make_torus_knot(int p, int q, double R, double r, int grid) {
    if (std::gcd(std::abs(p), std::abs(q)) != 1)
        throw std::invalid_argument("make_torus_knot: gcd(p,q) must be 1");
    if (!(R > r && r > 0)) throw std::invalid_argument("make_torus_knot: need R > r > 0");
    ClosedCurve raw;
    raw.L = 2 * PI;
    raw.dim = 3;
    raw.kind = "torus_knot";
    double dp = p, dq = q;
    raw.eval_fn = [dp, dq, R, r](double t) {
        double w = R + r * std::cos(dq * t);
        return Vec(w * std::cos(dp * t), w * std::sin(dp * t), r * std::sin(dq * t));
    };
    ClosedCurve c = arclength_reparametrize(raw, grid, 1e-4);
    c.kind = "torus_knot";
    if (std::abs(p) <= 1 || std::abs(q) <= 1) c.note = "unknotted";
    return c;
}

ClosedCurve polygon_as_curve(const Polygon& P) {
    if (P.m() < 3 || P.total_length <= 0)
        throw std::invalid_argument("polygon_as_curve: degenerate polygon");
    ClosedCurve c;
    c.L = P.total_length;
    c.dim = P.dim;
    c.kind = "polygonal";
    c.unit_speed = true;
    auto verts = P.vertices;
    auto cum = P.cum_length;
    auto el = P.edge_lengths;
    int m = P.m();
    c.eval_fn = [verts, cum, el, m](double x) {
        auto it = std::upper_bound(cum.begin(), cum.end(), x);
        int k = static_cast<int>(it - cum.begin()) - 1;
        if (k < 0) k = 0;
        if (k >= m) k = m - 1;
        double t = (x - cum[static_cast<size_t>(k)]) / el[static_cast<size_t>(k)];
        const Vec& a = verts[static_cast<size_t>(k)];
        const Vec& b = verts[static_cast<size_t>((k + 1) % m)];
        return a + t * (b - a);
    };
    return c;
}

ClosedCurve make_tabulated(const std::vector<Vec>& pts, int grid, double tol) {
    if (pts.size() < 3) throw std::invalid_argument("make_tabulated: need >= 3 points");
    int d = pts[0].d;
    size_t n = pts.size();
    std::vector<PeriodicSpline> ch(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) {
        std::vector<double> ys(n);
        for (size_t i = 0; i < n; ++i) ys[i] = pts[i][k];
        ch[static_cast<size_t>(k)].build(ys, 1.0);
    }
    ClosedCurve raw;
    raw.L = static_cast<double>(n);
    raw.dim = d;
    raw.kind = "tabulated";
    raw.eval_fn = [ch, d](double t) {
        Vec p(d);
        for (int k = 0; k < d; ++k) p[k] = ch[static_cast<size_t>(k)].eval(t);
        return p;
    };
    ClosedCurve c = arclength_reparametrize(raw, grid, tol);
    c.kind = "tabulated";
    return c;
}

ClosedCurve arclength_reparametrize(const ClosedCurve& c, int N, double tol) {
    if (c.unit_speed) return c;
    if (N < 16) throw std::invalid_argument("arclength_reparametrize: grid too small");
    double T = c.L;
    double dt_fd = 1e-6 * T;
    auto f = c.eval_fn;
    auto fw = [&f, T](double t) { return f(wrap(t, T)); };
    auto speed = [&](double t) { return norm(fd_point_deriv(fw, t, dt_fd)); };
    std::vector<double> S(static_cast<size_t>(N) + 1, 0.0), tk(static_cast<size_t>(N) + 1);
    double ht = T / N;
    for (int k = 0; k <= N; ++k) tk[static_cast<size_t>(k)] = k * ht;
    for (int k = 0; k < N; ++k) {
        double a = tk[static_cast<size_t>(k)], acc = 0;
        for (int g = 0; g < 5; ++g) acc += GL5_W[g] * speed(a + GL5_X[g] * ht);
        S[static_cast<size_t>(k) + 1] = S[static_cast<size_t>(k)] + acc * ht;
    }
    double Ltot = S[static_cast<size_t>(N)];
    if (!(Ltot > 0) || !std::isfinite(Ltot))
        throw std::runtime_error("arclength_reparametrize: invalid cumulative length");
    auto inv = std::make_shared<Pchip>();
    inv->build(S, tk);
    ClosedCurve out;
    out.L = Ltot;
    out.dim = c.dim;
    out.kind = c.kind;
    out.note = c.note;
    out.unit_speed = true;
    auto rawf = c.eval_fn;
    out.eval_fn = [inv, rawf, T](double x) { return rawf(wrap(inv->eval(x), T)); };

    int check = std::min(N, 4096);
    double hx = Ltot / check, worst = 0;
    for (int k = 0; k < check; ++k) {
        double x = (k + 0.5) * hx;
        double sp = dist(out.eval(x + 1e-6 * Ltot), out.eval(x - 1e-6 * Ltot)) / (2e-6 * Ltot);
        worst = std::max(worst, std::fabs(sp - 1.0));
    }
    if (worst > tol) {
        std::ostringstream os;
        os << "arclength_reparametrize: speed deviation " << worst << " exceeds tol " << tol
           << " at N=" << N;
        throw std::runtime_error(os.str());
    }
    return out;
}

Polygon regular_ngon(int m, int d, double circumradius) {
    if (m < 3) throw std::invalid_argument("regular_ngon: m >= 3");
    std::vector<Vec> vs;
    vs.reserve(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
        Vec v(d);
        v[0] = circumradius * std::cos(2 * PI * k / m);
        v[1] = circumradius * std::sin(2 * PI * k / m);
        vs.push_back(v);
    }
    return Polygon::from_vertices(std::move(vs));
}

Polygon load_polygon_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open polygon file: " + path);
    std::vector<Vec> vs;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<double> coords;
        double val;
        while (ls >> val) coords.push_back(val);
        if (coords.empty()) continue;
        if (coords.size() < 2 || coords.size() > KMAXDIM)
            throw std::runtime_error("polygon file: bad coordinate count in line: " + line);
        Vec v(static_cast<int>(coords.size()));
        for (size_t i = 0; i < coords.size(); ++i) v[static_cast<int>(i)] = coords[i];
        vs.push_back(v);
    }
    return Polygon::from_vertices(std::move(vs));
}

ClosedCurve curve_from_json(const nlohmann::json& j, const std::string& base_dir) {
    std::string kind = j.at("kind").get<std::string>();
    auto resolve = [&](const std::string& f) {
        if (!base_dir.empty() && !f.empty() && f[0] != '/') return base_dir + "/" + f;
        return f;
    };
    if (kind == "circle") {
        double L = j.value("length", 2 * PI);
        int d = j.value("dim", 2);
        return make_circle(L, d);
    }
    if (kind == "ellipse") {
        return make_ellipse(j.at("a").get<double>(), j.at("b").get<double>(), j.value("dim", 2),
                            j.value("grid", 4096));
    }
    if (kind == "torus_knot") {
        return make_torus_knot(j.at("p").get<int>(), j.at("q").get<int>(), j.at("R").get<double>(),
                               j.at("r").get<double>(), j.value("grid", 8192));
    }
    if (kind == "polygon") {
        return polygon_as_curve(load_polygon_file(resolve(j.at("file").get<std::string>())));
    }
    if (kind == "tabulated") {
        Polygon P = load_polygon_file(resolve(j.at("file").get<std::string>()));
        return make_tabulated(P.vertices, j.value("grid", 4096), j.value("tol", 1e-3));
    }
    throw std::invalid_argument("unknown curve kind: " + kind);
}

}  // namespace kel::curve_model
