#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kel/geom.hpp"
#include "json.hpp"

namespace kel::curve_model {

// Closed curve over R/LZ. L is the parameter period; when unit_speed is set
// it coincides with the arc length. eval accepts any real x and reduces it.
struct ClosedCurve {
    double L = 0;
    int dim = 0;
    std::string kind;
    std::string note;  // extra flags, e.g. "unknotted"
    bool unit_speed = false;
    std::function<Vec(double)> eval_fn;

    Vec eval(double x) const { return eval_fn(wrap(x, L)); }
};

struct Polygon {
    std::vector<Vec> vertices;
    std::vector<double> edge_lengths;  // edge k joins vertex k to k+1 (mod m)
    std::vector<double> cum_length;    // size m+1, cum_length[m] = total
    double total_length = 0;
    int dim = 0;

    int m() const { return static_cast<int>(vertices.size()); }
    static Polygon from_vertices(std::vector<Vec> vs);
};

ClosedCurve make_circle(double L, int d = 2);
ClosedCurve make_ellipse(double a, double b, int d = 2, int grid = 4096);
ClosedCurve make_torus_knot(int p, int q, double R, double r, int grid = 8192);
ClosedCurve polygon_as_curve(const Polygon& P);

// Periodic cubic spline through the given points (uniform parameter), then
// arc-length reparametrized.
ClosedCurve make_tabulated(const std::vector<Vec>& pts, int grid = 4096, double tol = 1e-3);

// Cumulative-length inversion on an N-interval grid with monotone cubic
// interpolation. Throws if the finite-difference speed check misses tol.
ClosedCurve arclength_reparametrize(const ClosedCurve& c, int N, double tol);

Polygon regular_ngon(int m, int d = 2, double circumradius = 1.0);

// One vertex per line, whitespace-separated coordinates, '#' comments,
// implicit closure from last vertex back to the first.
Polygon load_polygon_file(const std::string& path);

// {"kind":"circle","length":6.2832,"dim":3} | {"kind":"ellipse","a":2,"b":1}
// | {"kind":"torus_knot","p":2,"q":3,"R":2.0,"r":0.5}
// | {"kind":"polygon","file":"path"} | {"kind":"tabulated","file":"path"}
ClosedCurve curve_from_json(const nlohmann::json& j, const std::string& base_dir = "");

}  // namespace kel::curve_model
