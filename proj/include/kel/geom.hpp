#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace kel {

// Small fixed-capacity point/vector in R^d, d <= KMAXDIM. No heap traffic in
// the pair loops.
inline constexpr int KMAXDIM = 8;

struct Vec {
    std::array<double, KMAXDIM> v{};
    int d = 0;

    Vec() = default;
    explicit Vec(int dim) : d(dim) {}
    Vec(double x, double y) : d(2) { v[0] = x; v[1] = y; }
    Vec(double x, double y, double z) : d(3) { v[0] = x; v[1] = y; v[2] = z; }

    double& operator[](int i) { return v[static_cast<size_t>(i)]; }
    double operator[](int i) const { return v[static_cast<size_t>(i)]; }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < d; ++i) v[i] += o.v[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < d; ++i) v[i] -= o.v[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < d; ++i) v[i] *= s;
        return *this;
    }
};

inline Vec operator+(Vec a, const Vec& b) { return a += b; }
inline Vec operator-(Vec a, const Vec& b) { return a -= b; }
inline Vec operator*(double s, Vec a) { return a *= s; }
inline Vec operator*(Vec a, double s) { return a *= s; }

inline double dot(const Vec& a, const Vec& b) {
    double s = 0;
    for (int i = 0; i < a.d; ++i) s += a.v[i] * b.v[i];
    return s;
}

inline double norm2(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(norm2(a)); }

inline double dist2(const Vec& a, const Vec& b) {
    double s = 0;
    for (int i = 0; i < a.d; ++i) {
        double t = a.v[i] - b.v[i];
        s += t * t;
    }
    return s;
}

inline double dist(const Vec& a, const Vec& b) { return std::sqrt(dist2(a, b)); }

inline Vec normalized(const Vec& a) {
    double n = norm(a);
    if (n == 0.0) throw std::domain_error("normalized: zero vector");
    Vec r = a;
    r *= 1.0 / n;
    return r;
}

// Canonical representative in [0, L). All wraparound arithmetic funnels
// through here.
inline double wrap(double x, double L) {
    double r = std::fmod(x, L);
    if (r < 0) r += L;
    if (r == L) r = 0;  // fmod can return L-eps rounding to L after +=
    return r;
}

// Shorter-arc distance on R/LZ.
inline double intrinsic_distance(double x, double y, double L) {
    double a = std::fabs(wrap(x, L) - wrap(y, L));
    return std::min(a, L - a);
}

}  // namespace kel
