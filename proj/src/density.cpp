#include "kel/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "kel/geom.hpp"

namespace kel::sampling {

namespace {
constexpr double TWO_PI = 2 * std::numbers::pi;
}

Density Density::uniform(double L) {
    if (L <= 0) throw std::invalid_argument("density: L must be positive");
    Density d;
    d.kind_ = Kind::Uniform;
    d.L_ = L;
    d.lower_bound_ = 1.0 / L;
    return d;
}

Density Density::cosine(double c, double L) {
    if (L <= 0) throw std::invalid_argument("density: L must be positive");
    if (!(std::fabs(c) < 1.0))
        throw std::invalid_argument("cosine density: need |c| < 1 for a positive lower bound");
    Density d;
    d.kind_ = Kind::Cosine;
    d.L_ = L;
    d.c_ = c;
    d.lower_bound_ = (1.0 - std::fabs(c)) / L;
    return d;
}

Density Density::tabulated(std::vector<double> xs, std::vector<double> rhos, double L) {
    if (L <= 0) throw std::invalid_argument("density: L must be positive");
    if (xs.size() != rhos.size() || xs.size() < 2)
        throw std::invalid_argument("tabulated density: need >= 2 matching knots");
    for (size_t i = 0; i + 1 < xs.size(); ++i)
        if (!(xs[i] < xs[i + 1]))
            throw std::invalid_argument("tabulated density: knots must be strictly increasing");
    if (xs.front() < 0 || xs.back() >= L)
        throw std::invalid_argument("tabulated density: knots must lie in [0, L)");
    for (double r : rhos)
        if (r < 0) throw std::invalid_argument("tabulated density: negative pdf value");

    Density d;
    d.kind_ = Kind::Tabulated;
    d.L_ = L;
    // close the cycle: repeat first knot at x0 + L
    xs.push_back(xs.front() + L);
    rhos.push_back(rhos.front());
    d.tx_ = std::move(xs);
    d.trho_ = std::move(rhos);
    size_t n = d.tx_.size();
    d.tcdf_.assign(n, 0.0);
    for (size_t i = 0; i + 1 < n; ++i) {
        double h = d.tx_[i + 1] - d.tx_[i];
        d.tcdf_[i + 1] = d.tcdf_[i] + 0.5 * (d.trho_[i] + d.trho_[i + 1]) * h;
    }
    double total = d.tcdf_.back();
    if (std::fabs(total - 1.0) > 1e-10)
        throw std::invalid_argument("tabulated density: pdf integrates to " +
                                    std::to_string(total) + ", not 1");
    d.lower_bound_ = *std::min_element(d.trho_.begin(), d.trho_.end());
    return d;
}

Density Density::tabulated_file(const std::string& path, double L) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open density file: " + path);
    std::vector<double> xs, rhos;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double x, r;
        if (ls >> x >> r) {
            xs.push_back(x);
            rhos.push_back(r);
        }
    }
    return tabulated(std::move(xs), std::move(rhos), L);
}

double Density::pdf(double x) const {
    x = wrap(x, L_);
    switch (kind_) {
        case Kind::Uniform:
            return 1.0 / L_;
        case Kind::Cosine:
            return (1.0 + c_ * std::cos(TWO_PI * x / L_)) / L_;
        case Kind::Tabulated: {
            // shift into the knot window [x0, x0 + L)
            double xx = x;
            if (xx < tx_.front()) xx += L_;
            auto it = std::upper_bound(tx_.begin(), tx_.end(), xx);
            size_t i = static_cast<size_t>(it - tx_.begin());
            if (i > 0) --i;
            if (i >= tx_.size() - 1) i = tx_.size() - 2;
            double t = (xx - tx_[i]) / (tx_[i + 1] - tx_[i]);
            return trho_[i] + t * (trho_[i + 1] - trho_[i]);
        }
    }
    return 0;
}

double Density::cdf(double x) const {
    if (x <= 0) return 0;
    if (x >= L_) return 1;
    switch (kind_) {
        case Kind::Uniform:
            return x / L_;
        case Kind::Cosine:
            return x / L_ + (c_ / TWO_PI) * std::sin(TWO_PI * x / L_);
        case Kind::Tabulated: {
            // prefix integral G over the knot window [x0, x0+L); F(x) = G(lift(x)) - G(lift(0)) mod 1
            double x0 = tx_.front();
            auto G = [&](double xx) {
                auto it = std::upper_bound(tx_.begin(), tx_.end(), xx);
                size_t i = static_cast<size_t>(it - tx_.begin());
                if (i > 0) --i;
                if (i >= tx_.size() - 1) i = tx_.size() - 2;
                double h = tx_[i + 1] - tx_[i], s = xx - tx_[i];
                double slope = (trho_[i + 1] - trho_[i]) / h;
                return tcdf_[i] + trho_[i] * s + 0.5 * slope * s * s;
            };
            double val = G(x >= x0 ? x : x + L_);
            double f0 = G(x0 > 0 ? L_ : 0.0);
            double r = val - f0;
            if (r < 0) r += 1.0;
            return r;
        }
    }
    return 0;
}

double Density::inverse_cdf(double u) const {
    if (u < 0 || u >= 1) {
        if (u == 1.0) u = std::nextafter(1.0, 0.0);
        else throw std::invalid_argument("inverse_cdf: u must be in [0,1)");
    }
    switch (kind_) {
        case Kind::Uniform:
            return u * L_;
        case Kind::Cosine: {
            // Newton with bisection safeguard on F(x) - u
            double lo = 0, hi = L_, x = u * L_;
            for (int it = 0; it < 100; ++it) {
                double F = x / L_ + (c_ / TWO_PI) * std::sin(TWO_PI * x / L_) - u;
                if (F > 0) hi = x;
                else lo = x;
                double f = pdf(x);
                double step = F / f;
                double xn = x - step;
                if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
                if (std::fabs(xn - x) < 1e-16 * L_) return wrap(xn, L_);
                x = xn;
            }
            return wrap(x, L_);
        }
        case Kind::Tabulated: {
            // shift into the knot window's own CDF, locate the cell, solve the quadratic
            if (tx_.front() > 0) {
                u -= cdf(tx_.front());
                if (u < 0) u += 1;
            }
            auto it = std::upper_bound(tcdf_.begin(), tcdf_.end(), u);
            size_t i = static_cast<size_t>(it - tcdf_.begin());
            if (i > 0) --i;
            if (i >= tcdf_.size() - 1) i = tcdf_.size() - 2;
            double du = u - tcdf_[i];
            double h = tx_[i + 1] - tx_[i];
            double r0 = trho_[i], slope = (trho_[i + 1] - trho_[i]) / h;
            double s;
            if (std::fabs(slope) < 1e-14) {
                s = (r0 > 0) ? du / r0 : 0.0;
            } else {
                double disc = r0 * r0 + 2 * slope * du;
                s = (-r0 + std::sqrt(std::max(0.0, disc))) / slope;
            }
            s = std::clamp(s, 0.0, h);
            return wrap(tx_[i] + s, L_);
        }
    }
    return 0;
}

nlohmann::json Density::descriptor() const {
    switch (kind_) {
        case Kind::Uniform:
            return {{"kind", "uniform"}};
        case Kind::Cosine:
            return {{"kind", "cosine"}, {"c", c_}};
        case Kind::Tabulated: {
            nlohmann::json j;
            j["kind"] = "tabulated";
            j["knots"] = static_cast<int>(tx_.size()) - 1;
            return j;
        }
    }
    return {};
}

Density Density::from_json(const nlohmann::json& j, double L, const std::string& base_dir) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "uniform") return uniform(L);
    if (kind == "cosine") return cosine(j.at("c").get<double>(), L);
    if (kind == "tabulated") {
        std::string f = j.at("file").get<std::string>();
        if (!base_dir.empty() && !f.empty() && f[0] != '/') f = base_dir + "/" + f;
        return tabulated_file(f, L);
    }
    throw std::invalid_argument("unknown density kind: " + kind);
}

}  // namespace kel::sampling
