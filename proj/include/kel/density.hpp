#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace kel::sampling {

// Probability density on R/LZ with exact CDF and inverse CDF.
class Density {
  public:
    enum class Kind { Uniform, Cosine, Tabulated };

    static Density uniform(double L);
    static Density cosine(double c, double L);  // rho = (1 + c cos(2 pi x / L)) / L, |c| < 1
    // Piecewise-linear pdf through (x_k, rho_k) knots, periodic wrap; must
    // integrate to 1 within 1e-10.
    static Density tabulated(std::vector<double> xs, std::vector<double> rhos, double L);
    static Density tabulated_file(const std::string& path, double L);

    Kind kind() const { return kind_; }
    double L() const { return L_; }
    double lower_bound() const { return lower_bound_; }
    double cosine_c() const { return c_; }

    double pdf(double x) const;
    double cdf(double x) const;          // F(0) = 0, F(L) = 1, cut at 0
    double inverse_cdf(double u) const;  // u in [0,1) -> x in [0,L)

    nlohmann::json descriptor() const;
    static Density from_json(const nlohmann::json& j, double L, const std::string& base_dir = "");

  private:
    Kind kind_ = Kind::Uniform;
    double L_ = 1;
    double c_ = 0;
    double lower_bound_ = 0;
    std::vector<double> tx_, trho_, tcdf_;  // tabulated knots, values, prefix CDF
};

}  // namespace kel::sampling
