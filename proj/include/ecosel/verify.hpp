#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "ecosel/errors.hpp"

namespace ecosel {

/// Log marginal likelihood computed by a second, independent route: the
/// Gaussian integral over intercept and slopes is done analytically, the
/// sigma^2 integral numerically (adaptive Gauss-Kronrod in t = log sigma^2).
/// Shares no code with log_ml_value; used to cross-check the closed form.
/// Improper-prior constants are taken as 1 on both routes, so log Bayes
/// factors are directly comparable.
inline double quadrature_log_ml(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double g) {
  const int n = static_cast<int>(y.size());
  const int k = static_cast<int>(X.cols());
  if (k > 0 && X.rows() != n) throw_config("design and response sizes differ");
  if (n < k + 4) throw_data("quadrature oracle needs n >= k + 4");

  const double ybar = y.mean();
  const Eigen::VectorXd yc = y.array() - ybar;

  // Integrating the flat intercept and the g-prior slopes leaves
  //   m(y | sigma^2) = (2 pi sigma^2)^(-(n-1)/2) n^(-1/2) (1+g)^(-k/2)
  //                    exp(-Q / (2 sigma^2)),
  // with Q the residual quadratic form after completing the square.
  double Q = yc.squaredNorm();
  if (k > 0) {
    const Eigen::RowVectorXd xbar = X.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - xbar;
    const Eigen::MatrixXd M = Xc.transpose() * Xc;
    const Eigen::VectorXd h = Xc.transpose() * yc;
    const Eigen::MatrixXd Minv = M.inverse();
    Q -= (g / (1.0 + g)) * h.dot(Minv * h);
  }
  if (!(Q > 0.0)) throw_numeric("degenerate residual in quadrature oracle");

  const double half_nm1 = 0.5 * (n - 1);
  const double log_const =
      -half_nm1 * std::log(2.0 * M_PI) - 0.5 * std::log(static_cast<double>(n)) - 0.5 * k * std::log1p(g);

  // f(t) = -(n-1)/2 * t - Q e^-t / 2 with t = log sigma^2 (the sigma^-2 prior
  // becomes flat in t). Integrate exp(f - f(t*)) over the real line, t* at
  // the mode.
  const double t_star = std::log(Q / (n - 1));
  const double f_star = -half_nm1 * t_star - 0.5 * Q * std::exp(-t_star);
  auto integrand = [&](double t) {
    return std::exp(-half_nm1 * t - 0.5 * Q * std::exp(-t) - f_star);
  };
  double abs_err = 0.0;
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 15,
      1e-12, &abs_err);
  return log_const + f_star + std::log(integral);
}

/// Log Bayes factor of design X1 against X2 on the same response, both by
/// the quadrature route.
inline double quadrature_log_bf(const Eigen::VectorXd& y, const Eigen::MatrixXd& X1,
                                const Eigen::MatrixXd& X2, double g) {
  return quadrature_log_ml(y, X1, g) - quadrature_log_ml(y, X2, g);
}

}  // namespace ecosel
