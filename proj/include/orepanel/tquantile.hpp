#pragma once

namespace orepanel {

// Regularized incomplete beta function I_x(a, b).
double reg_incomplete_beta(double a, double b, double x);

// Inverse of I_x(a, b) in x, to 1e-10 (bisection with Newton refinement).
double inv_reg_incomplete_beta(double a, double b, double p);

// Student-t CDF and quantile for df > 0.
double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);

}  // namespace orepanel
