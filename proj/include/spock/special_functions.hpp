#pragma once

namespace spock {

// Regularized incomplete beta function I_x(a, b), continued-fraction
// evaluation (modified Lentz).
double reg_incomplete_beta(double a, double b, double x);

// Quantile of Beta(a, b) at probability p, inverted by bisection to 1e-10.
double beta_quantile(double a, double b, double p);

}  // namespace spock
