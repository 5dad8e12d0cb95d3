#pragma once

namespace nullstrap {

// Upper tail P(Z > z) of the standard normal.
double normal_upper_tail(double z);

// Two-sided normal p-value 2 P(Z > |z|), capped at 1.
double normal_two_sided_p(double z);

// Upper tail P(X > x) of a chi-square with `df` degrees of freedom.
double chi_square_upper_tail(double x, double df);

// log Gamma(x) for x > 0, safe to call from several threads.
double log_gamma(double x);

} // namespace nullstrap
