#pragma once

namespace nst::stats {

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1], by
/// Lentz's continued fraction. PreconditionError outside the domain.
double incomplete_beta(double a, double b, double x);

/// P(F > f) for an F(d1, d2) variable; 1 for f <= 0.
double f_survival(double f, double d1, double d2);

/// Two-sided P(|T| > |t|) for Student's t with df degrees of freedom.
double t_two_sided_p(double t, double df);

}  // namespace nst::stats
