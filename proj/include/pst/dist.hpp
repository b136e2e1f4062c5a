#pragma once

namespace pst::dist {

// Upper tail P(X > x) for chi-squared with df degrees of freedom.
double chi_squared_sf(double x, double df);
double chi_squared_quantile(double p, double df);

// CDF of the F distribution with (df1, df2) degrees of freedom.
double f_cdf(double x, double df1, double df2);

double normal_cdf(double x);
double normal_quantile(double p);

}  // namespace pst::dist
