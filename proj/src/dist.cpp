#include "pst/dist.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>

namespace pst::dist {

double chi_squared_sf(double x, double df) {
  if (x <= 0) return 1.0;
  const boost::math::chi_squared_distribution<double> chi2(df);
  return boost::math::cdf(boost::math::complement(chi2, x));
}

double chi_squared_quantile(double p, double df) {
  const boost::math::chi_squared_distribution<double> chi2(df);
  return boost::math::quantile(chi2, p);
}

double f_cdf(double x, double df1, double df2) {
  if (x <= 0) return 0.0;
  const boost::math::fisher_f_distribution<double> f(df1, df2);
  return boost::math::cdf(f, x);
}

double normal_cdf(double x) {
  static const boost::math::normal_distribution<double> normal;
  return boost::math::cdf(normal, x);
}

double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> normal;
  return boost::math::quantile(normal, p);
}

}  // namespace pst::dist
