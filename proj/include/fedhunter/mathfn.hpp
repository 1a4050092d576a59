#ifndef FEDHUNTER_MATHFN_HPP
#define FEDHUNTER_MATHFN_HPP

namespace fedhunter {

// Error function with absolute error below 1e-12 over the whole range,
// computed from a Maclaurin series (|x| < 3) and a Lentz continued
// fraction for the complementary tail. Self-contained so results do not
// inherit platform libm differences.
double erf_stable(double x);

}  // namespace fedhunter

#endif
