#pragma once

#include <vector>

namespace nmsk {

/// Gauss-Hermite rule for integrals of the form  ∫ e^{-u²} f(u) du.
/// Nodes are strictly increasing and symmetric about 0; weights are
/// positive and sum to √π.  For standard-normal expectations rescale
/// u → z√2 and divide the weight sum by √π.
struct QuadratureRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Build a Gauss-Hermite rule, exact on polynomials of degree <= 2*order-1.
/// Throws std::invalid_argument unless 2 <= order <= 512.
QuadratureRule gauss_hermite_rule(int order);

/// One-body pressure of a single ±1 spin in a Gaussian field with
/// mean = variance = Q, together with its first two Q-derivatives.
///
///   value  = E_z log 2cosh(z√Q + Q)          z ~ N(0,1)
///   first  = ½ E_z [1 + tanh(z√Q + Q)]       = d(value)/dQ, in [0,1]
///   second = ½ E_z [(1 - tanh²(z√Q + Q))²]   = d(first)/dQ, in [0,1/2]
struct PsiValue {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
};

/// Evaluate ψ(Q) and derivatives.  Relative accuracy 1e-10 for Q <= 1e4;
/// the hyperbolic terms are evaluated in log-domain so large Q does not
/// overflow.  Q must be >= 0 and finite; values in [-1e-15, 0) are
/// clamped to 0 to absorb rounding from upstream matrix products.
PsiValue psi(double Q);

/// E_z tanh(z√Q + Q), the quenched single-spin magnetization.  Equals
/// 2·psi(Q).first - 1; componentwise building block of the consistency map.
double expect_tanh(double Q);

/// E_z (1 - tanh²(z√Q + Q))², i.e. 2·psi(Q).second.  Diagonal entries of
/// the susceptibility matrix D(x,h) in the Hessian.
double expect_sech4(double Q);

/// Numerically stable log 2cosh(y) = |y| + log(1 + e^{-2|y|}).
double log2cosh(double y);

} // namespace nmsk
