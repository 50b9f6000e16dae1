#include "nmsk/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

namespace nmsk {

namespace {

constexpr double kSqrtPi = 1.7724538509055160272981674833411;

// Orders tried by psi(): the default rule plus doublings.
constexpr int kPsiOrders[4] = {61, 122, 244, 488};
constexpr double kPsiAgreeTol = 1e-11;

double validated_argument(double Q) {
  if (!std::isfinite(Q)) throw std::domain_error("psi: non-finite argument");
  if (Q < 0.0) {
    if (Q < -1e-15) throw std::domain_error("psi: negative argument");
    return 0.0; // rounding from upstream matrix products
  }
  return Q;
}

struct PsiAccumulator {
  double value = 0.0, first = 0.0, second = 0.0;
};

// One-pass evaluation of all three psi components at a fixed rule.
// Normalizing by the rule's own weight sum (instead of the analytic
// sqrt(pi)) makes constants integrate exactly, so psi(0) and the
// consistency map at the origin come out bit-exact.
PsiAccumulator psi_at(double Q, const QuadratureRule& rule) {
  const double scale = std::sqrt(2.0 * Q);
  PsiAccumulator acc;
  double wsum = 0.0;
  for (int i = 0; i < rule.order; ++i) {
    const double y = rule.nodes[i] * scale + Q;
    const double t = std::tanh(y);
    const double u = 1.0 - t * t;
    const double w = rule.weights[i];
    wsum += w;
    acc.value += w * log2cosh(y);
    acc.first += w * 0.5 * (1.0 + t);
    acc.second += w * 0.5 * u * u;
  }
  acc.value /= wsum;
  acc.first /= wsum;
  acc.second /= wsum;
  return acc;
}

bool agrees(double a, double b) {
  return std::abs(a - b) <= kPsiAgreeTol * std::max(1.0, std::abs(b));
}

const QuadratureRule& cached_rule(int order) {
  static std::unordered_map<int, QuadratureRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, gauss_hermite_rule(order)).first;
  return it->second;
}

} // namespace

double log2cosh(double y) {
  const double ay = std::abs(y);
  return ay + std::log1p(std::exp(-2.0 * ay));
}

QuadratureRule gauss_hermite_rule(int order) {
  if (order < 2 || order > 512)
    throw std::invalid_argument("gauss_hermite_rule: order must be in [2, 512]");

  // Golub-Welsch: the Jacobi matrix of the (orthonormal) Hermite family has
  // zero diagonal and off-diagonal sqrt(k/2); its eigenvalues are the nodes
  // and sqrt(pi) times the squared first eigenvector components the weights.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order - 1);
  for (int k = 1; k < order; ++k) sub[k - 1] = std::sqrt(0.5 * k);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite_rule: eigen solve failed");

  QuadratureRule rule;
  rule.order = order;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    rule.nodes[i] = solver.eigenvalues()[i];
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = kSqrtPi * v0 * v0;
  }
  // Enforce the exact +/- symmetry of the Hermite rule; this also averages
  // away the last rounding of the QR iteration.
  for (int i = 0, j = order - 1; i < j; ++i, --j) {
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = rule.weights[j] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

PsiValue psi(double Q) {
  const double q = validated_argument(Q);
  PsiAccumulator prev = psi_at(q, cached_rule(kPsiOrders[0]));
  for (std::size_t k = 1; k < std::size(kPsiOrders); ++k) {
    const PsiAccumulator next = psi_at(q, cached_rule(kPsiOrders[k]));
    const bool done = agrees(prev.value, next.value) &&
                      agrees(prev.first, next.first) &&
                      agrees(prev.second, next.second);
    prev = next;
    if (done) break;
  }
  return {prev.value, prev.first, prev.second};
}

double expect_tanh(double Q) { return 2.0 * psi(Q).first - 1.0; }

double expect_sech4(double Q) { return 2.0 * psi(Q).second; }

} // namespace nmsk
