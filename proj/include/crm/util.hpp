#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace crm {

/// Max-subtracted log-sum-exp; tolerates -inf entries.
inline double logsumexp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (int i = 0; i < v.size(); ++i) sum += std::exp(v[i] - m);
  return m + std::log(sum);
}

inline Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  return logits.array() - logsumexp(logits);
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  return log_softmax(logits).array().exp();
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

/// Total variation distance between two probability vectors on the same
/// support.
inline double total_variation(const Eigen::VectorXd& p,
                              const Eigen::VectorXd& q) {
  return 0.5 * (p - q).cwiseAbs().sum();
}

inline int argmax(const Eigen::VectorXd& v) {
  int idx = 0;
  v.maxCoeff(&idx);
  return idx;
}

}  // namespace crm
