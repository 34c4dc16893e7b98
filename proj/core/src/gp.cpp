#include "gpfield/gp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

namespace gpfield {

namespace {

// Solves (L L^T) x = rhs given the lower factor L.
template <typename Rhs>
Eigen::MatrixXd cholesky_solve(const Eigen::MatrixXd& L, const Rhs& rhs) {
  const Eigen::MatrixXd y = L.triangularView<Eigen::Lower>().solve(rhs);
  return L.transpose().triangularView<Eigen::Upper>().solve(y);
}

}  // namespace

double revert_distance(double occupancy, const KernelParams& p) {
  const double ratio = occupancy / p.sigma2;
  if (!(ratio > p.epsilon)) return p.d_max;  // also catches NaN and o <= 0
  const double d = std::sqrt(-2.0 * p.length_scale * p.length_scale * std::log(std::min(ratio, 1.0)));
  return std::min(d, p.d_max);
}

double propagate_variance(double latent_variance, double occupancy, const KernelParams& p) {
  if (!(latent_variance > 0.0)) return 0.0;
  // Past d_max the distance is saturated; evaluate the Jacobian at the
  // saturation point instead of letting it diverge.
  const double saturation = std::exp(-p.d_max * p.d_max / (2.0 * p.length_scale * p.length_scale));
  const double ratio = std::max(occupancy / p.sigma2, std::max(saturation, p.epsilon));
  occupancy = ratio * p.sigma2;
  const double log_term = -std::log(std::min(ratio, 1.0));
  if (log_term < 1e-12) return p.variance_floor;
  // Jacobian of the reverting function, with the noise variance in the
  // numerator and the kernel variance inside the logarithm.
  const double jac = p.length_scale * p.noise2 / (occupancy * std::sqrt(2.0 * log_term));
  return std::clamp(jac * jac * latent_variance, 0.0, p.variance_max);
}

Eigen::MatrixXd GpLeafModel::factorize(const Eigen::MatrixXd& gram, double noise2, double sigma2,
                                       double& jitter_used) {
  const auto n = gram.rows();
  Eigen::MatrixXd system = gram;
  system.diagonal().array() += noise2;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  jitter_used = 0.0;
  for (double jitter = 1e-8 * sigma2; llt.info() != Eigen::Success; jitter *= 10.0) {
    if (jitter > 1e-2 * sigma2 * (1.0 + 1e-9)) {
      std::ostringstream os;
      os << "kernel system of size " << n << " not positive definite after jitter "
         << jitter / 10.0;
      throw FactorizationFailure(os.str());
    }
    system = gram;
    system.diagonal().array() += noise2 + jitter;
    llt.compute(system);
    jitter_used = jitter;
  }
  return llt.matrixL();
}

GpLeafModel GpLeafModel::train(std::span<const Vec3> points, std::span<const Properties> properties,
                               int channels, const KernelParams& params) {
  if (points.empty()) throw InvalidArgument("GP training requires at least one point");
  if (channels > 0 && properties.size() != points.size())
    throw InvalidArgument("property count does not match point count");

  GpLeafModel m;
  m.params_ = params;
  m.channels_ = channels;
  const auto n = static_cast<Eigen::Index>(points.size());
  m.points_.resize(3, n);
  for (Eigen::Index j = 0; j < n; ++j) m.points_.col(j) = points[j];
  m.centroid_ = m.points_.rowwise().mean();

  const double inv2l2 = 1.0 / (2.0 * params.length_scale * params.length_scale);
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    gram(a, a) = params.sigma2;
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const double v = params.sigma2 * std::exp(-(m.points_.col(a) - m.points_.col(b)).squaredNorm() * inv2l2);
      gram(a, b) = v;
      gram(b, a) = v;
    }
  }

  m.chol_ = factorize(gram, params.noise2, params.sigma2, m.jitter_);
  m.alpha_occ_ = cholesky_solve(m.chol_, Eigen::VectorXd::Ones(n));

  if (channels > 0) {
    Eigen::MatrixXd targets(n, channels);
    for (Eigen::Index j = 0; j < n; ++j)
      for (int c = 0; c < channels; ++c) targets(j, c) = properties[static_cast<std::size_t>(j)][c];
    if (params.property_noise2 != params.noise2) {
      double jitter = 0.0;
      m.prop_chol_ = factorize(gram, params.property_noise2, params.sigma2, jitter);
      m.alpha_prop_ = cholesky_solve(m.prop_chol_, targets);
    } else {
      m.alpha_prop_ = cholesky_solve(m.chol_, targets);
    }
  }
  return m;
}

Eigen::VectorXd GpLeafModel::kernel_vector(const Vec3& x) const {
  const double inv2l2 = 1.0 / (2.0 * params_.length_scale * params_.length_scale);
  return params_.sigma2 * (-(points_.colwise() - x).colwise().squaredNorm().transpose().array() * inv2l2).exp().matrix();
}

double GpLeafModel::latent_variance(const Eigen::VectorXd& k, const Eigen::MatrixXd& chol) const {
  const Eigen::VectorXd v = chol.triangularView<Eigen::Lower>().solve(k);
  return std::clamp(params_.sigma2 - v.squaredNorm(), 0.0, params_.sigma2);
}

double GpLeafModel::infer_occupancy_mean(const Vec3& x) const { return kernel_vector(x).dot(alpha_occ_); }

OccupancyEstimate GpLeafModel::infer_occupancy(const Vec3& x) const {
  const Eigen::VectorXd k = kernel_vector(x);
  return {k.dot(alpha_occ_), latent_variance(k, chol_)};
}

GradientEstimate GpLeafModel::infer_distance_gradient(const Vec3& x) const {
  const Eigen::VectorXd k = kernel_vector(x);
  const double occ = k.dot(alpha_occ_);
  const double l2 = params_.length_scale * params_.length_scale;
  // d k(x, x_j) / dx = -k(x, x_j) (x - x_j) / l^2
  const Eigen::VectorXd w = k.cwiseProduct(alpha_occ_);
  const Vec3 grad_occ = ((points_.colwise() - x) * w) / l2;
  const double norm = grad_occ.norm();
  GradientEstimate g;
  if (norm < params_.gradient_eps) return g;
  // The reverting function is decreasing, so the distance gradient points
  // against the occupancy gradient.
  g.direction = -grad_occ / norm;
  const double d = revert_distance(occ, params_);
  if (occ > 0.0 && d > 0.0 && d < params_.d_max) g.magnitude = l2 / (occ * d) * norm;
  return g;
}

PropertyEstimate GpLeafModel::infer_property(const Vec3& x) const {
  PropertyEstimate out;
  if (channels_ == 0) return out;
  const Eigen::VectorXd k = kernel_vector(x);
  const Eigen::VectorXd c = alpha_prop_.transpose() * k;
  for (int ch = 0; ch < channels_; ++ch) out.value[ch] = static_cast<float>(std::clamp(c[ch], 0.0, 1.0));
  out.variance = latent_variance(k, prop_chol_.size() ? prop_chol_ : chol_);
  return out;
}

}  // namespace gpfield
