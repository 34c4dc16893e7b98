#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gpfield/types.hpp"

namespace gpfield {

/// Squared-exponential kernel hyperparameters plus the clamping constants of
/// the distance reverting function.
struct KernelParams {
  double sigma2 = 1.0;          // kernel signal variance
  double length_scale = 0.15;   // metres
  double noise2 = 1e-3;         // occupancy observation noise variance
  double property_noise2 = 1e-3;
  double d_max = 0.45;          // distance returned once the latent field has decayed away
  double epsilon = 1e-12;       // lower clamp of o / sigma2 before the log
  double variance_max = 4e-5;   // m^2, upper clamp of the propagated distance variance
  double variance_floor = 0.0;  // returned at the reverting singularity (on the surface)
  double gradient_eps = 1e-12;

  double kernel(const Vec3& a, const Vec3& b) const {
    return sigma2 * std::exp(-(a - b).squaredNorm() / (2.0 * length_scale * length_scale));
  }
};

/// Squared-exponential kernel k(x, x') = sigma2 * exp(-|x - x'|^2 / 2 l^2).
inline double se_kernel(const Vec3& a, const Vec3& b, const KernelParams& p) { return p.kernel(a, b); }

/// Reverting function: maps latent occupancy back to an unsigned distance.
/// Monotone non-increasing in `occupancy`; saturates at p.d_max.
double revert_distance(double occupancy, const KernelParams& p);

/// Distance variance from the latent variance through the reverting Jacobian.
double propagate_variance(double latent_variance, double occupancy, const KernelParams& p);

struct OccupancyEstimate {
  double occupancy = 0.0;  // latent mean
  double variance = 0.0;   // latent variance, in [0, sigma2]
};

struct GradientEstimate {
  Vec3 direction = Vec3::Zero();  // unit gradient of the unsigned distance, or zero
  double magnitude = 0.0;         // |d distance / dx| before normalisation
};

struct PropertyEstimate {
  Properties value{};
  double variance = 0.0;
};

/// One Gaussian process trained on the voxels (or surface points) of a single
/// leaf. Immutable after training; every query is const and thread-safe.
class GpLeafModel {
 public:
  GpLeafModel() = default;

  /// Trains occupancy (targets = 1) and, if given, per-channel properties.
  /// Throws FactorizationFailure if the kernel system stays indefinite after
  /// jitter escalation.
  static GpLeafModel train(std::span<const Vec3> points, std::span<const Properties> properties,
                           int channels, const KernelParams& params);
  static GpLeafModel train(std::span<const Vec3> points, const KernelParams& params) {
    return train(points, {}, 0, params);
  }

  OccupancyEstimate infer_occupancy(const Vec3& x) const;
  double infer_occupancy_mean(const Vec3& x) const;
  GradientEstimate infer_distance_gradient(const Vec3& x) const;
  PropertyEstimate infer_property(const Vec3& x) const;

  /// Unsigned distance through the reverting function.
  double infer_distance(const Vec3& x) const { return revert_distance(infer_occupancy_mean(x), params_); }

  std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }
  int channels() const { return channels_; }
  const Vec3& centroid() const { return centroid_; }
  const KernelParams& params() const { return params_; }
  const Eigen::Matrix3Xd& points() const { return points_; }
  const Eigen::MatrixXd& cholesky() const { return chol_; }
  const Eigen::VectorXd& alpha_occupancy() const { return alpha_occ_; }
  const Eigen::MatrixXd& alpha_properties() const { return alpha_prop_; }
  double jitter() const { return jitter_; }

  /// Kernel vector k(x, X).
  Eigen::VectorXd kernel_vector(const Vec3& x) const;

 private:
  static Eigen::MatrixXd factorize(const Eigen::MatrixXd& gram, double noise2, double sigma2,
                                   double& jitter_used);
  double latent_variance(const Eigen::VectorXd& k, const Eigen::MatrixXd& chol) const;

  KernelParams params_;
  Eigen::Matrix3Xd points_;
  Vec3 centroid_ = Vec3::Zero();
  Eigen::MatrixXd chol_;       // lower factor of K + noise2 I (+ jitter)
  Eigen::MatrixXd prop_chol_;  // only when property_noise2 != noise2
  Eigen::VectorXd alpha_occ_;
  Eigen::MatrixXd alpha_prop_; // J x channels
  int channels_ = 0;
  double jitter_ = 0.0;
};

}  // namespace gpfield
