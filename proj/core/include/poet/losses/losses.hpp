#pragma once

#include <Eigen/Dense>
#include <span>

#include "poet/geometry/rotation.hpp"
#include "poet/tensor/tensor.hpp"

namespace poet::loss {

struct LossWeights {
  double translation = 2.0;
  double rotation = 1.0;
};

// L2 distance between predicted [3] translation and the ground truth;
// subgradient 0 at an exact match.
Tensor translation_loss(const Tensor& predicted, const Eigen::Vector3d& target);

// Geodesic distance between the predicted [3,3] rotation and the ground
// truth, with the epsilon-clamped arccos argument.
Tensor rotation_loss(const geom::Rotation& target, const Tensor& predicted);

struct ObjectLossTerms {
  Tensor translation;  // scalar
  Tensor rotation;     // scalar
};

struct MultitaskLoss {
  Tensor total;             // lambda_t * mean_t + lambda_rot * mean_rot
  Tensor translation_mean;  // unweighted per-object mean
  Tensor rotation_mean;     // unweighted per-object mean
};

// Per-object terms averaged across every object in the batch, then combined
// with the loss weights. Throws ErrorKind::UndefinedLoss for zero objects.
MultitaskLoss multitask_loss(std::span<const ObjectLossTerms> objects,
                             const LossWeights& weights);

}  // namespace poet::loss
