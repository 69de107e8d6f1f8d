#pragma once

#include "poet/geometry/rotation.hpp"
#include "poet/tensor/tensor.hpp"

namespace poet::geom {

// Autodiff counterparts of decode_6d / geodesic_distance, used by the
// rotation head and its loss. Values agree with the plain versions; tests
// cross-check the two routes.

// six: [6] -> rotation matrix [3,3]; throws ErrorKind::Degeneracy on
// near-parallel inputs exactly like decode_6d.
Tensor decode_6d_graph(const Tensor& six);

// Geodesic distance between a constant ground truth and a predicted [3,3]
// rotation tensor, with the epsilon-clamped arccos argument.
Tensor geodesic_graph(const Rotation& ground_truth, const Tensor& predicted);

}  // namespace poet::geom
