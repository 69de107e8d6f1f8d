#include "poet/geometry/rotation_graph.hpp"

#include <array>

#include "poet/error.hpp"
#include "poet/tensor/ops.hpp"

namespace poet::geom {

namespace {

// Cross product of two [3] tensors built from slices so every factor stays
// on the tape.
Tensor cross_graph(const Tensor& a, const Tensor& b) {
  auto comp = [](const Tensor& t, std::size_t i) { return slice(t, 0, i, 1); };
  Tensor ax = comp(a, 0), ay = comp(a, 1), az = comp(a, 2);
  Tensor bx = comp(b, 0), by = comp(b, 1), bz = comp(b, 2);
  std::array<Tensor, 3> parts = {
      sub(mul(ay, bz), mul(az, by)),
      sub(mul(az, bx), mul(ax, bz)),
      sub(mul(ax, by), mul(ay, bx)),
  };
  return concat(parts, 0);
}

}  // namespace

Tensor decode_6d_graph(const Tensor& six) {
  if (six.size() != 6) {
    raise(ErrorKind::Dimension,
          "decode_6d_graph: expected 6 values, got " + shape_string(six.shape()));
  }
  Tensor flat = six.rank() == 1 ? six : reshape(six, {6});
  Tensor a1 = slice(flat, 0, 0, 3);
  Tensor a2 = slice(flat, 0, 3, 3);
  Tensor n1 = norm(a1);
  if (n1.item() < 1e-9) {
    raise(ErrorKind::Degeneracy, "decode_6d: first 3-vector has near-zero norm");
  }
  Tensor b1 = div(a1, n1);
  Tensor d = sum(mul(a2, b1));
  Tensor residual = sub(a2, mul(b1, d));
  Tensor n2 = norm(residual);
  if (n2.item() < 1e-9) {
    raise(ErrorKind::Degeneracy, "decode_6d: vectors are (near-)parallel");
  }
  Tensor b2 = div(residual, n2);
  Tensor b3 = cross_graph(b1, b2);
  // Columns (b1, b2, b3): row-major [3,3] assembled row by row.
  std::array<Tensor, 3> cols = {reshape(b1, {3, 1}), reshape(b2, {3, 1}),
                                reshape(b3, {3, 1})};
  return concat(cols, 1);
}

Tensor geodesic_graph(const Rotation& ground_truth, const Tensor& predicted) {
  if (predicted.size() != 9) {
    raise(ErrorKind::Dimension, "geodesic_graph: expected a [3,3] rotation, got " +
                                    shape_string(predicted.shape()));
  }
  std::vector<double> gt(9);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) gt[i * 3 + j] = ground_truth.matrix()(i, j);
  }
  // Tr(R_gt * R^T) is the elementwise dot product of the two matrices.
  Tensor gt_t = make_tensor({9}, std::move(gt), false, predicted.dtype());
  Tensor tr = sum(mul(reshape(predicted, {9}), gt_t));
  Tensor arg = affine(tr, 0.5, -0.5);
  return acos_clamped(arg, kGeodesicEps);
}

}  // namespace poet::geom
