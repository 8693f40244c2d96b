#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gsf/autodiff.hpp"

namespace gsf::face {

// N x 3 vertex (or per-vertex RGB) array.
using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Triangle = std::array<std::uint32_t, 3>;

// Affine face model. Stacked vectors are vertex-interleaved:
// (x0, y0, z0, x1, y1, z1, ...), so every basis has 3N rows.
struct FaceBasis {
  std::size_t n_vertices = 0;
  Eigen::VectorXd mean_shape;
  Eigen::VectorXd mean_texture;
  Eigen::MatrixXd basis_id;
  Eigen::MatrixXd basis_exp;
  Eigen::MatrixXd basis_tex;
  std::vector<Triangle> triangles;

  std::size_t k_id() const { return static_cast<std::size_t>(basis_id.cols()); }
  std::size_t k_exp() const { return static_cast<std::size_t>(basis_exp.cols()); }
  std::size_t k_tex() const { return static_cast<std::size_t>(basis_tex.cols()); }

  // Throws std::invalid_argument when row counts or triangle indices are inconsistent.
  void validate() const;
};

// Per-frame model parameters. Rotation is (pitch, yaw, roll) in radians,
// composed as Rz * Ry * Rx.
struct CoeffSet {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::VectorXd delta;
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  bool operator==(const CoeffSet&) const = default;
};

// Vertex subset below a height threshold on the mean face.
struct MouthMask {
  std::vector<std::size_t> indices;   // sorted
  std::vector<std::uint8_t> vector;   // length N, 1 for members
  double y_threshold = 0.0;
};

Vertices reshape_vertices(const Eigen::VectorXd& stacked);
Eigen::VectorXd stack_vertices(const Vertices& v);

Vertices evaluate_shape(const FaceBasis& basis, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta);
Vertices evaluate_texture(const FaceBasis& basis, const Eigen::VectorXd& delta);

Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& euler);
Vertices apply_pose(const Vertices& vertices, const Eigen::Vector3d& rotation, const Eigen::Vector3d& translation);

Eigen::VectorXd mean_identity(std::span<const CoeffSet> frames);
Vertices template_face(const FaceBasis& basis, const Eigen::VectorXd& mean_alpha);

// Strict inequality: vertex i is selected iff mean_shape y_i < y_threshold.
MouthMask lower_mouth_indices(const FaceBasis& basis, double y_threshold);

// Mouth-weighted vertex loss over a T-frame sequence. Rows of the beta
// matrices are frames. Each frame contributes
//   lambda_m * mean(M * d^2) + mean((1 - M) * d^2)
// where d = S_pred - S_gt over all 3N coordinates and M is broadcast per vertex.
double vertex_prediction_loss(const Eigen::MatrixXd& pred_betas, const Eigen::MatrixXd& gt_betas,
                              const FaceBasis& basis, const Vertices& template_vertices, const MouthMask& mouth,
                              double lambda_m);

// Precomputed constants for evaluating the same loss on an autodiff graph.
struct VertexLossTerms {
  Tensor basis_exp_t;  // [k_exp, 3N]
  Tensor template_row; // [3N]
  Tensor weight_row;   // [3N], lambda_m on mouth coordinates, 1 elsewhere

  static VertexLossTerms build(const FaceBasis& basis, const Vertices& template_vertices, const MouthMask& mouth,
                               double lambda_m);
};

// pred: [T, k_exp] graph value; gt: [T, k_exp] constant.
ad::Var vertex_prediction_loss(const ad::Var& pred_betas, const Tensor& gt_betas, const VertexLossTerms& terms);

}  // namespace gsf::face
