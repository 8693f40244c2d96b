#include "gsf/face3dmm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gsf::face {

namespace {

void check_length(const char* name, Eigen::Index got, std::size_t want) {
  if (static_cast<std::size_t>(got) != want) {
    throw std::invalid_argument(std::string(name) + ": expected length " + std::to_string(want) + ", got " +
                                std::to_string(got));
  }
}

}  // namespace

void FaceBasis::validate() const {
  const auto rows = static_cast<Eigen::Index>(3 * n_vertices);
  if (n_vertices == 0) throw std::invalid_argument("FaceBasis: n_vertices must be positive");
  auto check_rows = [rows](const char* name, Eigen::Index r) {
    if (r != rows)
      throw std::invalid_argument(std::string("FaceBasis: ") + name + " has " + std::to_string(r) +
                                  " rows, expected " + std::to_string(rows));
  };
  check_rows("mean_shape", mean_shape.size());
  check_rows("mean_texture", mean_texture.size());
  check_rows("basis_id", basis_id.rows());
  check_rows("basis_exp", basis_exp.rows());
  check_rows("basis_tex", basis_tex.rows());
  for (std::size_t t = 0; t < triangles.size(); ++t)
    for (auto idx : triangles[t])
      if (idx >= n_vertices)
        throw std::invalid_argument("FaceBasis: triangle " + std::to_string(t) + " references vertex " +
                                    std::to_string(idx) + " >= " + std::to_string(n_vertices));
}

Vertices reshape_vertices(const Eigen::VectorXd& stacked) {
  const Eigen::Index n = stacked.size() / 3;
  return Eigen::Map<const Vertices>(stacked.data(), n, 3);
}

Eigen::VectorXd stack_vertices(const Vertices& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

Vertices evaluate_shape(const FaceBasis& basis, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
  check_length("evaluate_shape alpha", alpha.size(), basis.k_id());
  check_length("evaluate_shape beta", beta.size(), basis.k_exp());
  const Eigen::VectorXd s = basis.mean_shape + basis.basis_id * alpha + basis.basis_exp * beta;
  return reshape_vertices(s);
}

Vertices evaluate_texture(const FaceBasis& basis, const Eigen::VectorXd& delta) {
  check_length("evaluate_texture delta", delta.size(), basis.k_tex());
  const Eigen::VectorXd t = basis.mean_texture + basis.basis_tex * delta;
  return reshape_vertices(t);
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& euler) {
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(euler.x(), Eigen::Vector3d::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d ry = Eigen::AngleAxisd(euler.y(), Eigen::Vector3d::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(euler.z(), Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return rz * ry * rx;
}

Vertices apply_pose(const Vertices& vertices, const Eigen::Vector3d& rotation, const Eigen::Vector3d& translation) {
  const Eigen::Matrix3d r = rotation_matrix(rotation);
  Vertices out(vertices.rows(), 3);
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    const Eigen::Vector3d p = vertices.row(i).transpose();
    out.row(i) = (r * p + translation).transpose();
  }
  return out;
}

Eigen::VectorXd mean_identity(std::span<const CoeffSet> frames) {
  if (frames.empty()) throw std::invalid_argument("mean_identity: empty coefficient sequence");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(frames.front().alpha.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].alpha.size() != acc.size())
      throw std::invalid_argument("mean_identity: frame " + std::to_string(t) + " has alpha length " +
                                  std::to_string(frames[t].alpha.size()));
    acc += frames[t].alpha;
  }
  return acc / static_cast<double>(frames.size());
}

Vertices template_face(const FaceBasis& basis, const Eigen::VectorXd& mean_alpha) {
  return evaluate_shape(basis, mean_alpha, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.k_exp())));
}

MouthMask lower_mouth_indices(const FaceBasis& basis, double y_threshold) {
  MouthMask m;
  m.y_threshold = y_threshold;
  m.vector.assign(basis.n_vertices, 0);
  for (std::size_t i = 0; i < basis.n_vertices; ++i) {
    if (basis.mean_shape[static_cast<Eigen::Index>(3 * i + 1)] < y_threshold) {
      m.indices.push_back(i);
      m.vector[i] = 1;
    }
  }
  return m;
}

double vertex_prediction_loss(const Eigen::MatrixXd& pred_betas, const Eigen::MatrixXd& gt_betas,
                              const FaceBasis& basis, const Vertices& template_vertices, const MouthMask& mouth,
                              double lambda_m) {
  if (pred_betas.rows() != gt_betas.rows() || pred_betas.cols() != gt_betas.cols())
    throw std::invalid_argument("vertex_prediction_loss: predicted " + std::to_string(pred_betas.rows()) + "x" +
                                std::to_string(pred_betas.cols()) + " vs ground truth " +
                                std::to_string(gt_betas.rows()) + "x" + std::to_string(gt_betas.cols()));
  if (static_cast<std::size_t>(pred_betas.cols()) != basis.k_exp())
    throw std::invalid_argument("vertex_prediction_loss: beta width " + std::to_string(pred_betas.cols()) +
                                " does not match k_exp " + std::to_string(basis.k_exp()));
  if (mouth.vector.size() != basis.n_vertices)
    throw std::invalid_argument("vertex_prediction_loss: mouth mask length does not match the basis");
  if (pred_betas.rows() == 0) throw std::invalid_argument("vertex_prediction_loss: empty sequence");

  const Eigen::VectorXd tmpl = stack_vertices(template_vertices);
  const double count = static_cast<double>(tmpl.size());
  double total = 0.0;
  for (Eigen::Index t = 0; t < pred_betas.rows(); ++t) {
    const Eigen::VectorXd s_pred = tmpl + basis.basis_exp * pred_betas.row(t).transpose();
    const Eigen::VectorXd s_gt = tmpl + basis.basis_exp * gt_betas.row(t).transpose();
    const Eigen::VectorXd d = s_pred - s_gt;
    double mouth_sq = 0.0, rest_sq = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const double sq = d[i] * d[i];
      if (mouth.vector[static_cast<std::size_t>(i / 3)])
        mouth_sq += sq;
      else
        rest_sq += sq;
    }
    total += lambda_m * (mouth_sq / count) + rest_sq / count;
  }
  return total / static_cast<double>(pred_betas.rows());
}

VertexLossTerms VertexLossTerms::build(const FaceBasis& basis, const Vertices& template_vertices,
                                       const MouthMask& mouth, double lambda_m) {
  const std::size_t k = basis.k_exp(), n3 = 3 * basis.n_vertices;
  if (mouth.vector.size() != basis.n_vertices)
    throw std::invalid_argument("VertexLossTerms: mouth mask length does not match the basis");
  VertexLossTerms terms;
  terms.basis_exp_t = Tensor({k, n3});
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t r = 0; r < n3; ++r)
      terms.basis_exp_t.at(c, r) = basis.basis_exp(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  const Eigen::VectorXd tmpl = stack_vertices(template_vertices);
  terms.template_row = Tensor({n3}, std::vector<double>(tmpl.data(), tmpl.data() + tmpl.size()));
  terms.weight_row = Tensor({n3});
  for (std::size_t r = 0; r < n3; ++r) terms.weight_row[r] = mouth.vector[r / 3] ? lambda_m : 1.0;
  return terms;
}

ad::Var vertex_prediction_loss(const ad::Var& pred_betas, const Tensor& gt_betas, const VertexLossTerms& terms) {
  if (pred_betas.shape() != gt_betas.shape())
    throw std::invalid_argument("vertex_prediction_loss: predicted " + shape_string(pred_betas.shape()) +
                                " vs ground truth " + shape_string(gt_betas.shape()));
  const std::size_t frames = gt_betas.dim(0), n3 = terms.template_row.size();
  const ad::Var basis_t = ad::constant(terms.basis_exp_t);
  const ad::Var tmpl = ad::constant(terms.template_row);
  const ad::Var s_pred = ad::add_row(ad::matmul(pred_betas, basis_t), tmpl);
  const ad::Var s_gt = ad::add_row(ad::matmul(ad::constant(gt_betas), basis_t), tmpl);
  Tensor weights({frames, n3});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t r = 0; r < n3; ++r) weights.at(t, r) = terms.weight_row[r];
  return ad::mean(ad::mul_const(ad::square(ad::sub(s_pred, s_gt)), weights));
}

}  // namespace gsf::face
