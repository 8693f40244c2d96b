#include <stdexcept>

#include "binary_io.hpp"
#include "gsf/io.hpp"

namespace gsf::io {

namespace {

void write_floats(detail::ByteWriter& w, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) w.write<float>(static_cast<float>(data[i]));
}

void read_floats(detail::ByteReader& r, double* data, Eigen::Index n, const char* field) {
  for (Eigen::Index i = 0; i < n; ++i) data[i] = r.read<float>(field);
}

}  // namespace

void save_basis(const std::string& path, const face::FaceBasis& basis) {
  basis.validate();
  detail::ByteWriter w;
  w.write_string("FB3D");
  w.write<std::uint16_t>(kBasisVersion);
  w.write<std::uint32_t>(static_cast<std::uint32_t>(basis.n_vertices));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(basis.k_id()));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(basis.k_exp()));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(basis.k_tex()));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(basis.triangles.size()));
  // Eigen matrices are column-major, matching the file layout.
  write_floats(w, basis.mean_shape.data(), basis.mean_shape.size());
  write_floats(w, basis.mean_texture.data(), basis.mean_texture.size());
  write_floats(w, basis.basis_id.data(), basis.basis_id.size());
  write_floats(w, basis.basis_exp.data(), basis.basis_exp.size());
  write_floats(w, basis.basis_tex.data(), basis.basis_tex.size());
  for (const auto& t : basis.triangles)
    for (auto i : t) w.write<std::uint32_t>(i);
  detail::write_file(path, w.bytes());
}

face::FaceBasis load_basis(const std::string& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, "basis '" + path + "'");
  r.expect_magic("FB3D");
  const auto version = r.read<std::uint16_t>("version");
  if (version != kBasisVersion) r.fail("unsupported version " + std::to_string(version));
  const std::size_t n = r.read<std::uint32_t>("N");
  const std::size_t k_id = r.read<std::uint32_t>("k_id");
  const std::size_t k_exp = r.read<std::uint32_t>("k_exp");
  const std::size_t k_tex = r.read<std::uint32_t>("k_tex");
  const std::size_t n_tri = r.read<std::uint32_t>("triangle count");
  if (n == 0) r.fail("N must be positive");

  const std::size_t rows = 3 * n;
  const std::size_t expected = r.offset() + 4 * (rows * (2 + k_id + k_exp + k_tex)) + 4 * 3 * n_tri;
  if (bytes.size() != expected) {
    throw std::runtime_error("basis '" + path + "': expected " + std::to_string(expected) + " bytes for N=" +
                             std::to_string(n) + ", k=(" + std::to_string(k_id) + "," + std::to_string(k_exp) + "," +
                             std::to_string(k_tex) + "), " + std::to_string(n_tri) + " triangles, actual length " +
                             std::to_string(bytes.size()));
  }

  face::FaceBasis b;
  b.n_vertices = n;
  const auto er = static_cast<Eigen::Index>(rows);
  b.mean_shape.resize(er);
  b.mean_texture.resize(er);
  b.basis_id.resize(er, static_cast<Eigen::Index>(k_id));
  b.basis_exp.resize(er, static_cast<Eigen::Index>(k_exp));
  b.basis_tex.resize(er, static_cast<Eigen::Index>(k_tex));
  read_floats(r, b.mean_shape.data(), b.mean_shape.size(), "mean_shape");
  read_floats(r, b.mean_texture.data(), b.mean_texture.size(), "mean_texture");
  read_floats(r, b.basis_id.data(), b.basis_id.size(), "basis_id");
  read_floats(r, b.basis_exp.data(), b.basis_exp.size(), "basis_exp");
  read_floats(r, b.basis_tex.data(), b.basis_tex.size(), "basis_tex");
  b.triangles.resize(n_tri);
  for (auto& t : b.triangles)
    for (auto& i : t) {
      i = r.read<std::uint32_t>("triangle index");
      if (i >= n) r.fail("triangle index " + std::to_string(i) + " >= N=" + std::to_string(n));
    }
  return b;
}

}  // namespace gsf::io
