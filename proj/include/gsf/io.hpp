#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gsf/face3dmm.hpp"

namespace gsf::io {

// FB3D basis files: "FB3D", u16 version, u32 N, k_id, k_exp, k_tex, u32
// triangle count, then f32 mean_shape, mean_texture, basis_id, basis_exp,
// basis_tex (column-major), then u32 triangle indices. Little-endian.
inline constexpr unsigned kBasisVersion = 1;

void save_basis(const std::string& path, const face::FaceBasis& basis);
face::FaceBasis load_basis(const std::string& path);

// One JSON object per line: {"beta": [...], "alpha": [...], "delta": [...],
// "rotation": [3], "translation": [3]}; only "beta" is required.
void save_coeffs(const std::string& path, const std::vector<face::CoeffSet>& frames);
// Throws naming the frame index when a beta has the wrong length.
std::vector<face::CoeffSet> load_coeffs(const std::string& path, std::size_t k_exp);

// key=value settings; '#' starts a comment.
class Config {
 public:
  static Config load(const std::string& path);
  static Config parse(const std::string& text);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  std::size_t get(const std::string& key, std::size_t fallback) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace gsf::io
