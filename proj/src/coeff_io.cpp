#include <fstream>
#include <stdexcept>

#include "gsf/io.hpp"
#include "json.hpp"

namespace gsf::io {

namespace {

nlohmann::json to_array(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd from_array(const nlohmann::json& a, const std::string& where) {
  if (!a.is_array()) throw std::runtime_error(where + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw std::runtime_error(where + ": element " + std::to_string(i) + " is not a number");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

}  // namespace

void save_coeffs(const std::string& path, const std::vector<face::CoeffSet>& frames) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const auto& c : frames) {
    nlohmann::json j;
    j["beta"] = to_array(c.beta);
    if (c.alpha.size()) j["alpha"] = to_array(c.alpha);
    if (c.delta.size()) j["delta"] = to_array(c.delta);
    j["rotation"] = to_array(c.rotation);
    j["translation"] = to_array(c.translation);
    out << j.dump() << "\n";
  }
}

std::vector<face::CoeffSet> load_coeffs(const std::string& path, std::size_t k_exp) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::vector<face::CoeffSet> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "'" + path + "' frame " + std::to_string(frames.size()) + " (line " + std::to_string(line_no) + ")";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(where + ": invalid JSON: " + e.what());
    }
    if (!j.contains("beta")) throw std::runtime_error(where + ": missing \"beta\"");
    face::CoeffSet c;
    c.beta = from_array(j["beta"], where + " beta");
    if (static_cast<std::size_t>(c.beta.size()) != k_exp)
      throw std::runtime_error(where + ": beta has " + std::to_string(c.beta.size()) + " entries, expected " +
                               std::to_string(k_exp));
    if (j.contains("alpha")) c.alpha = from_array(j["alpha"], where + " alpha");
    if (j.contains("delta")) c.delta = from_array(j["delta"], where + " delta");
    if (j.contains("rotation")) {
      const auto r = from_array(j["rotation"], where + " rotation");
      if (r.size() != 3) throw std::runtime_error(where + ": rotation needs 3 angles");
      c.rotation = r;
    }
    if (j.contains("translation")) {
      const auto t = from_array(j["translation"], where + " translation");
      if (t.size() != 3) throw std::runtime_error(where + ": translation needs 3 components");
      c.translation = t;
    }
    frames.push_back(std::move(c));
  }
  return frames;
}

}  // namespace gsf::io
