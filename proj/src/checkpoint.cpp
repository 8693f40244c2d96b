#include "gsf/checkpoint.hpp"

#include <map>
#include <stdexcept>

#include "binary_io.hpp"

namespace gsf {

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  detail::ByteWriter w;
  w.write_string("GSWT");
  w.write<std::uint16_t>(kCheckpointVersion);
  w.write<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.write<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
    w.write_string(t.name);
    w.write<std::uint32_t>(static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) w.write<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (double v : t.value.data()) w.write<float>(static_cast<float>(v));
  }
  detail::write_file(path, w.bytes());
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, "checkpoint '" + path + "'");
  r.expect_magic("GSWT");
  const auto version = r.read<std::uint16_t>("version");
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  const auto count = r.read<std::uint32_t>("record count");
  std::vector<NamedTensor> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    const auto len = r.read<std::uint32_t>("name length");
    t.name = r.read_string(len, "name");
    const auto rank = r.read<std::uint32_t>("rank");
    if (rank > 8) r.fail("implausible rank " + std::to_string(rank) + " for '" + t.name + "'");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.read<std::uint32_t>("dimension"));
    const std::size_t n = shape_size(shape);
    r.need(n * sizeof(float), "tensor data");
    std::vector<double> data(n);
    for (auto& v : data) v = r.read<float>("tensor data");
    t.value = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(t));
  }
  if (r.remaining() != 0) r.fail(std::to_string(r.remaining()) + " trailing bytes");
  return out;
}

void assign_by_name(std::vector<NamedTensor>& dest, const std::vector<NamedTensor>& source) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& s : source) by_name[s.name] = &s.value;
  for (auto& d : dest) {
    auto it = by_name.find(d.name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint is missing tensor '" + d.name + "'");
    if (it->second->shape() != d.value.shape())
      throw std::runtime_error("checkpoint tensor '" + d.name + "' has shape " + shape_string(it->second->shape()) +
                               ", expected " + shape_string(d.value.shape()));
    d.value = *it->second;
  }
}

}  // namespace gsf
