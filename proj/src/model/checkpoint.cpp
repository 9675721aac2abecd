#include "nsr/model/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "nsr/error.hpp"

namespace nsr::model {
namespace {

constexpr std::array<char, 8> kMagic = {'N', 'S', 'R', 'C', 'K', 'P', 'T', '\0'};

template <class U>
void put(std::ostream& out, U v) {
  static_assert(std::is_integral_v<U>);
  using Unsigned = std::make_unsigned_t<U>;
  auto u = static_cast<Unsigned>(v);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>(u & 0xFF);
    u = static_cast<Unsigned>(u >> 8);
  }
  out.write(bytes, sizeof(U));
}

template <class U>
U get(std::istream& in) {
  static_assert(std::is_integral_v<U>);
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw CorruptCheckpoint("checkpoint is truncated");
  std::make_unsigned_t<U> u = 0;
  for (std::size_t i = sizeof(U); i-- > 0;) u = static_cast<std::make_unsigned_t<U>>((u << 8) | bytes[i]);
  return static_cast<U>(u);
}

void put_array(std::ostream& out, const Mat<float>& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) put(out, std::bit_cast<std::uint32_t>(m.data()[i]));
}

Mat<float> get_array(std::istream& in, std::uint32_t rows, std::uint32_t cols) {
  Mat<float> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<float>(get<std::uint32_t>(in));
  return m;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic.data(), kMagic.size());
  put(out, kCheckpointVersion);
  nlohmann::json header{{"config", ckpt.config}, {"metadata", ckpt.metadata}};
  const std::string text = header.dump();
  put(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& name = ckpt.params.names[i];
    const auto& m = ckpt.params.values[i];
    put(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put(out, static_cast<std::uint32_t>(m.rows()));
    put(out, static_cast<std::uint32_t>(m.cols()));
    put_array(out, m);
  }
  put(out, static_cast<std::uint8_t>(ckpt.adam ? 1 : 0));
  if (ckpt.adam) {
    put(out, static_cast<std::int64_t>(ckpt.adam->step));
    for (const auto& m : ckpt.adam->m.values) put_array(out, m);
    for (const auto& v : ckpt.adam->v.values) put_array(out, v);
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  save_checkpoint(out, ckpt);
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint load_checkpoint(std::istream& in, int expected_input_dim) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw CorruptCheckpoint("not a checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw VersionMismatch("checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  const auto header_len = get<std::uint64_t>(in);
  if (header_len > (1u << 24)) throw CorruptCheckpoint("implausible header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw CorruptCheckpoint("checkpoint is truncated");

  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(text);
    ckpt.config = header.at("config").get<ModelConfig>();
    ckpt.metadata = header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("bad checkpoint header: ") + e.what());
  }
  if (ckpt.config.input_feature_dim != expected_input_dim)
    throw VersionMismatch("checkpoint input width " + std::to_string(ckpt.config.input_feature_dim) +
                          " does not match expected " + std::to_string(expected_input_dim) +
                          " (d_x + d_y = " + std::to_string(expected_input_dim / 16) + " features)");
  try {
    ckpt.config.validate();
  } catch (const InvalidConfig& e) {
    throw CorruptCheckpoint(std::string("checkpoint config invalid: ") + e.what());
  }

  const auto layout = parameter_layout(ckpt.config);
  const auto count = get<std::uint32_t>(in);
  if (count != layout.size()) throw CorruptCheckpoint("checkpoint array count does not match its config");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in);
    if (name_len > 4096) throw CorruptCheckpoint("implausible array name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw CorruptCheckpoint("checkpoint is truncated");
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    const auto& expect = layout[i];
    if (name != expect.name || rows != static_cast<std::uint32_t>(expect.rows) ||
        cols != static_cast<std::uint32_t>(expect.cols))
      throw CorruptCheckpoint("array '" + name + "' does not match the config layout");
    ckpt.params.add(name, get_array(in, rows, cols));
  }
  const auto has_adam = get<std::uint8_t>(in);
  if (has_adam > 1) throw CorruptCheckpoint("bad optimizer-state flag");
  if (has_adam) {
    AdamState<float> adam;
    adam.step = get<std::int64_t>(in);
    adam.m = ckpt.params.zeros_like();
    adam.v = ckpt.params.zeros_like();
    for (auto& m : adam.m.values) m = get_array(in, static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols()));
    for (auto& v : adam.v.values) v = get_array(in, static_cast<std::uint32_t>(v.rows()), static_cast<std::uint32_t>(v.cols()));
    ckpt.adam = std::move(adam);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CorruptCheckpoint("trailing bytes after checkpoint");
  if (!ckpt.params.all_finite()) throw CorruptCheckpoint("checkpoint contains non-finite parameters");
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, int expected_input_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptCheckpoint("cannot open checkpoint " + path.string());
  return load_checkpoint(in, expected_input_dim);
}

}  // namespace nsr::model
