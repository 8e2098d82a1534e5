#include "penseg/nn/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "penseg/errors.hpp"

namespace penseg::nn {

namespace {

constexpr std::array<char, 4> kMagic = {'P', 'S', 'N', 'N'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("checkpoint truncated");
  return v;
}

void put_shape(std::ostream& out, const Shape& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  for (auto d : s) put<std::uint64_t>(out, d);
}

Shape get_shape(std::istream& in) {
  const auto rank = get<std::uint32_t>(in);
  if (rank > 8) throw CheckpointError("implausible tensor rank");
  Shape s(rank);
  for (auto& d : s) d = get<std::uint64_t>(in);
  return s;
}

}  // namespace

void save_network(std::ostream& out, const Network& net) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, net.seed());
  put<double>(out, net.l2());
  put_shape(out, net.input_shape());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.specs().size()));
  for (const auto& s : net.specs()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.kind));
    put<std::uint64_t>(out, s.kernel_h);
    put<std::uint64_t>(out, s.kernel_w);
    put<std::uint64_t>(out, s.filters);
    put<std::uint64_t>(out, s.units);
    put<std::uint8_t>(out, s.return_sequences ? 1 : 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.activation));
    put<double>(out, s.rate);
    put_shape(out, s.target);
  }
  for (std::size_t l = 0; l < net.size(); ++l) {
    const auto& params = net.layer(l).params();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
      put<std::uint64_t>(out, static_cast<std::uint64_t>(p.rows()));
      put<std::uint64_t>(out, static_cast<std::uint64_t>(p.cols()));
      out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
    }
  }
  if (!out) throw CheckpointError("failed writing checkpoint");
}

Network load_network(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw CheckpointError("not a network checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const auto seed = get<std::uint64_t>(in);
  const auto l2 = get<double>(in);
  const Shape input = get_shape(in);
  const auto n_layers = get<std::uint32_t>(in);
  if (n_layers == 0 || n_layers > 1024) throw CheckpointError("implausible layer count");
  std::vector<LayerSpec> specs(n_layers);
  for (auto& s : specs) {
    const auto kind = get<std::uint32_t>(in);
    if (kind > static_cast<std::uint32_t>(LayerKind::Reshape)) throw CheckpointError("unknown layer kind");
    s.kind = static_cast<LayerKind>(kind);
    s.kernel_h = get<std::uint64_t>(in);
    s.kernel_w = get<std::uint64_t>(in);
    s.filters = get<std::uint64_t>(in);
    s.units = get<std::uint64_t>(in);
    s.return_sequences = get<std::uint8_t>(in) != 0;
    const auto act = get<std::uint32_t>(in);
    if (act > static_cast<std::uint32_t>(Activation::Softmax)) throw CheckpointError("unknown activation");
    s.activation = static_cast<Activation>(act);
    s.rate = get<double>(in);
    s.target = get_shape(in);
  }
  Network net(input, specs, seed, l2);
  for (std::size_t l = 0; l < net.size(); ++l) {
    auto& params = net.layer(l).params();
    if (get<std::uint32_t>(in) != params.size()) throw CheckpointError("parameter count mismatch");
    for (auto& p : params) {
      const auto rows = get<std::uint64_t>(in);
      const auto cols = get<std::uint64_t>(in);
      if (rows != static_cast<std::uint64_t>(p.rows()) || cols != static_cast<std::uint64_t>(p.cols())) {
        throw CheckpointError("parameter shape mismatch");
      }
      if (!in.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)))) {
        throw CheckpointError("checkpoint truncated");
      }
    }
  }
  return net;
}

void save_network(const std::filesystem::path& file, const Network& net) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + file.string());
  save_network(out, net);
}

Network load_network(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + file.string());
  return load_network(in);
}

}  // namespace penseg::nn
