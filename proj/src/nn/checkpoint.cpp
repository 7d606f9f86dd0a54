#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "fakeaudio/error.hpp"
#include "fakeaudio/nn.hpp"

namespace fakeaudio::nn {
namespace {

constexpr char kMagic[4] = {'M', 'L', 'P', 'C'};

template <typename UInt>
void put_le(std::ostream& out, UInt v) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(UInt));
}

void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

template <typename UInt>
UInt get_le(std::istream& in) {
  unsigned char bytes[sizeof(UInt)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(UInt));
  if (static_cast<std::size_t>(in.gcount()) != sizeof(UInt)) throw IoError("MLPC checkpoint truncated");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

void put_stack(std::ostream& out, const LayerStack& stack) {
  for (const auto& layer : stack) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) put_f64(out, layer.weight(i, j));
    }
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j) put_f64(out, layer.bias[j]);
  }
}

void get_stack(std::istream& in, LayerStack& stack) {
  for (auto& layer : stack) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = get_f64(in);
    }
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j) layer.bias[j] = get_f64(in);
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const MlpModel& model, const AdamState* adam) {
  validate(model);
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.layer_dims.size()));
  for (auto d : model.layer_dims) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  put_f64(out, model.dropout_p);
  put_stack(out, model.layers);
  put_le<std::uint8_t>(out, adam ? 1 : 0);
  if (adam) {
    put_le<std::uint64_t>(out, adam->step);
    put_f64(out, adam->hyper.lr);
    put_f64(out, adam->hyper.beta1);
    put_f64(out, adam->hyper.beta2);
    put_f64(out, adam->hyper.eps);
    put_stack(out, adam->m);
    put_stack(out, adam->v);
  }
  if (!out) throw IoError("failed writing MLPC checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || !std::equal(magic, magic + 4, kMagic)) throw FormatError("not an MLPC checkpoint (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw FormatError("unsupported MLPC version " + std::to_string(version));
  const auto n_dims = get_le<std::uint32_t>(in);
  if (n_dims != kNumLayers + 1) throw FormatError("MLPC checkpoint must describe 5 layer widths");

  Checkpoint ckpt;
  for (auto& d : ckpt.model.layer_dims) d = get_le<std::uint32_t>(in);
  if (ckpt.model.layer_dims[0] == 0 || ckpt.model.layer_dims[0] > (1u << 20) || ckpt.model.layer_dims != layer_dims_for(ckpt.model.layer_dims[0])) {
    throw FormatError("MLPC checkpoint layer widths do not match the detector architecture");
  }
  ckpt.model.dropout_p = get_f64(in);
  ckpt.model.layers = zeros_like(ckpt.model);
  get_stack(in, ckpt.model.layers);
  validate(ckpt.model);

  const auto has_adam = get_le<std::uint8_t>(in);
  if (has_adam > 1) throw FormatError("MLPC checkpoint has an invalid optimizer flag");
  if (has_adam == 1) {
    AdamState state = AdamState::for_model(ckpt.model);
    state.step = get_le<std::uint64_t>(in);
    state.hyper.lr = get_f64(in);
    state.hyper.beta1 = get_f64(in);
    state.hyper.beta2 = get_f64(in);
    state.hyper.eps = get_f64(in);
    get_stack(in, state.m);
    get_stack(in, state.v);
    ckpt.adam = std::move(state);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model, const AdamState* adam) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, model, adam);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace fakeaudio::nn
