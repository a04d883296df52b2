#include "lcmh/model_io.hpp"

#include <algorithm>

#include "lcmh/errors.hpp"
#include "lcmh/retrieval.hpp"

namespace lcmh {

namespace {

constexpr std::uint32_t kModelVersion = 1;

void write_bank(ByteWriter& out, const PrototypeBank& bank) {
  out.u64(bank.num_classes());
  out.u64(bank.code_length());
  out.f64s(bank.centroids.values());
  for (std::size_t c : bank.counts) out.u64(c);
  for (bool h : bank.is_head) out.u8(h ? 1 : 0);
}

PrototypeBank read_bank(ByteReader& in) {
  const std::uint64_t classes = in.count(8, "class count");
  const std::uint64_t c = in.count(8, "code length");
  if (c != 0 && classes > in.remaining() / 8 / c) throw FormatError("truncated prototype bank", in.offset());
  PrototypeBank bank{DenseMatrix(classes, c), std::vector<std::size_t>(classes), std::vector<bool>(classes)};
  for (double& v : bank.centroids.values()) v = in.f64();
  for (auto& k : bank.counts) k = in.u64();
  for (std::size_t k = 0; k < classes; ++k) bank.is_head[k] = in.u8() != 0;
  return bank;
}

void write_embedder(ByteWriter& out, const MetaEmbedder& e) {
  write_net(out, e.basic_net);
  write_net(out, e.weight_net);
  out.u8(e.eta_net ? 1 : 0);
  if (e.eta_net) write_net(out, *e.eta_net);
  out.u32(static_cast<std::uint32_t>(e.eta.mode));
  out.f64(e.eta.eta_max);
  out.f64(e.eta.epsilon);
  out.u32(static_cast<std::uint32_t>(e.weight_norm));
  out.u8(e.use_memory ? 1 : 0);
}

MetaEmbedder read_embedder(ByteReader& in) {
  MetaEmbedder e;
  e.basic_net = read_net(in);
  e.weight_net = read_net(in);
  if (in.u8()) e.eta_net = read_net(in);
  const std::size_t mode_at = in.offset();
  const std::uint32_t mode = in.u32();
  if (mode > static_cast<std::uint32_t>(EtaMode::learned)) throw FormatError("unknown eta mode tag", mode_at);
  e.eta.mode = static_cast<EtaMode>(mode);
  e.eta.eta_max = in.f64();
  e.eta.epsilon = in.f64();
  const std::size_t norm_at = in.offset();
  const std::uint32_t norm = in.u32();
  if (norm > static_cast<std::uint32_t>(WeightNorm::raw)) throw FormatError("unknown weight norm tag", norm_at);
  e.weight_norm = static_cast<WeightNorm>(norm);
  e.use_memory = in.u8() != 0;
  if (e.eta.mode == EtaMode::learned && !e.eta_net)
    throw FormatError("learned eta mode without an eta network", in.offset());
  return e;
}

}  // namespace

void write_net(ByteWriter& out, const FeedForwardNet& net) {
  out.u64(net.layer_count());
  for (const auto& s : net.layers()) {
    out.u64(s.input_dim);
    out.u64(s.output_dim);
    out.u32(static_cast<std::uint32_t>(s.activation));
  }
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    out.f64s(net.weights(k).values());
    out.f64s(net.bias(k));
  }
}

FeedForwardNet read_net(ByteReader& in) {
  const std::uint64_t layers = in.count(20, "layer count");
  std::vector<LayerSpec> specs;
  std::uint64_t params = 0;
  for (std::uint64_t k = 0; k < layers; ++k) {
    const std::size_t at = in.offset();
    LayerSpec s;
    s.input_dim = in.u64();
    s.output_dim = in.u64();
    const std::uint32_t tag = in.u32();
    if (s.input_dim == 0 || s.output_dim == 0 || s.input_dim > (1u << 24) || s.output_dim > (1u << 24))
      throw FormatError("implausible layer dimensions", at);
    if (tag > static_cast<std::uint32_t>(Activation::tanh)) throw FormatError("unknown activation tag", at + 16);
    s.activation = static_cast<Activation>(tag);
    params += s.output_dim * (s.input_dim + 1);
    specs.push_back(s);
  }
  if (params > in.remaining() / 8) throw FormatError("truncated network parameters", in.offset());
  FeedForwardNet net;
  try {
    net = FeedForwardNet(std::move(specs));
  } catch (const ShapeError& e) {
    throw FormatError(e.what(), in.offset());
  }
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    for (double& v : net.weights(k).values()) v = in.f64();
    for (double& v : net.bias(k)) v = in.f64();
  }
  return net;
}

std::vector<std::uint8_t> encode_model(const HashModel& model) {
  ByteWriter out;
  out.magic("LCMH");
  out.u32(kModelVersion);
  out.u64(model.code_length());
  out.f64(model.alpha);
  out.f64(model.beta);
  out.u64(model.partition.num_classes());
  out.u64(model.partition.threshold);
  for (std::size_t k = 0; k < model.partition.num_classes(); ++k) {
    out.u64(model.partition.counts[k]);
    out.u8(model.partition.is_head[k] ? 1 : 0);
  }
  write_embedder(out, model.image);
  write_bank(out, model.image_bank);
  write_embedder(out, model.text);
  write_bank(out, model.text_bank);
  const BinaryCodeMatrix packed = binarize(model.codes);
  out.u64(packed.bits());
  out.u64(packed.rows());
  for (std::uint64_t w : packed.words()) out.u64(w);
  return out.bytes();
}

HashModel decode_model(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  in.expect_magic("LCMH");
  in.expect_version(kModelVersion);
  HashModel model;
  const std::size_t c_at = in.offset();
  const std::uint64_t c = in.u64();
  model.alpha = in.f64();
  model.beta = in.f64();
  const std::uint64_t classes = in.count(9, "class count");
  model.partition.threshold = in.u64();
  for (std::uint64_t k = 0; k < classes; ++k) {
    model.partition.counts.push_back(in.u64());
    model.partition.is_head.push_back(in.u8() != 0);
  }
  model.image = read_embedder(in);
  model.image_bank = read_bank(in);
  model.text = read_embedder(in);
  model.text_bank = read_bank(in);
  if (model.image.code_length() != c || model.text.code_length() != c || model.image_bank.code_length() != c ||
      model.text_bank.code_length() != c)
    throw FormatError("component code lengths disagree with header", c_at);

  const std::uint64_t bits = in.u64();
  const std::uint64_t n = in.u64();
  const std::uint64_t words = (bits + 63) / 64;
  if (bits != c) throw FormatError("training code length disagrees with header", in.offset() - 16);
  if (words != 0 && n > in.remaining() / 8 / words) throw FormatError("truncated training codes", in.offset());
  model.codes = DenseMatrix(bits, n);
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t w = 0; w < words; ++w) {
      const std::uint64_t word = in.u64();
      for (std::uint64_t b = w * 64; b < std::min<std::uint64_t>(bits, w * 64 + 64); ++b)
        model.codes(b, i) = ((word >> (b % 64)) & 1u) ? 1.0 : -1.0;
    }
  if (!in.at_end()) throw FormatError("trailing bytes after model", in.offset());
  return model;
}

void save_model(const HashModel& model, const std::filesystem::path& path) {
  write_file_bytes(path, encode_model(model));
}

HashModel load_model(const std::filesystem::path& path) { return decode_model(read_file_bytes(path)); }

}  // namespace lcmh
