// SPDX-License-Identifier: Apache-2.0

#include "lionrank/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace lionrank {

namespace {

void put_section(ByteWriter &out, std::string_view name,
                 const std::string &payload) {
  out.str(name);
  out.u64(payload.size());
  out.raw(payload);
}

std::string header_payload(std::string_view name, std::uint32_t epoch,
                           std::uint64_t step, const CrossEncoderConfig &c) {
  ByteWriter w;
  w.str(name);
  w.u64(c.vocab_size);
  w.u64(c.d_model);
  w.u64(c.n_layers);
  w.u64(c.n_heads);
  w.u64(c.d_ff);
  w.u64(c.max_len);
  w.u64(c.seed);
  w.u32(epoch);
  w.u64(step);
  return w.take();
}

std::string vocab_payload(const Vocab &vocab) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(vocab.tokens().size()));
  for (const auto &t : vocab.tokens())
    w.str(t);
  return w.take();
}

std::string params_payload(const ParameterList &params) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto &p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape())
      w.u64(d);
    w.f64s(p.value.data());
  }
  return w.take();
}

} // namespace

std::string encode_checkpoint(std::string_view name, std::uint32_t epoch,
                              std::uint64_t step, const Vocab &vocab,
                              const CrossEncoder &model,
                              const Optimizer *optimizer) {
  ByteWriter out;
  out.raw(kCheckpointMagic);
  out.u32(kCheckpointVersion);
  out.u32(optimizer ? 4 : 3);
  put_section(out, "header", header_payload(name, epoch, step, model.config()));
  put_section(out, "vocab", vocab_payload(vocab));
  put_section(out, "params", params_payload(model.parameters()));
  if (optimizer) {
    ByteWriter w;
    optimizer->save(w);
    put_section(out, "optimizer", w.bytes());
  }
  return out.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  ByteReader in(bytes);
  if (in.remaining() < kCheckpointMagic.size() ||
      in.raw(kCheckpointMagic.size()) != kCheckpointMagic)
    throw FormatError("not a lionrank checkpoint (bad magic)");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  const std::uint32_t sections = in.u32();

  std::optional<CrossEncoderConfig> config;
  std::string name;
  std::uint32_t epoch = 0;
  std::uint64_t step = 0;
  std::optional<Vocab> vocab;
  std::optional<ParameterList> params;
  std::unique_ptr<Optimizer> optimizer;

  for (std::uint32_t s = 0; s < sections; ++s) {
    const std::string section = in.str();
    const std::uint64_t len = in.u64();
    ByteReader body(in.raw(len));
    if (section == "header") {
      CrossEncoderConfig c;
      name = body.str();
      c.vocab_size = body.u64();
      c.d_model = body.u64();
      c.n_layers = body.u64();
      c.n_heads = body.u64();
      c.d_ff = body.u64();
      c.max_len = body.u64();
      c.seed = body.u64();
      epoch = body.u32();
      step = body.u64();
      config = c;
    } else if (section == "vocab") {
      std::vector<std::string> tokens(body.count(4));
      std::map<std::string, int> table;
      for (std::size_t i = 0; i < tokens.size(); ++i)
        table.emplace(body.str(), static_cast<int>(Vocab::kReserved + i));
      vocab = Vocab::from_table(std::move(table));
    } else if (section == "params") {
      ParameterList list(body.count(16));
      for (auto &p : list) {
        p.name = body.str();
        Shape shape(body.count(8));
        for (auto &d : shape)
          d = body.u64();
        p.value = Tensor(std::move(shape), body.f64s(), true);
      }
      params = std::move(list);
    } else if (section == "optimizer") {
      optimizer = load_optimizer(body);
    } else {
      throw FormatError("unknown checkpoint section '" + section + "'");
    }
    if (!body.done())
      throw FormatError("trailing bytes in checkpoint section '" + section +
                        "'");
  }
  if (!in.done())
    throw FormatError("trailing bytes after checkpoint sections");
  if (!config || !vocab || !params)
    throw FormatError("checkpoint is missing header, vocab or params");
  if (vocab->size() != config->vocab_size)
    throw FormatError("checkpoint vocab has " + std::to_string(vocab->size()) +
                      " ids but header says " +
                      std::to_string(config->vocab_size));

  return Checkpoint{std::move(name), epoch, step, std::move(*vocab),
                    CrossEncoder::from_parameters(*config, std::move(*params)),
                    std::move(optimizer)};
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path &path, std::string_view bytes) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw std::runtime_error("short write to " + path.string());
}

} // namespace lionrank
