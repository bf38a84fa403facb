#include "bglm/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "bglm/bytes.hpp"

namespace bglm {

namespace {

constexpr std::string_view kMagic = "BGLM";

std::uint32_t narrow(std::size_t v) { return static_cast<std::uint32_t>(v); }

std::vector<std::uint8_t> encode_meta(const CheckpointMeta& m) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(m.kind));
  w.u8(m.mode == GateSource::Hidden ? 0 : 1);
  w.u8(m.gating_enabled ? 1 : 0);
  w.u8(m.behavior_branch ? 1 : 0);
  for (auto v : {m.vocab, m.embed, m.hidden, m.layers, m.gate_hidden, m.beh_embed, m.beh_hidden,
                 m.eval_batch, m.eval_bptt}) {
    w.u32(v);
  }
  w.raw(m.vocab_hash);
  return w.take();
}

// Model constructors report missing entries or bad dims with their own
// error types; from a file these are all malformed-checkpoint errors.
template <typename Fn>
auto as_load_error(Fn&& fn) {
  try {
    return fn();
  } catch (const IndexError& e) {
    throw LoadError(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint: ") + e.what());
  }
}

std::uint8_t flag(std::uint8_t v, const char* what) {
  if (v > 1) throw LoadError(std::string("checkpoint: invalid ") + what + " byte");
  return v;
}

CheckpointMeta decode_meta(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  CheckpointMeta m;
  const auto kind = flag(r.u8(), "model kind");
  m.kind = kind == 0 ? ModelKind::Behavior : ModelKind::LanguageModel;
  m.mode = flag(r.u8(), "gate source") == 0 ? GateSource::Hidden : GateSource::Posterior;
  m.gating_enabled = flag(r.u8(), "gating flag") == 1;
  m.behavior_branch = flag(r.u8(), "branch flag") == 1;
  for (auto* v : {&m.vocab, &m.embed, &m.hidden, &m.layers, &m.gate_hidden, &m.beh_embed,
                  &m.beh_hidden, &m.eval_batch, &m.eval_bptt}) {
    *v = r.u32();
  }
  auto hash = r.raw(m.vocab_hash.size());
  std::copy(hash.begin(), hash.end(), m.vocab_hash.begin());
  if (!r.done()) throw LoadError("checkpoint: metadata block has trailing bytes");
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  const auto meta = encode_meta(ckpt.meta);
  w.u32(narrow(meta.size()));
  w.raw(meta);
  w.u32(narrow(ckpt.params.size()));
  for (const auto& [name, p] : ckpt.params) {
    w.u32(narrow(name.size()));
    w.raw(name);
    w.u32(2);
    w.u64(p.value.rows());
    w.u64(p.value.cols());
    for (double v : p.value.data()) w.f64(v);
    w.u8(p.trainable ? 1 : 0);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < kMagic.size() || r.str(kMagic.size()) != kMagic) {
    throw LoadError("checkpoint: bad magic (not a BGLM file)");
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw LoadError("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto meta_len = r.u32();
  ckpt.meta = decode_meta(r.raw(meta_len));
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = r.str(r.u32());
    const auto rank = r.u32();
    if (rank != 2) throw LoadError("checkpoint: " + name + " has rank " + std::to_string(rank));
    const auto rows = r.u64();
    const auto cols = r.u64();
    if (cols != 0 && rows > r.remaining() / 8 / cols) throw LoadError("checkpoint: " + name + " truncated");
    Matrix value(rows, cols);
    for (double& v : value.data()) v = r.f64();
    const bool trainable = flag(r.u8(), "trainable flag") == 1;
    if (ckpt.params.contains(name)) throw LoadError("checkpoint: duplicate parameter " + name);
    ckpt.params.add(name, std::move(value), trainable);
  }
  if (!r.done()) throw LoadError("checkpoint: trailing bytes after parameters");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<Digest>& expected_vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint ckpt = decode_checkpoint(bytes);
  if (expected_vocab && *expected_vocab != ckpt.meta.vocab_hash) {
    throw LoadError(path.string() + ": vocabulary hash " + to_hex(ckpt.meta.vocab_hash) +
                    " does not match the corpus vocabulary " + to_hex(*expected_vocab));
  }
  return ckpt;
}

Checkpoint make_checkpoint(const BehaviorNet& net, const Vocab& vocab) {
  if (vocab.size() != net.dims().vocab) {
    throw LoadError("behavior net vocabulary size differs from the supplied vocab");
  }
  Checkpoint c;
  c.meta.kind = ModelKind::Behavior;
  c.meta.vocab = narrow(net.dims().vocab);
  c.meta.beh_embed = narrow(net.dims().embed);
  c.meta.beh_hidden = narrow(net.dims().hidden);
  c.meta.vocab_hash = vocab.hash();
  c.params = net.params();
  return c;
}

Checkpoint make_checkpoint(const GatedLm& model, const Vocab& vocab, std::size_t eval_batch,
                           std::size_t eval_bptt) {
  const auto& d = model.dims();
  if (vocab.size() != d.vocab) throw LoadError("language model vocabulary size differs from the supplied vocab");
  Checkpoint c;
  c.meta.kind = ModelKind::LanguageModel;
  c.meta.mode = model.spec().mode;
  c.meta.gating_enabled = model.gating_enabled();
  c.meta.behavior_branch = model.spec().behavior_branch;
  c.meta.vocab = narrow(d.vocab);
  c.meta.embed = narrow(d.embed);
  c.meta.hidden = narrow(d.hidden);
  c.meta.layers = narrow(d.layers);
  c.meta.gate_hidden = narrow(model.spec().behavior_branch ? d.gate_hidden : 0);
  if (model.spec().behavior_branch) {
    c.meta.beh_embed = narrow(model.params().at("beh.embedding").value.cols());
    c.meta.beh_hidden = narrow(model.behavior_hidden());
  }
  c.meta.eval_batch = narrow(eval_batch);
  c.meta.eval_bptt = narrow(eval_bptt);
  c.meta.vocab_hash = vocab.hash();
  c.params = model.params();
  return c;
}

BehaviorNet behavior_from_checkpoint(Checkpoint ckpt) {
  if (ckpt.meta.kind != ModelKind::Behavior) throw LoadError("checkpoint does not hold a behavior model");
  BehaviorNet net = as_load_error([&] { return BehaviorNet(std::move(ckpt.params)); });
  if (net.dims().vocab != ckpt.meta.vocab || net.dims().hidden != ckpt.meta.beh_hidden ||
      net.dims().embed != ckpt.meta.beh_embed) {
    throw LoadError("behavior checkpoint: parameter shapes disagree with metadata");
  }
  // Parameters load as trainable so the net can be trained further.
  for (auto& [_, p] : net.params()) p.trainable = true;
  return net;
}

GatedLm lm_from_checkpoint(Checkpoint ckpt) {
  if (ckpt.meta.kind != ModelKind::LanguageModel) throw LoadError("checkpoint does not hold a language model");
  GatedLmSpec spec;
  spec.dims = {ckpt.meta.vocab, ckpt.meta.embed, ckpt.meta.hidden, ckpt.meta.layers, ckpt.meta.gate_hidden};
  spec.behavior_branch = ckpt.meta.behavior_branch;
  spec.mode = ckpt.meta.mode;
  spec.gating_enabled = ckpt.meta.gating_enabled;
  GatedLm model = as_load_error([&] { return GatedLm(spec, std::move(ckpt.params)); });
  if (spec.behavior_branch && model.behavior_hidden() != ckpt.meta.beh_hidden) {
    throw LoadError("language model checkpoint: behavior width disagrees with metadata");
  }
  return model;
}

}  // namespace bglm
