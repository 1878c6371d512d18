#include "xreid/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "xreid/errors.hpp"

namespace xreid {

namespace {

constexpr char kMagic[8] = {'X', 'R', 'E', 'I', 'D', 'C', 'K', '1'};

void write_u32(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void write_f64(std::ofstream& out, double d) {
  std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint32_t read_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw ValidationError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw ValidationError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

const Tensor& Checkpoint::get(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end()) {
    throw ValidationError("checkpoint: missing entry '" + name + "'");
  }
  return it->second;
}

double Checkpoint::get_scalar(const std::string& name) const {
  const Tensor& t = get(name);
  if (!t.is_scalar()) {
    throw ValidationError("checkpoint: entry '" + name + "' is not scalar");
  }
  return t.data[0];
}

std::uint64_t Checkpoint::get_u64(const std::string& name) const {
  return std::bit_cast<std::uint64_t>(get_scalar(name));
}

void Checkpoint::put_u64(const std::string& name, std::uint64_t v) {
  put_scalar(name, std::bit_cast<double>(v));
}

void write_checkpoint_file(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, 8);
  write_u32(out, ckpt.version);
  write_u32(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& [name, tensor] : ckpt.entries) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(tensor.rows));
    write_u32(out, static_cast<std::uint32_t>(tensor.cols));
    for (double v : tensor.data) write_f64(out, v);
  }
  if (!out) throw ValidationError("checkpoint: write failed for " + path);
}

Checkpoint read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw ValidationError("checkpoint: bad magic in " + path);
  }
  Checkpoint ckpt;
  ckpt.version = read_u32(in);
  if (ckpt.version != Checkpoint::kVersion) {
    throw ValidationError("checkpoint: unsupported version " +
                          std::to_string(ckpt.version));
  }
  std::uint32_t count = read_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw ValidationError("checkpoint: truncated file");
    std::uint32_t rows = read_u32(in);
    std::uint32_t cols = read_u32(in);
    Tensor t(static_cast<int>(rows), static_cast<int>(cols));
    for (double& v : t.data) v = read_f64(in);
    ckpt.entries[name] = std::move(t);
  }
  return ckpt;
}

namespace {

Tensor column_of(const std::vector<double>& v) {
  return Tensor::column(v);
}

std::vector<double> as_vector(const Tensor& t) { return t.data; }

}  // namespace

Checkpoint snapshot_training(const Model& model, const AdamState& adam,
                             long step, long sampler_cursor,
                             std::uint64_t run_seed) {
  Checkpoint c;
  c.put_scalar("step", static_cast<double>(step));
  c.put_scalar("sampler.cursor", static_cast<double>(sampler_cursor));
  c.put_u64("rng.run_seed", run_seed);

  Tensor shape(4, 1);
  shape.data = {static_cast<double>(model.shape.input_dim),
                static_cast<double>(model.shape.hidden_dim),
                static_cast<double>(model.shape.embed_dim),
                static_cast<double>(model.shape.num_classes)};
  c.put("model.shape", std::move(shape));
  c.put_scalar("model.normalizer", static_cast<double>(model.normalizer));
  c.put("enc.w1", model.enc_w1);
  c.put("enc.b1", model.enc_b1);
  c.put("enc.w2", model.enc_w2);
  c.put("enc.b2", model.enc_b2);
  c.put("cls.w", model.cls_w);

  c.put_scalar("csbn.variant", static_cast<double>(model.csbn.variant));
  c.put("csbn.gamma", column_of(model.csbn.gamma));
  c.put("csbn.shift", column_of(model.csbn.shift));
  c.put("csbn.running_mean", column_of(model.csbn.running_mean));
  c.put("csbn.running_var", column_of(model.csbn.running_var));
  c.put_scalar("csbn.momentum", model.csbn.momentum);
  c.put_scalar("csbn.epsilon", model.csbn.epsilon);
  c.put_scalar("csbn.batches_seen", static_cast<double>(model.csbn.batches_seen));

  c.put_scalar("adam.t", static_cast<double>(adam.step_count));
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    c.put("adam.m." + std::to_string(i), adam.m[i]);
    c.put("adam.v." + std::to_string(i), adam.v[i]);
  }
  c.put_scalar("adam.count", static_cast<double>(adam.m.size()));
  return c;
}

Model restore_model(const Checkpoint& ckpt) {
  const Tensor& shape = ckpt.get("model.shape");
  if (shape.size() != 4) throw ValidationError("checkpoint: bad model.shape");
  Model m;
  m.shape.input_dim = static_cast<int>(shape.data[0]);
  m.shape.hidden_dim = static_cast<int>(shape.data[1]);
  m.shape.embed_dim = static_cast<int>(shape.data[2]);
  m.shape.num_classes = static_cast<int>(shape.data[3]);
  m.normalizer = static_cast<NormalizerKind>(
      static_cast<int>(ckpt.get_scalar("model.normalizer")));
  m.enc_w1 = ckpt.get("enc.w1");
  m.enc_b1 = ckpt.get("enc.b1");
  m.enc_w2 = ckpt.get("enc.w2");
  m.enc_b2 = ckpt.get("enc.b2");
  m.cls_w = ckpt.get("cls.w");

  m.csbn.variant = static_cast<CsbnVariant>(
      static_cast<int>(ckpt.get_scalar("csbn.variant")));
  m.csbn.gamma = as_vector(ckpt.get("csbn.gamma"));
  m.csbn.shift = as_vector(ckpt.get("csbn.shift"));
  m.csbn.running_mean = as_vector(ckpt.get("csbn.running_mean"));
  m.csbn.running_var = as_vector(ckpt.get("csbn.running_var"));
  m.csbn.momentum = ckpt.get_scalar("csbn.momentum");
  m.csbn.epsilon = ckpt.get_scalar("csbn.epsilon");
  m.csbn.batches_seen = static_cast<long>(ckpt.get_scalar("csbn.batches_seen"));
  m.csbn.mode = CsbnMode::train;
  return m;
}

TrainingSnapshot restore_training(const Checkpoint& ckpt) {
  TrainingSnapshot s;
  s.model = restore_model(ckpt);
  s.step = static_cast<long>(ckpt.get_scalar("step"));
  s.sampler_cursor = static_cast<long>(ckpt.get_scalar("sampler.cursor"));
  s.run_seed = ckpt.get_u64("rng.run_seed");
  s.adam.step_count = static_cast<long>(ckpt.get_scalar("adam.t"));
  std::size_t n = static_cast<std::size_t>(ckpt.get_scalar("adam.count"));
  for (std::size_t i = 0; i < n; ++i) {
    s.adam.m.push_back(ckpt.get("adam.m." + std::to_string(i)));
    s.adam.v.push_back(ckpt.get("adam.v." + std::to_string(i)));
  }
  return s;
}

}  // namespace xreid
