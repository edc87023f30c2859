#include "sata/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace sata::ckpt {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'T', 'A'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  buf.push_back(v & 0xff);
  buf.push_back((v >> 8) & 0xff);
  buf.push_back((v >> 16) & 0xff);
  buf.push_back((v >> 24) & 0xff);
}

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;

  bool done() const { return pos >= buf.size(); }
  uint32_t u32() {
    if (pos + 4 > buf.size()) throw Error("ConfigError", "truncated checkpoint");
    uint32_t v = buf[pos] | (buf[pos + 1] << 8) | (buf[pos + 2] << 16) |
                 (static_cast<uint32_t>(buf[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  std::string str(size_t n) {
    if (pos + n > buf.size()) throw Error("ConfigError", "truncated checkpoint");
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace

std::vector<uint8_t> serialize_checkpoint(const model::ModelConfig& cfg,
                                          const model::ParamSetT<float>& params) {
  std::vector<uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32(buf, kVersion);
  std::string config = cfg.to_json();
  put_u32(buf, static_cast<uint32_t>(config.size()));
  buf.insert(buf.end(), config.begin(), config.end());
  for (const auto& [name, tensor] : params.entries) {
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    put_u32(buf, static_cast<uint32_t>(tensor->shape.size()));
    for (int d : tensor->shape) put_u32(buf, static_cast<uint32_t>(d));
    for (float v : tensor->data) {
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(buf, bits);
    }
  }
  return buf;
}

LoadedCheckpoint parse_checkpoint(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  if (r.str(4) != std::string(kMagic, 4))
    throw Error("ConfigError", "not a SATA checkpoint (bad magic)");
  if (r.u32() != kVersion) throw Error("ConfigError", "unsupported checkpoint version");
  LoadedCheckpoint out;
  out.config = model::ModelConfig::from_json(r.str(r.u32()));
  while (!r.done()) {
    std::string name = r.str(r.u32());
    uint32_t rank = r.u32();
    ad::Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.u32());
    ad::Tensor t = ad::Tensor::zeros(shape);
    for (auto& v : t.data) {
      uint32_t bits = r.u32();
      std::memcpy(&v, &bits, 4);
    }
    out.params.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

void save_checkpoint(const std::string& path, const model::ModelConfig& cfg,
                     const model::ParamSetT<float>& params) {
  write_file(path, serialize_checkpoint(cfg, params));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file(path));
}

void apply_checkpoint(model::SataModel& m, const LoadedCheckpoint& ck) {
  if (ck.params.size() != m.params.entries.size())
    throw Error("ConfigError", "checkpoint parameter count mismatch");
  for (const auto& [name, tensor] : ck.params) {
    ad::Tensor* dst = m.params.find(name);
    if (dst == nullptr) throw Error("ConfigError", "unknown parameter '" + name + "'");
    if (dst->shape != tensor.shape)
      throw Error("ConfigError", "shape mismatch for parameter '" + name + "'");
    dst->data = tensor.data;
  }
}

std::unique_ptr<model::SataModel> model_from_checkpoint(const LoadedCheckpoint& ck) {
  auto m = std::make_unique<model::SataModel>(ck.config);
  m->init(0);
  apply_checkpoint(*m, ck);
  return m;
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("ConfigError", "cannot open '" + path + "'");
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(f),
                              std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("ConfigError", "cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("ConfigError", "cannot write '" + path + "'");
  f << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("ConfigError", "cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace sata::ckpt
