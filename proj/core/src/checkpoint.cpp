#include "horo/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace horo {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

struct Reader {
  const std::string& data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) throw DataError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(
        static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(
        static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
};

std::string manifest_path(const std::string& path) { return path + ".json"; }

char hex_digit(unsigned v) { return v < 10 ? static_cast<char>('0' + v)
                                           : static_cast<char>('a' + v - 10); }

std::string hex64(std::uint64_t v) {
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[i] = hex_digit(static_cast<unsigned>(v & 0xf));
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const ParameterStore& p = ckpt.params;
  std::string out;
  out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(p.dim()));
  put_u32(out, static_cast<std::uint32_t>(p.hidden()));
  put_u32(out, p.curvature_trainable() ? 1u : 0u);
  put_u64(out, static_cast<std::uint64_t>(p.entity_count()));
  put_u64(out, static_cast<std::uint64_t>(p.relation_count()));
  put_f64(out, p.curvature());
  put_u64(out, fnv1a(ckpt.config_text));
  for (std::int32_t b = 0; b < block::kCount; ++b)
    for (double v : p.flat(b)) put_f64(out, v);

  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write checkpoint: " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));

  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["digest"] = hex64(fnv1a(ckpt.config_text));
  manifest["config"] = ckpt.config_text;
  manifest["entities"] = ckpt.entities.names();
  manifest["relations"] = ckpt.relations.names();
  manifest["step"] = ckpt.step;
  manifest["metrics"] = ckpt.metrics_json.empty()
                            ? nlohmann::json()
                            : nlohmann::json::parse(ckpt.metrics_json);
  std::ofstream mfile(manifest_path(path), std::ios::binary);
  if (!mfile) throw DataError("cannot write checkpoint manifest: " + manifest_path(path));
  mfile << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open checkpoint: " + path);
  std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  Reader r{data};
  r.need(sizeof(kCheckpointMagic));
  if (std::memcmp(data.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw DataError("checkpoint: bad magic");
  r.pos = sizeof(kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version > kCheckpointVersion)
    throw DataError("checkpoint: format version " + std::to_string(version) +
                    " is newer than this binary supports (" +
                    std::to_string(kCheckpointVersion) + ")");
  const auto d = static_cast<std::int32_t>(r.u32());
  const auto hidden = static_cast<std::int32_t>(r.u32());
  const bool trainable = r.u32() != 0;
  const auto n_entities = static_cast<std::int32_t>(r.u64());
  const auto n_relations = static_cast<std::int32_t>(r.u64());
  const double curvature = r.f64();
  const std::uint64_t digest = r.u64();

  Checkpoint ckpt;
  ckpt.params = ParameterStore(d, hidden, n_entities, n_relations, {curvature, trainable});

  std::size_t expected = r.pos;
  for (std::int32_t b = 0; b < block::kCount; ++b)
    expected += ckpt.params.flat(b).size() * sizeof(double);
  if (data.size() != expected)
    throw DataError("checkpoint: array byte length mismatch (" + std::to_string(data.size()) +
                    " vs expected " + std::to_string(expected) + ")");
  for (std::int32_t b = 0; b < block::kCount; ++b)
    for (double& v : ckpt.params.flat(b)) v = r.f64();

  std::ifstream mfile(manifest_path(path));
  if (!mfile) throw DataError("checkpoint manifest missing: " + manifest_path(path));
  nlohmann::json manifest;
  try {
    mfile >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  }
  ckpt.config_text = manifest.at("config").get<std::string>();
  if (fnv1a(ckpt.config_text) != digest)
    throw DataError("checkpoint: manifest config does not match the header digest");
  ckpt.step = manifest.at("step").get<std::int64_t>();
  if (!manifest.at("metrics").is_null()) ckpt.metrics_json = manifest.at("metrics").dump();
  for (const auto& name : manifest.at("entities")) ckpt.entities.intern(name.get<std::string>());
  for (const auto& name : manifest.at("relations"))
    ckpt.relations.intern(name.get<std::string>());
  if (ckpt.entities.size() != n_entities || ckpt.relations.size() != n_relations)
    throw DataError("checkpoint: vocabulary sizes disagree with the header");
  return ckpt;
}

}  // namespace horo
