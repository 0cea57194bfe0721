#include "ois/model/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <json.hpp>

#include "ois/io/png.hpp"

namespace ois {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'O', 'I', 'S', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void PutU32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void PutU64(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  const char* Take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t U32() {
    std::uint32_t v;
    std::memcpy(&v, Take(4), 4);
    return v;
  }
  std::uint64_t U64() {
    std::uint64_t v;
    std::memcpy(&v, Take(8), 8);
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

json TensorTable(const std::vector<NamedTensor>& tensors) {
  json table = json::array();
  for (const NamedTensor& t : tensors) {
    table.push_back({{"name", t.name}, {"shape", t.value.shape()}});
  }
  return table;
}

void AppendData(std::string& out, const std::vector<NamedTensor>& tensors) {
  for (const NamedTensor& t : tensors) {
    out.append(reinterpret_cast<const char*>(t.value.data()),
               t.value.size() * sizeof(float));
  }
}

std::vector<NamedTensor> ReadTensors(Reader& r, const json& table) {
  std::vector<NamedTensor> out;
  for (const json& entry : table) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    std::vector<float> data(ShapeSize(shape));
    std::memcpy(data.data(), r.Take(data.size() * sizeof(float)),
                data.size() * sizeof(float));
    t.value = Tensor(shape, std::move(data));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

std::string EncodeCheckpoint(const Checkpoint& ckpt) {
  json header;
  header["model"] = ckpt.model;
  header["train"] = ckpt.train;
  header["seed"] = ckpt.seed;
  header["step"] = ckpt.step;
  header["epochs_done"] = ckpt.epochs_done;
  header["epoch_losses"] = ckpt.epoch_losses;
  header["weights"] = TensorTable(ckpt.weights);
  header["optimizer"] = TensorTable(ckpt.optimizer);
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  PutU32(out, kCheckpointVersion);
  PutU64(out, text.size());
  out += text;
  AppendData(out, ckpt.weights);
  AppendData(out, ckpt.optimizer);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(out.data()),
            static_cast<uInt>(out.size())));
  PutU32(out, crc);
  return out;
}

Checkpoint DecodeCheckpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 16 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
            static_cast<uInt>(bytes.size() - 4)));
  if (crc != stored_crc) throw DataError("checkpoint checksum mismatch");

  const std::string body = bytes.substr(0, bytes.size() - 4);
  Reader r(body);
  r.Take(sizeof(kMagic));
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t header_len = r.U64();
  Checkpoint ckpt;
  try {
    const char* text = r.Take(header_len);
    const json header = json::parse(text, text + header_len);
    ckpt.model = header.at("model").get<ModelConfig>();
    ckpt.train = header.at("train").get<TrainConfig>();
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.step = header.at("step").get<std::int64_t>();
    ckpt.epochs_done = header.at("epochs_done").get<int>();
    ckpt.epoch_losses = header.at("epoch_losses").get<std::vector<double>>();
    ckpt.weights = ReadTensors(r, header.at("weights"));
    ckpt.optimizer = ReadTensors(r, header.at("optimizer"));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ValidationError& e) {
    throw DataError(std::string("invalid checkpoint config: ") + e.what());
  }
  if (r.pos() != body.size()) throw DataError("checkpoint has trailing bytes");
  return ckpt;
}

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  WriteFileBytes(tmp, EncodeCheckpoint(ckpt));
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  return DecodeCheckpoint(ReadFileBytes(path));
}

std::vector<NamedTensor> ExportWeights(OisModel<float>& model) {
  std::vector<NamedTensor> out;
  model.VisitParameters([&](const std::string& name, Parameter<float>& p) {
    out.push_back({name, p.value});
  });
  return out;
}

void ImportWeights(OisModel<float>& model,
                   const std::vector<NamedTensor>& weights) {
  std::size_t i = 0;
  model.VisitParameters([&](const std::string& name, Parameter<float>& p) {
    if (i >= weights.size()) throw ConfigError("checkpoint lacks weight " + name);
    const NamedTensor& w = weights[i++];
    if (w.name != name || w.value.shape() != p.value.shape()) {
      throw ConfigError("checkpoint weight '" + w.name + "' " +
                        ShapeToString(w.value.shape()) + " does not match '" +
                        name + "' " + ShapeToString(p.value.shape()));
    }
    p.value = w.value;
  });
  if (i != weights.size()) throw ConfigError("checkpoint has extra weights");
}

OisModel<float> ModelFromCheckpoint(const Checkpoint& ckpt) {
  OisModel<float> model(ckpt.model, ckpt.seed);
  ImportWeights(model, ckpt.weights);
  return model;
}

}  // namespace ois
