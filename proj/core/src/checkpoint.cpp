#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "idsr/error.hpp"
#include "idsr/training.hpp"

namespace idsr::training {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'I', 'D', 'S', 'R', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json train_to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"lr0", t.lr0},
          {"decay_after", t.decay_after},
          {"decay_every", t.decay_every},
          {"decay_factor", t.decay_factor},
          {"batch", t.batch},
          {"patch", t.patch},
          {"seed", t.seed},
          {"lambda_alp", t.weights.lambda_alp},
          {"lambda_pixel_dpr", t.weights.lambda_pixel_dpr},
          {"lambda_pixel_ggir", t.weights.lambda_pixel_ggir},
          {"dpr_pixel", t.dpr_pixel == PixelLoss::l1 ? "l1" : "l2"},
          {"luminance_losses", t.luminance_losses},
          {"include_eta0", t.include_eta0},
          {"clip_norm", t.clip_norm}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.epochs = j.at("epochs").get<int>();
  t.lr0 = j.at("lr0").get<double>();
  t.decay_after = j.at("decay_after").get<int>();
  t.decay_every = j.at("decay_every").get<int>();
  t.decay_factor = j.at("decay_factor").get<double>();
  t.batch = j.at("batch").get<int>();
  t.patch = j.at("patch").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.weights.lambda_alp = j.at("lambda_alp").get<double>();
  t.weights.lambda_pixel_dpr = j.at("lambda_pixel_dpr").get<double>();
  t.weights.lambda_pixel_ggir = j.at("lambda_pixel_ggir").get<double>();
  t.dpr_pixel = j.at("dpr_pixel").get<std::string>() == "l2" ? PixelLoss::l2 : PixelLoss::l1;
  t.luminance_losses = j.at("luminance_losses").get<bool>();
  t.include_eta0 = j.at("include_eta0").get<bool>();
  t.clip_norm = j.at("clip_norm").get<double>();
  return t;
}

struct Blob {
  std::string name;
  std::string group;
  ad::Shape shape;
  const float* data;
  std::size_t count;
};

std::vector<Blob> collect_blobs(const Checkpoint& c) {
  std::vector<Blob> blobs;
  std::size_t k = 0;
  for (const auto& [name, t] : c.model.params) {
    blobs.push_back({name, "param", t.shape(), t.data().data(), t.numel()});
    const auto& m = c.adam.m.at(k);
    const auto& v = c.adam.v.at(k);
    blobs.push_back({name, "adam_m", t.shape(), m.data(), m.size()});
    blobs.push_back({name, "adam_v", t.shape(), v.data(), v.size()});
    ++k;
  }
  return blobs;
}

std::uint32_t read_u32(const std::string& b, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, b.data() + at, sizeof v);
  return v;
}

std::uint64_t read_u64(const std::string& b, std::size_t at) {
  std::uint64_t v;
  std::memcpy(&v, b.data() + at, sizeof v);
  return v;
}

}  // namespace

std::string checkpoint_bytes(const Checkpoint& c) {
  json meta;
  meta["kind"] = nets::to_string(c.model.kind);
  meta["net"] = {{"blocks", c.model.config.blocks},
                 {"channels", c.model.config.channels},
                 {"input_channels", c.model.config.input_channels},
                 {"use_gam", c.model.config.use_gam}};
  meta["train"] = train_to_json(c.train);
  meta["basis_hash"] = c.basis_hash;
  meta["epoch"] = c.epoch;
  meta["rng_state"] = c.rng_state;
  meta["adam"] = {{"step", c.adam.step},
                  {"lr", c.adam.config.lr},
                  {"beta1", c.adam.config.beta1},
                  {"beta2", c.adam.config.beta2},
                  {"eps", c.adam.config.eps}};
  json hist = json::array();
  for (const auto& h : c.history) {
    json terms = json::array();
    for (const auto& [n, v] : h.terms) terms.push_back({n, v});
    hist.push_back({{"epoch", h.epoch}, {"lr", h.lr}, {"loss", h.loss}, {"terms", terms}});
  }
  meta["history"] = hist;

  const auto blobs = collect_blobs(c);
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& b : blobs) {
    tensors.push_back({{"name", b.name},
                       {"group", b.group},
                       {"shape", {b.shape.n, b.shape.c, b.shape.h, b.shape.w}},
                       {"offset", offset},
                       {"count", b.count}});
    offset += b.count * sizeof(float);
  }
  meta["tensors"] = tensors;

  const std::string text = meta.dump();
  std::string out(kMagic, sizeof kMagic);
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&version), sizeof version);
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += text;
  for (const auto& b : blobs) out.append(reinterpret_cast<const char*>(b.data), b.count * sizeof(float));
  return out;
}

Checkpoint checkpoint_from_bytes(const std::string& bytes) {
  constexpr std::size_t header = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  require(bytes.size() >= sizeof kMagic && std::memcmp(bytes.data(), kMagic, sizeof kMagic) == 0, Errc::bad_magic,
          "not an idsr checkpoint (bad magic)");
  require(bytes.size() >= header, Errc::truncated, "checkpoint header is truncated");
  const std::uint32_t version = read_u32(bytes, sizeof kMagic);
  require(version == kCheckpointVersion, Errc::version_mismatch,
          "checkpoint version " + std::to_string(version) + " is not supported (expected " +
              std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t len = read_u64(bytes, sizeof kMagic + sizeof(std::uint32_t));
  require(len <= bytes.size() - header, Errc::truncated, "checkpoint metadata is truncated");

  Checkpoint c;
  std::size_t blob_start = header + len;
  try {
    const json meta = json::parse(bytes.substr(header, len));
    const auto kind = nets::net_kind_from_string(meta.at("kind").get<std::string>());
    nets::NetConfig net;
    net.blocks = meta.at("net").at("blocks").get<int>();
    net.channels = meta.at("net").at("channels").get<int>();
    net.input_channels = meta.at("net").at("input_channels").get<int>();
    net.use_gam = meta.at("net").at("use_gam").get<bool>();
    c.model = nets::make_model<float>(kind, net, 0);
    c.train = train_from_json(meta.at("train"));
    c.basis_hash = meta.at("basis_hash").get<std::string>();
    c.epoch = meta.at("epoch").get<int>();
    c.rng_state = meta.at("rng_state").get<std::string>();
    const auto& adam = meta.at("adam");
    c.adam.init(c.model.params);
    c.adam.step = adam.at("step").get<std::int64_t>();
    c.adam.config.lr = adam.at("lr").get<double>();
    c.adam.config.beta1 = adam.at("beta1").get<double>();
    c.adam.config.beta2 = adam.at("beta2").get<double>();
    c.adam.config.eps = adam.at("eps").get<double>();
    for (const auto& h : meta.at("history")) {
      EpochLog log;
      log.epoch = h.at("epoch").get<int>();
      log.lr = h.at("lr").get<double>();
      log.loss = h.at("loss").get<double>();
      for (const auto& t : h.at("terms")) log.terms.emplace_back(t.at(0).get<std::string>(), t.at(1).get<double>());
      c.history.push_back(std::move(log));
    }

    const auto& tensors = meta.at("tensors");
    require(tensors.size() == 3 * c.model.params.size(), Errc::shape_mismatch,
            "checkpoint tensor list does not match the network configuration");
    std::size_t k = 0;
    std::size_t index = 0;
    for (auto& [name, t] : c.model.params) {
      for (int g = 0; g < 3; ++g, ++index) {
        const auto& d = tensors.at(index);
        const std::string group = d.at("group").get<std::string>();
        const auto shape = d.at("shape").get<std::vector<int>>();
        require(d.at("name").get<std::string>() == name && shape.size() == 4, Errc::shape_mismatch,
                "checkpoint tensor " + std::to_string(index) + " does not match parameter '" + name + "'");
        const ad::Shape s{shape[0], shape[1], shape[2], shape[3]};
        require(s == t.shape(), Errc::shape_mismatch,
                "parameter '" + name + "' has shape " + s.str() + " in the checkpoint but " + t.shape().str() +
                    " in the network");
        const auto offset = d.at("offset").get<std::size_t>();
        const auto count = d.at("count").get<std::size_t>();
        float* dst = group == "param" ? t.data().data() : (group == "adam_m" ? c.adam.m[k].data() : c.adam.v[k].data());
        const std::size_t expected = group == "param" ? t.numel() : c.adam.m[k].size();
        require(count == expected, Errc::shape_mismatch, "blob size mismatch for '" + name + "' (" + group + ")");
        require(blob_start + offset + count * sizeof(float) <= bytes.size(), Errc::truncated,
                "checkpoint data is truncated");
        std::memcpy(dst, bytes.data() + blob_start + offset, count * sizeof(float));
      }
      ++k;
    }
  } catch (const json::exception& e) {
    fail(Errc::corrupt_data, std::string("checkpoint metadata is malformed: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = checkpoint_bytes(ckpt);
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io_failure, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), Errc::io_failure, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::missing_file, "cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_bytes(buf.str());
}

}  // namespace idsr::training
