#include "biolm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace biolm::checkpoint {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'B', 'L', 'M', 'C', 'K', 'P', 'T', '1'};

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_i64(std::ostream& os, int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

int64_t read_i64(std::istream& is) {
  int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  write_u32(os, static_cast<uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(os, static_cast<uint32_t>(t.shape.size()));
  for (int64_t d : t.shape) write_i64(os, d);
  std::vector<float> f(t.data.size());
  for (size_t i = 0; i < t.data.size(); i++) {
    f[i] = static_cast<float>(t.data[i]);
  }
  os.write(reinterpret_cast<const char*>(f.data()),
           static_cast<std::streamsize>(f.size() * sizeof(float)));
}

std::pair<std::string, Tensor> read_tensor(std::istream& is) {
  const uint32_t name_len = read_u32(is);
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  const uint32_t ndim = read_u32(is);
  std::vector<int64_t> shape(ndim);
  for (uint32_t i = 0; i < ndim; i++) shape[i] = read_i64(is);
  Tensor t = Tensor::zeros(shape);
  std::vector<float> f(t.data.size());
  is.read(reinterpret_cast<char*>(f.data()),
          static_cast<std::streamsize>(f.size() * sizeof(float)));
  for (size_t i = 0; i < f.size(); i++) t.data[i] = f[i];
  if (!is) throw Error("checkpoint: truncated tensor record for " + name);
  return {std::move(name), std::move(t)};
}

nlohmann::ordered_json config_to_json(const model::ModelConfig& c) {
  nlohmann::ordered_json j;
  j["num_layers"] = c.num_layers;
  j["hidden_size"] = c.hidden_size;
  j["num_heads"] = c.num_heads;
  j["ffn_size"] = c.ffn_size;
  j["max_positions"] = c.max_positions;
  j["vocab_size"] = c.vocab_size;
  j["dropout"] = c.dropout;
  return j;
}

model::ModelConfig config_from_json(const nlohmann::ordered_json& j) {
  model::ModelConfig c;
  c.num_layers = j.at("num_layers").get<int>();
  c.hidden_size = j.at("hidden_size").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.ffn_size = j.at("ffn_size").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

}  // namespace

const Tensor* Checkpoint::find_extra(const std::string& name) const {
  for (const auto& [n, t] : extra) {
    if (n == name) return &t;
  }
  return nullptr;
}

void save(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("checkpoint: cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));

  nlohmann::ordered_json header;
  header["version"] = 1;
  header["model"] = config_to_json(ckpt.params.config);
  header["meta"] = ckpt.meta;
  const std::string hs = header.dump();
  write_u32(os, static_cast<uint32_t>(hs.size()));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  uint32_t count = 0;
  ckpt.params.for_each(
      [&count](const std::string&, const Tensor&) { count++; });
  count += static_cast<uint32_t>(ckpt.extra.size());
  write_u32(os, count);
  ckpt.params.for_each([&os](const std::string& name, const Tensor& t) {
    write_tensor(os, name, t);
  });
  for (const auto& [name, t] : ckpt.extra) write_tensor(os, name, t);
  if (!os) throw Error("checkpoint: write failed: " + path);
}

Checkpoint load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error("checkpoint: bad magic in " + path);
  }
  const uint32_t hlen = read_u32(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), hlen);
  if (!is) throw Error("checkpoint: truncated header in " + path);
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint: bad header json in " + path + ": " + e.what());
  }
  if (header.at("version").get<int>() != 1) {
    throw Error("checkpoint: unsupported version in " + path);
  }

  Checkpoint ckpt;
  const model::ModelConfig cfg = config_from_json(header.at("model"));
  Rng rng(0);
  ckpt.params = model::ModelParams::init(cfg, rng);
  ckpt.meta = header.at("meta");

  const uint32_t count = read_u32(is);
  std::vector<std::pair<std::string, Tensor>> loaded;
  loaded.reserve(count);
  for (uint32_t i = 0; i < count; i++) loaded.push_back(read_tensor(is));

  size_t next = 0;
  ckpt.params.for_each([&](const std::string& name, Tensor& t) {
    if (next >= loaded.size() || loaded[next].first != name) {
      throw Error("checkpoint: tensor " + name + " missing or out of order");
    }
    if (loaded[next].second.shape != t.shape) {
      throw Error("checkpoint: shape mismatch for " + name);
    }
    t = std::move(loaded[next].second);
    next++;
  });
  for (; next < loaded.size(); next++) {
    ckpt.extra.push_back(std::move(loaded[next]));
  }
  return ckpt;
}

Checkpoint average(const std::vector<std::string>& paths) {
  if (paths.empty()) throw Error("checkpoint average: no paths given");
  Checkpoint acc = load(paths[0]);
  for (size_t i = 1; i < paths.size(); i++) {
    Checkpoint c = load(paths[i]);
    if (!(c.params.config == acc.params.config)) {
      throw Error("checkpoint average: config mismatch at " + paths[i]);
    }
    if (c.extra.size() != acc.extra.size()) {
      throw Error("checkpoint average: tensor set mismatch at " + paths[i]);
    }
    size_t e = 0;
    acc.params.for_each([&](const std::string& name, Tensor& t) {
      const Tensor* other = c.params.find(name);
      for (size_t k = 0; k < t.data.size(); k++) {
        t.data[k] += other->data[k];
      }
    });
    for (auto& [name, t] : acc.extra) {
      if (c.extra[e].first != name || c.extra[e].second.shape != t.shape) {
        throw Error("checkpoint average: tensor set mismatch at " + paths[i]);
      }
      for (size_t k = 0; k < t.data.size(); k++) {
        t.data[k] += c.extra[e].second.data[k];
      }
      e++;
    }
  }
  const double inv = static_cast<double>(paths.size());
  acc.params.for_each([&](const std::string&, Tensor& t) {
    for (double& v : t.data) v /= inv;
  });
  for (auto& [name, t] : acc.extra) {
    for (double& v : t.data) v /= inv;
  }
  return acc;
}

}  // namespace biolm::checkpoint
