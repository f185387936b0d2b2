#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsp/model.hpp"
#include "gsp/postprocess.hpp"

namespace gsp {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'G', 'S', 'P', 'C', 'K', 'P', 'T', '1'};

inline std::string config_hash(const ModelConfig& c) { return hex64(fnv1a(c.to_json().dump())); }
inline std::string vocab_hash(const VocabBundle& v) { return hex64(fnv1a(v.to_json().dump())); }

struct Checkpoint {
  std::unique_ptr<GspModel> model;
  PostprocessTables tables;
  nlohmann::json extra;  // free-form training metadata
};

// Layout: magic, u64 header length, JSON header, then every parameter's
// values as float64 in header order.
inline void save_checkpoint(const std::string& path, GspModel& model, const PostprocessTables& tables,
                            const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json params = nlohmann::json::array();
  for (const Parameter* p : model.params().all())
    params.push_back({{"name", p->name}, {"shape", {p->value.rows(), p->value.cols()}}});
  const nlohmann::json header{{"format", 1},
                              {"config", model.config().to_json()},
                              {"config_hash", config_hash(model.config())},
                              {"vocab", model.vocab().to_json()},
                              {"vocab_hash", vocab_hash(model.vocab())},
                              {"postprocess", tables.to_json()},
                              {"extra", extra},
                              {"params", params}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Parameter* p : model.params().all()) {
    const auto& d = p->value.data();
    out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw DataError(path + " is not a GSP checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1ULL << 32)) throw DataError("corrupt checkpoint header in " + path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint header in " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint header in " + path + ": " + e.what());
  }
  Checkpoint ck;
  ModelConfig cfg = ModelConfig::from_json(header.at("config"));
  VocabBundle vocab = VocabBundle::from_json(header.at("vocab"));
  if (config_hash(cfg) != header.at("config_hash").get<std::string>())
    throw DataError("checkpoint config hash mismatch in " + path);
  if (vocab_hash(vocab) != header.at("vocab_hash").get<std::string>())
    throw DataError("checkpoint vocabulary hash mismatch in " + path);
  ck.model = std::make_unique<GspModel>(cfg, std::move(vocab), 0);
  ck.tables = PostprocessTables::from_json(header.at("postprocess"));
  ck.extra = header.value("extra", nlohmann::json::object());

  auto& store = ck.model->params();
  const auto& entries = header.at("params");
  if (entries.size() != store.all().size()) throw DataError("checkpoint parameter count mismatch in " + path);
  for (const auto& e : entries) {
    const auto name = e.at("name").get<std::string>();
    if (!store.contains(name)) throw DataError("checkpoint has unknown parameter " + name);
    Parameter& p = store.get(name);
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols())
      throw DataError("shape mismatch for parameter " + name);
    auto& d = p.value.data();
    in.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint values in " + path);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in checkpoint " + path);
  return ck;
}

}  // namespace gsp
