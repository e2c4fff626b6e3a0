#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sshred/core/binio.hpp"
#include "sshred/core/crc32.hpp"
#include "sshred/shred/train.hpp"

namespace sshred {

// SHRD container, little-endian:
//   "SHRD" | u32 version | u32 json_len | json (UTF-8)
//   then per section: u16 name_len | name | u8 ndims | u64 dims[ndims] |
//                     f64 payload | u32 crc32(name .. payload)
// The JSON header carries the config, trainer counters, RNG state and the
// ordered list of section names.
inline constexpr char kCheckpointMagic[4] = {'S', 'H', 'R', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainerState {
  std::size_t epoch = 0;
  std::uint64_t steps = 0;
  Rng::State rng{};
  bool sindy_initialized = false;
  std::size_t pruning_events = 0;
  std::vector<AdamW::Slot> slots;
};

struct CheckpointData {
  ShredModel model;
  std::optional<TrainerState> state;
  nlohmann::json meta;
};

namespace detail {

struct Section {
  std::string name;
  Tensor value;
};

inline std::string section_bytes(const Section& s) {
  std::ostringstream os(std::ios::binary);
  binio::put<std::uint16_t>(os, static_cast<std::uint16_t>(s.name.size()));
  binio::put_bytes(os, s.name.data(), s.name.size());
  binio::put<std::uint8_t>(os, static_cast<std::uint8_t>(s.value.ndim()));
  for (auto d : s.value.shape()) binio::put<std::uint64_t>(os, d);
  for (double v : s.value.values()) binio::put<double>(os, v);
  return os.str();
}

inline Tensor mask_to_tensor(const MaskMat& m) {
  Tensor t = Tensor::matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) t[static_cast<std::size_t>(i)] = m.data()[i] ? 1.0 : 0.0;
  return t;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const ShredModel& model, const Trainer* trainer = nullptr,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  std::vector<detail::Section> sections;
  const auto params = model.named_params();
  for (const auto& [name, p] : params) sections.push_back({name, p.value()});
  for (std::size_t i = 0; i < model.ensemble.size(); ++i)
    sections.push_back({"mask." + std::to_string(i), detail::mask_to_tensor(model.ensemble.models[i].mask)});

  nlohmann::json header{{"config", to_json(model.config)},
                        {"sensors", model.sensors()},
                        {"points", model.points()},
                        {"thresholds", model.ensemble.thresholds},
                        {"meta", meta}};
  if (trainer) {
    const auto& slots = trainer->optimizer().slots();
    for (std::size_t k = 0; k < params.size(); ++k) {
      sections.push_back({"adam.m." + params[k].first, slots[k].m});
      sections.push_back({"adam.v." + params[k].first, slots[k].v});
    }
    const auto rs = trainer->rng_state();
    header["state"] = {{"epoch", trainer->epoch()},
                       {"steps", trainer->optimizer().steps()},
                       {"rng", {rs.s[0], rs.s[1], rs.s[2], rs.s[3]}},
                       {"sindy_initialized", trainer->sindy_initialized()},
                       {"pruning_events", trainer->pruning_events()}};
  }
  nlohmann::json names = nlohmann::json::array();
  for (const auto& s : sections) names.push_back(s.name);
  header["sections"] = names;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const std::string js = header.dump();
  binio::put_bytes(os, kCheckpointMagic, 4);
  binio::put<std::uint32_t>(os, kCheckpointVersion);
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(js.size()));
  binio::put_bytes(os, js.data(), js.size());
  for (const auto& s : sections) {
    const std::string bytes = detail::section_bytes(s);
    binio::put_bytes(os, bytes.data(), bytes.size());
    binio::put<std::uint32_t>(os, crc32(std::as_bytes(std::span(bytes.data(), bytes.size()))));
  }
  if (!os) throw Error("checkpoint write failed: " + path.string());
}

inline CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path.string());
  char magic[4] = {};
  binio::get_bytes(is, magic, 4, "checkpoint magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("not a checkpoint: expected magic \"SHRD\"");
  const auto version = binio::get<std::uint32_t>(is, "checkpoint version");
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  const auto jlen = binio::get<std::uint32_t>(is, "checkpoint header length");
  std::string js(jlen, '\0');
  binio::get_bytes(is, js.data(), jlen, "checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw ChecksumError(std::string("checkpoint header is corrupt: ") + e.what(), "header");
  }

  std::map<std::string, Tensor> sections;
  for (const auto& jn : header.at("sections")) {
    const std::string expected = jn.get<std::string>();
    try {
      const auto nlen = binio::get<std::uint16_t>(is, expected);
      std::string name(nlen, '\0');
      binio::get_bytes(is, name.data(), nlen, expected);
      const auto ndims = binio::get<std::uint8_t>(is, expected);
      if (ndims == 0 || ndims > 8) throw ChecksumError("section '" + expected + "' is corrupt (bad rank)", expected);
      Shape shape;
      std::uint64_t numel = 1;
      for (int i = 0; i < ndims; ++i) {
        shape.push_back(binio::get<std::uint64_t>(is, expected));
        if (shape.back() == 0 || shape.back() > (1ULL << 40) || numel > (1ULL << 40) / shape.back())
          throw ChecksumError("section '" + expected + "' is corrupt (bad dims)", expected);
        numel *= shape.back();
      }
      std::vector<double> vals(numel);
      for (auto& v : vals) v = binio::get<double>(is, expected);
      const auto crc = binio::get<std::uint32_t>(is, expected);
      detail::Section s{name, Tensor(shape, std::move(vals))};
      const std::string bytes = detail::section_bytes(s);
      if (name != expected || crc != crc32(std::as_bytes(std::span(bytes.data(), bytes.size()))))
        throw ChecksumError("checksum mismatch in section '" + expected + "'", expected);
      sections.emplace(name, std::move(s.value));
    } catch (const TruncatedError&) {
      throw ChecksumError("section '" + expected + "' is truncated or corrupt", expected);
    }
  }

  CheckpointData out;
  const TrainConfig cfg = train_config_from_json(header.at("config"));
  out.model = init_model(cfg, header.at("sensors").get<std::size_t>(), header.at("points").get<std::size_t>());
  out.model.ensemble.thresholds = header.at("thresholds").get<std::vector<double>>();
  auto take = [&](const std::string& name, Tensor& dst) {
    auto it = sections.find(name);
    if (it == sections.end()) throw ChecksumError("checkpoint is missing section '" + name + "'", name);
    if (it->second.shape() != dst.shape())
      throw ChecksumError("section '" + name + "' has shape " + shape_str(it->second.shape()) + ", expected " +
                              shape_str(dst.shape()), name);
    dst = it->second;
  };
  const auto params = out.model.named_params();
  for (auto [name, p] : params) take(name, p.mutable_value());
  for (std::size_t i = 0; i < out.model.ensemble.size(); ++i) {
    auto& m = out.model.ensemble.models[i];
    Tensor mt = detail::mask_to_tensor(m.mask);
    take("mask." + std::to_string(i), mt);
    for (Eigen::Index k = 0; k < m.mask.size(); ++k) m.mask.data()[k] = mt[static_cast<std::size_t>(k)] != 0.0;
  }
  if (header.contains("state")) {
    const auto& st = header.at("state");
    TrainerState ts;
    ts.epoch = st.at("epoch").get<std::size_t>();
    ts.steps = st.at("steps").get<std::uint64_t>();
    for (int i = 0; i < 4; ++i) ts.rng.s[i] = st.at("rng")[static_cast<std::size_t>(i)].get<std::uint64_t>();
    ts.sindy_initialized = st.at("sindy_initialized").get<bool>();
    ts.pruning_events = st.at("pruning_events").get<std::size_t>();
    for (const auto& [name, p] : params) {
      AdamW::Slot slot{Tensor(p.shape(), 0.0), Tensor(p.shape(), 0.0)};
      take("adam.m." + name, slot.m);
      take("adam.v." + name, slot.v);
      ts.slots.push_back(std::move(slot));
    }
    out.state = std::move(ts);
  }
  out.meta = header.value("meta", nlohmann::json::object());
  return out;
}

// Puts a trainer built over a freshly loaded model back where it stopped.
inline void resume(Trainer& t, const TrainerState& s) {
  if (s.slots.size() != t.optimizer().slots().size()) throw FormatError("resume: optimizer state size mismatch");
  t.optimizer().slots() = s.slots;
  t.restore(s.epoch, s.steps, s.rng, s.sindy_initialized, s.pruning_events);
}

}  // namespace sshred
