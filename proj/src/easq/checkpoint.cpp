// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "easq/config.hpp"
#include "easq/error.hpp"

namespace easq {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'E', 'A', 'S', 'Q', 'C', 'K', 'P', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

void put_doubles(std::string& out, std::span<const double> values) {
  for (double d : values) put_u64(out, std::bit_cast<std::uint64_t>(d));
}

ojson features_json(const Features& f) {
  return ojson::array({f.user_id, f.item_id, f.hour, f.duration_bucket});
}

Features features_from(const json& j) {
  return {j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>(), j.at(2).get<std::int64_t>(),
          j.at(3).get<std::int64_t>()};
}

struct Entry {
  std::string name;
  std::string kind;
  Shape shape;
  std::uint64_t offset = 0;
  std::uint64_t count = 0;
};

struct RawFile {
  json manifest;
  std::string payload;
};

RawFile read_raw(const std::filesystem::path& path, bool with_payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  char head[16];
  in.read(head, sizeof(head));
  if (in.gcount() != sizeof(head)) {
    throw CheckpointError(Status::checkpoint_truncated, path.string() + ": truncated header");
  }
  if (std::memcmp(head, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(Status::checkpoint_version, path.string() + ": not an EASQ checkpoint");
  }
  const std::uint64_t mlen = get_u64(head + 8);
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (static_cast<std::uint64_t>(in.gcount()) != mlen) {
    throw CheckpointError(Status::checkpoint_truncated, path.string() + ": truncated manifest");
  }
  RawFile raw;
  try {
    raw.manifest = json::parse(mtext);
  } catch (const json::parse_error& e) {
    throw CheckpointError(Status::checkpoint_truncated,
                          path.string() + ": unreadable manifest: " + e.what());
  }
  const auto version = raw.manifest.value("format_version", 0u);
  if (version != kCheckpointVersion) {
    throw CheckpointError(Status::checkpoint_version,
                          path.string() + ": unsupported format_version " +
                              std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  }
  if (with_payload) {
    const auto want = raw.manifest.at("payload_bytes").get<std::uint64_t>();
    raw.payload.assign(want, '\0');
    in.read(raw.payload.data(), static_cast<std::streamsize>(want));
    if (static_cast<std::uint64_t>(in.gcount()) != want) {
      throw CheckpointError(Status::checkpoint_truncated,
                            path.string() + ": payload has " + std::to_string(in.gcount()) +
                                " of " + std::to_string(want) + " bytes");
    }
  }
  return raw;
}

std::vector<Entry> entries_of(const json& manifest) {
  std::vector<Entry> out;
  for (const auto& e : manifest.at("entries")) {
    out.push_back({e.at("name").get<std::string>(), e.at("kind").get<std::string>(),
                   e.at("shape").get<Shape>(), e.at("offset").get<std::uint64_t>(),
                   e.at("count").get<std::uint64_t>()});
  }
  return out;
}

void read_into(const RawFile& raw, const Entry& e, std::span<double> dst) {
  if (e.offset + 8 * e.count > raw.payload.size()) {
    throw CheckpointError(Status::checkpoint_truncated, "entry '" + e.name + "' lies past the payload");
  }
  const char* p = raw.payload.data() + e.offset;
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::bit_cast<double>(get_u64(p + 8 * i));
}

CheckpointContents contents_of(const json& manifest) {
  CheckpointContents c;
  try {
    c.model_config = model_config_from_json(manifest.at("model_config"));
  } catch (const ConfigError& e) {
    throw CheckpointError(Status::checkpoint_version, std::string("model_config: ") + e.what());
  }
  c.config_echo = manifest.value("config", json());
  if (manifest.contains("optimizer")) {
    const auto& o = manifest["optimizer"];
    AdamState s;
    s.config.lr = o.at("lr").get<double>();
    s.config.beta1 = o.at("beta1").get<double>();
    s.config.beta2 = o.at("beta2").get<double>();
    s.config.eps = o.at("eps").get<double>();
    s.step_count = o.at("step_count").get<std::uint64_t>();
    s.param_steps = o.at("param_steps").get<std::vector<std::uint64_t>>();
    c.optimizer = std::move(s);
  }
  if (manifest.contains("trainer")) {
    const auto& t = manifest["trainer"];
    TrainerState s;
    s.step = t.at("step").get<std::uint64_t>();
    s.next_batch = t.at("next_batch").get<std::size_t>();
    for (const auto& r : t.at("replay")) {
      ReplayEntry e;
      e.features = features_from(r.at("features"));
      e.response.ts = r.at("ts").get<double>();
      e.response.user_id = e.features.user_id;
      e.response.item_id = e.features.item_id;
      e.response.exposed = e.response.clicked = true;
      e.response.answer = parse_answer(r.at("answer").get<std::string>());
      s.replay.push_back(e);
    }
    c.trainer = std::move(s);
  }
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EasqModel& model,
                     const AdamState* optimizer, const TrainerState* trainer,
                     const ojson& config_echo) {
  const auto& params = model.parameters();
  if (optimizer && optimizer->first_moment.size() != params.size()) {
    throw ContractError("save_checkpoint: optimizer state does not match the model");
  }
  std::string payload;
  ojson entries = ojson::array();
  auto add = [&](const std::string& name, const char* kind, const Shape& shape,
                 std::span<const double> values) {
    ojson e;
    e["name"] = name;
    e["kind"] = kind;
    e["shape"] = shape;
    e["offset"] = payload.size();
    e["count"] = values.size();
    entries.push_back(std::move(e));
    put_doubles(payload, values);
  };
  for (const auto& p : params) add(p.name, "param", p.tensor.shape(), p.tensor.values());
  if (optimizer) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      add(params[i].name, "adam_m", params[i].tensor.shape(), optimizer->first_moment[i]);
      add(params[i].name, "adam_v", params[i].tensor.shape(), optimizer->second_moment[i]);
    }
  }

  ojson m;
  m["format_version"] = kCheckpointVersion;
  m["model_config"] = to_json(model.config());
  m["config"] = config_echo;
  m["entries"] = std::move(entries);
  if (optimizer) {
    ojson o;
    o["lr"] = optimizer->config.lr;
    o["beta1"] = optimizer->config.beta1;
    o["beta2"] = optimizer->config.beta2;
    o["eps"] = optimizer->config.eps;
    o["step_count"] = optimizer->step_count;
    o["param_steps"] = optimizer->param_steps;
    m["optimizer"] = std::move(o);
  }
  if (trainer) {
    ojson t;
    t["step"] = trainer->step;
    t["next_batch"] = trainer->next_batch;
    ojson replay = ojson::array();
    for (const auto& r : trainer->replay) {
      ojson e;
      e["features"] = features_json(r.features);
      e["ts"] = r.response.ts;
      e["answer"] = to_string(r.response.answer);
      replay.push_back(std::move(e));
    }
    t["replay"] = std::move(replay);
    m["trainer"] = std::move(t);
  }
  m["payload_bytes"] = payload.size();

  const std::string mtext = m.dump();
  std::string head(kMagic, sizeof(kMagic));
  put_u64(head, mtext.size());

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out << head << mtext << payload;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointContents read_checkpoint_manifest(const std::filesystem::path& path) {
  return contents_of(read_raw(path, false).manifest);
}

CheckpointContents load_checkpoint_into(const std::filesystem::path& path, EasqModel& model,
                                        AdamState* optimizer, TrainerState* trainer) {
  RawFile raw = read_raw(path, true);
  CheckpointContents c = contents_of(raw.manifest);
  const auto entries = entries_of(raw.manifest);
  auto& params = model.parameters();

  std::vector<const Entry*> param_entries, m_entries, v_entries;
  for (const auto& e : entries) {
    if (e.kind == "param") param_entries.push_back(&e);
    if (e.kind == "adam_m") m_entries.push_back(&e);
    if (e.kind == "adam_v") v_entries.push_back(&e);
  }
  for (std::size_t i = 0; i < std::max(params.size(), param_entries.size()); ++i) {
    if (i >= params.size()) {
      throw CheckpointError(Status::checkpoint_shape,
                            "checkpoint entry '" + param_entries[i]->name + "' has no model parameter");
    }
    if (i >= param_entries.size()) {
      throw CheckpointError(Status::checkpoint_shape,
                            "model parameter '" + params[i].name + "' is missing from the checkpoint");
    }
    const Entry& e = *param_entries[i];
    if (e.name != params[i].name || e.shape != params[i].tensor.shape() ||
        e.count != shape_numel(e.shape)) {
      throw CheckpointError(Status::checkpoint_shape,
                            "shape mismatch at entry '" + e.name + "': checkpoint " +
                                shape_string(e.shape) + ", model '" + params[i].name + "' " +
                                shape_string(params[i].tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    read_into(raw, *param_entries[i], params[i].tensor.mutable_values());
  }

  if (optimizer && c.optimizer) {
    if (m_entries.size() != params.size() || v_entries.size() != params.size() ||
        c.optimizer->param_steps.size() != params.size()) {
      throw CheckpointError(Status::checkpoint_shape, "optimizer state does not cover every parameter");
    }
    AdamState s = *c.optimizer;
    s.first_moment.resize(params.size());
    s.second_moment.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      s.first_moment[i].assign(m_entries[i]->count, 0.0);
      s.second_moment[i].assign(v_entries[i]->count, 0.0);
      if (m_entries[i]->count != params[i].tensor.size() ||
          v_entries[i]->count != params[i].tensor.size()) {
        throw CheckpointError(Status::checkpoint_shape,
                              "shape mismatch at optimizer entry '" + m_entries[i]->name + "'");
      }
      read_into(raw, *m_entries[i], s.first_moment[i]);
      read_into(raw, *v_entries[i], s.second_moment[i]);
    }
    *optimizer = std::move(s);
    c.optimizer = *optimizer;
  }
  if (trainer && c.trainer) *trainer = *c.trainer;
  return c;
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  CheckpointContents head = read_checkpoint_manifest(path);
  EasqModel model(head.model_config);
  CheckpointContents c = load_checkpoint_into(path, model);
  return {std::move(model), std::move(c)};
}

}  // namespace easq
