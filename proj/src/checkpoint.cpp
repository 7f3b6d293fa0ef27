// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include "kws/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "kws/config.hpp"
#include "kws/errors.hpp"

namespace kws {
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'K', 'W', 'S', 'C', 'K', 'P', 'T', '\0'};

ojson labels_json(const LabelMap& labels) {
  ojson arr = ojson::array();
  for (const auto& l : labels.entries()) arr.push_back({{"alias", l.alias}, {"display", l.display}});
  return arr;
}

LabelMap labels_from_json(const nlohmann::json& j) {
  std::vector<LabelInfo> out;
  for (const auto& l : j) out.push_back({l.at("alias").get<std::string>(), l.at("display").get<std::string>()});
  return LabelMap(std::move(out));
}

struct RawFile {
  std::string header;
  std::vector<char> blobs;
};

RawFile read_raw(const fs::path& path, bool with_blobs) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError(path.string() + " is not a checkpoint");
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  if (!in || header_len > (std::uint64_t{1} << 30)) throw CorruptFileError(path.string() + ": bad header length");
  RawFile raw;
  raw.header.resize(header_len);
  in.read(raw.header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw CorruptFileError(path.string() + ": truncated header");
  if (with_blobs) raw.blobs.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return raw;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  check_shapes(ckpt.params, ckpt.meta.model);
  ojson tensors = ojson::array();
  std::vector<float> blob;
  blob.reserve(static_cast<std::size_t>(tensor_scalar_count(ckpt.params)));
  for_each_tensor(ckpt.params, [&](const std::string& name, const auto& t) {
    tensors.push_back({{"name", name},
                       {"shape", {t.rows(), t.cols()}},
                       {"offset", blob.size() * sizeof(float)}});
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) blob.push_back(t(r, c));
    }
  });
  const auto& m = ckpt.meta;
  ojson header = {{"format_version", kCheckpointFormatVersion},
                  {"model_config", to_json(m.model)},
                  {"feature_config", to_json(m.features)},
                  {"feature_fingerprint", m.features.fingerprint()},
                  {"labels", labels_json(m.labels)},
                  {"seeds", {{"train", m.train_seed}, {"init", m.init_seed}}},
                  {"epoch", m.epoch},
                  {"dev_accuracy", m.dev_accuracy},
                  {"dtype", "float32-le"},
                  {"tensors", tensors}};
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(kMagic.data(), kMagic.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  const RawFile raw = read_raw(path, true);
  Checkpoint ckpt;
  std::map<std::string, nlohmann::json> by_name;
  try {
    const auto header = nlohmann::json::parse(raw.header);
    if (header.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw FormatError(path.string() + ": unsupported checkpoint version");
    }
    from_json(header.at("model_config"), ckpt.meta.model);
    from_json(header.at("feature_config"), ckpt.meta.features);
    if (header.at("feature_fingerprint").get<std::string>() != ckpt.meta.features.fingerprint()) {
      throw CorruptFileError(path.string() + ": feature fingerprint does not match its feature config");
    }
    ckpt.meta.labels = labels_from_json(header.at("labels"));
    ckpt.meta.train_seed = header.at("seeds").at("train").get<std::uint64_t>();
    ckpt.meta.init_seed = header.at("seeds").at("init").get<std::uint64_t>();
    ckpt.meta.epoch = header.at("epoch").get<int>();
    ckpt.meta.dev_accuracy = header.at("dev_accuracy").get<double>();
    for (const auto& t : header.at("tensors")) by_name[t.at("name").get<std::string>()] = t;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path.string() + ": bad header: " + e.what());
  }
  ckpt.meta.model.validate();
  ckpt.params = init_parameters<float>(ckpt.meta.model, 0);
  if (by_name.size() != tensor_views(ckpt.params).size()) {
    throw CorruptFileError(path.string() + ": tensor count does not match model config");
  }
  for_each_tensor(ckpt.params, [&](const std::string& name, auto& t) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CorruptFileError(path.string() + ": missing tensor " + name);
    const auto& shape = it->second.at("shape");
    if (shape.at(0).get<Eigen::Index>() != t.rows() || shape.at(1).get<Eigen::Index>() != t.cols()) {
      throw CorruptFileError(path.string() + ": shape mismatch for " + name);
    }
    const auto offset = it->second.at("offset").get<std::size_t>();
    const std::size_t bytes = static_cast<std::size_t>(t.size()) * sizeof(float);
    if (offset + bytes > raw.blobs.size()) throw CorruptFileError(path.string() + ": truncated tensor " + name);
    const char* src = raw.blobs.data() + offset;
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        float v;
        std::memcpy(&v, src, sizeof v);
        src += sizeof v;
        t(r, c) = v;
      }
    }
  });
  return ckpt;
}

std::string read_checkpoint_header(const fs::path& path) {
  const RawFile raw = read_raw(path, false);
  try {
    return nlohmann::ordered_json::parse(raw.header).dump(2);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path.string() + ": bad header: " + e.what());
  }
}

}  // namespace kws
