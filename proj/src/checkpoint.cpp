// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include "adfa/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <vector>

#include "adfa/hash.hpp"
#include "json.hpp"

namespace adfa {

namespace {

constexpr char kMagic[4] = {'A', 'D', 'F', 'A'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw IngestionError("checkpoint '" + path + "' is truncated or corrupt");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void put_tensor(std::string& out, const std::string& name, const Mat& m) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  put_u32(out, 2);
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f32(out, static_cast<float>(m(r, c)));
}

void put_tensor(std::string& out, const std::string& name, const Vec& v) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  put_u32(out, 1);
  put_u64(out, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f32(out, static_cast<float>(v(i)));
}

const char* anchor_name(AnchorMode m) {
  return m == AnchorMode::min_max_of_input ? "min_max_of_input" : "fixed_unit";
}
const char* backward_name(BackwardMode m) {
  return m == BackwardMode::unrolled ? "unrolled" : "implicit";
}
const char* refresh_name(CenterRefresh r) {
  return r == CenterRefresh::per_epoch ? "per_epoch" : "fixed_after_init";
}
const char* filter_name(ResizeFilter f) {
  return f == ResizeFilter::bicubic ? "bicubic" : "bilinear";
}

AnchorMode anchor_from(const std::string& s) {
  if (s == "min_max_of_input") return AnchorMode::min_max_of_input;
  if (s == "fixed_unit") return AnchorMode::fixed_unit;
  throw IngestionError("checkpoint holds an unknown anchor_mode '" + s + "'");
}
BackwardMode backward_from(const std::string& s) {
  if (s == "unrolled") return BackwardMode::unrolled;
  if (s == "implicit") return BackwardMode::implicit;
  throw IngestionError("checkpoint holds an unknown backward_mode '" + s + "'");
}
CenterRefresh refresh_from(const std::string& s) {
  if (s == "fixed_after_init") return CenterRefresh::fixed_after_init;
  if (s == "per_epoch") return CenterRefresh::per_epoch;
  throw IngestionError("checkpoint holds an unknown center_refresh '" + s + "'");
}
ResizeFilter filter_from(const std::string& s) {
  if (s == "bilinear") return ResizeFilter::bilinear;
  if (s == "bicubic") return ResizeFilter::bicubic;
  throw IngestionError("checkpoint holds an unknown resize_filter '" + s + "'");
}

nlohmann::json meta_json(const Model& model, const BackboneConfig& backbone,
                         const std::string& run_config_yaml) {
  nlohmann::json j;
  j["backbone"]["source"] = backbone.source;
  j["backbone"]["weights_path"] = backbone.weights_path;
  j["backbone"]["tap_names"] = backbone.tap_names;
  j["backbone"]["tap_channels"] = backbone.tap_channels;
  j["backbone"]["tap_divisors"] = backbone.tap_divisors;
  j["backbone"]["seed"] = backbone.seed;
  j["backbone"]["stem_channels"] = backbone.stem_channels;
  j["backbone"]["resize_edge"] = backbone.preprocess.resize_edge;
  j["backbone"]["crop_size"] = backbone.preprocess.crop_size;
  j["backbone"]["channel_mean"] = backbone.preprocess.channel_mean;
  j["backbone"]["channel_std"] = backbone.preprocess.channel_std;
  j["backbone"]["resize_filter"] = filter_name(backbone.preprocess.resize_filter);
  j["backbone_fingerprint"] = model.backbone_fingerprint;
  j["bank"]["source_fingerprint"] = model.bank.source_fingerprint;
  j["bank"]["refresh_policy"] = refresh_name(model.bank.refresh_policy);
  j["descriptor"]["d_prime"] = model.params.d_prime;
  j["descriptor"]["epsilon"] = model.params.epsilon;
  j["soft_topk"]["k"] = model.topk.k;
  j["soft_topk"]["ot_epsilon"] = model.topk.ot_epsilon;
  j["soft_topk"]["max_iters"] = model.topk.max_iters;
  j["soft_topk"]["tolerance"] = model.topk.tolerance;
  j["soft_topk"]["anchor_mode"] = anchor_name(model.topk.anchor_mode);
  j["soft_topk"]["cost_power"] = model.topk.cost_power;
  j["soft_topk"]["backward_mode"] = backward_name(model.topk.backward_mode);
  j["train"]["learning_rate"] = model.train_echo.learning_rate;
  j["train"]["weight_decay"] = model.train_echo.weight_decay;
  j["train"]["epochs"] = model.train_echo.epochs;
  j["train"]["batch_size"] = model.train_echo.batch_size;
  j["train"]["seed"] = model.train_echo.seed;
  j["train"]["k"] = model.train_echo.k;
  j["train"]["epsilon"] = model.train_echo.epsilon;
  j["train"]["center_refresh"] = refresh_name(model.train_echo.refresh);
  j["train"]["hard_selection"] = model.train_echo.hard_selection;
  j["run_config_yaml"] = run_config_yaml;
  j["tensor_format"] = "float32 little-endian row-major";
  return j;
}

}  // namespace

std::string save_checkpoint(const std::string& path, const Model& model,
                            const BackboneConfig& backbone, const std::string& run_config_yaml) {
  validate_descriptor(model.params);
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);

  const std::string meta = meta_json(model, backbone, run_config_yaml).dump();
  put_u64(out, meta.size());
  out.append(meta);

  put_u32(out, 4);
  put_tensor(out, "reduce_weights", model.params.reduce_weights);
  put_tensor(out, "reduce_bias", model.params.reduce_bias);
  put_tensor(out, "attn_conv_weights", model.params.attn_conv_weights);
  put_tensor(out, "centers", model.bank.centers);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.close();
  if (!f) throw IoError("failed writing checkpoint '" + path + "'");
  return sha256_hex(out);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf, 0, path};
  if (r.bytes(4) != std::string(kMagic, 4))
    throw IngestionError("'" + path + "' is not an ADFA checkpoint (bad magic bytes)");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IngestionError("checkpoint '" + path + "' has unsupported version " +
                         std::to_string(version));

  const std::uint64_t meta_len = r.u64();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(r.bytes(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("checkpoint '" + path + "' has corrupt metadata: " + e.what());
  }

  LoadedCheckpoint loaded;
  try {
    const auto& jb = j.at("backbone");
    BackboneConfig& b = loaded.backbone;
    b.source = jb.at("source").get<std::string>();
    b.weights_path = jb.at("weights_path").get<std::string>();
    b.tap_names = jb.at("tap_names").get<std::vector<std::string>>();
    b.tap_channels = jb.at("tap_channels").get<std::vector<int>>();
    b.tap_divisors = jb.at("tap_divisors").get<std::vector<int>>();
    b.seed = jb.at("seed").get<std::uint64_t>();
    b.stem_channels = jb.at("stem_channels").get<int>();
    b.preprocess.resize_edge = jb.at("resize_edge").get<int>();
    b.preprocess.crop_size = jb.at("crop_size").get<int>();
    b.preprocess.channel_mean = jb.at("channel_mean").get<std::array<double, 3>>();
    b.preprocess.channel_std = jb.at("channel_std").get<std::array<double, 3>>();
    b.preprocess.resize_filter = filter_from(jb.at("resize_filter").get<std::string>());

    Model& m = loaded.model;
    m.backbone_fingerprint = j.at("backbone_fingerprint").get<std::string>();
    m.bank.source_fingerprint = j.at("bank").at("source_fingerprint").get<std::string>();
    m.bank.refresh_policy = refresh_from(j.at("bank").at("refresh_policy").get<std::string>());
    m.params.d_prime = j.at("descriptor").at("d_prime").get<int>();
    m.params.epsilon = j.at("descriptor").at("epsilon").get<double>();
    const auto& jt = j.at("soft_topk");
    m.topk.k = jt.at("k").get<int>();
    m.topk.ot_epsilon = jt.at("ot_epsilon").get<double>();
    m.topk.max_iters = jt.at("max_iters").get<int>();
    m.topk.tolerance = jt.at("tolerance").get<double>();
    m.topk.anchor_mode = anchor_from(jt.at("anchor_mode").get<std::string>());
    m.topk.cost_power = jt.at("cost_power").get<int>();
    m.topk.backward_mode = backward_from(jt.at("backward_mode").get<std::string>());
    const auto& jr = j.at("train");
    m.train_echo.learning_rate = jr.at("learning_rate").get<double>();
    m.train_echo.weight_decay = jr.at("weight_decay").get<double>();
    m.train_echo.epochs = jr.at("epochs").get<int>();
    m.train_echo.batch_size = jr.at("batch_size").get<int>();
    m.train_echo.seed = jr.at("seed").get<std::uint64_t>();
    m.train_echo.k = jr.at("k").get<int>();
    m.train_echo.epsilon = jr.at("epsilon").get<double>();
    m.train_echo.refresh = refresh_from(jr.at("center_refresh").get<std::string>());
    m.train_echo.hard_selection = jr.at("hard_selection").get<bool>();
    m.train_echo.topk = m.topk;
    loaded.run_config_yaml = j.at("run_config_yaml").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("checkpoint '" + path + "' metadata is missing fields: " + e.what());
  }

  const std::uint32_t tensor_count = r.u32();
  std::map<std::string, Mat> tensors;
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const std::uint32_t rank = r.u32();
    if (rank != 1 && rank != 2)
      throw IngestionError("checkpoint tensor '" + name + "' has unsupported rank");
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = rank == 2 ? r.u64() : 1;
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index rr = 0; rr < m.rows(); ++rr)
      for (Eigen::Index cc = 0; cc < m.cols(); ++cc) m(rr, cc) = static_cast<double>(r.f32());
    tensors.emplace(name, std::move(m));
  }
  auto take = [&](const char* name) -> Mat {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw IngestionError("checkpoint '" + path + "' is missing tensor '" + std::string(name) +
                           "'");
    return it->second;
  };
  loaded.model.params.reduce_weights = take("reduce_weights");
  loaded.model.params.reduce_bias = take("reduce_bias").col(0);
  loaded.model.params.attn_conv_weights = take("attn_conv_weights").col(0);
  loaded.model.bank.centers = take("centers");

  validate_descriptor(loaded.model.params);
  if (loaded.model.bank.centers.cols() != loaded.model.params.d_prime)
    throw IngestionError("checkpoint '" + path + "' center bank disagrees with the descriptor");
  loaded.model.checkpoint_sha256 = sha256_hex(buf);
  return loaded;
}

}  // namespace adfa
