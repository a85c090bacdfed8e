// Copyright 2026 The mftts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Layout (all integers little-endian u32):
//   "MFTT" version count
//   count x { name_len name rank dims[rank] f32[numel] }
//   config_len config_text   (model config as `key = value` lines)

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "mftts/error.hpp"
#include "mftts/model.hpp"

namespace mftts {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'T', 'T'};
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string data, std::string path)
      : data_(std::move(data)), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) {
    if (data_.size() - pos_ < n)
      throw CheckpointError("checkpoint " + path_ + " is truncated at byte " +
                            std::to_string(pos_));
  }
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model<float>& m) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(m.params.size()));
  for (const auto& name : m.params.names()) {
    const Tensor<float>& t = m.params.get(name);
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float f : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  ConfigMap cfg;
  m.cfg.to_config(cfg);
  const std::string text = cfg.to_text();
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;

  // Write then rename so a crash never leaves a half-written checkpoint.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

Model<float> load_checkpoint(const std::filesystem::path& path,
                             const ModelConfig* expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path.string());
  if (r.bytes(4) != std::string(kMagic, 4))
    throw CheckpointError(path.string() + " is not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) +
                          " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t count = r.u32();
  std::vector<std::pair<std::string, Tensor<float>>> entries;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::string name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank > kMaxRank)
      throw CheckpointError("checkpoint entry '" + name + "' has rank " +
                            std::to_string(rank));
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32());
    std::vector<float> values(shape_numel(shape));
    for (float& v : values) v = std::bit_cast<float>(r.u32());
    entries.emplace_back(name, Tensor<float>::from(shape, std::move(values)));
  }
  ConfigMap cfg_map = ConfigMap::parse(r.bytes(r.u32()));
  if (!r.done()) throw CheckpointError("trailing bytes in checkpoint " + path.string());
  const ModelConfig cfg = ModelConfig::from_config(cfg_map);
  cfg_map.require_all_used();

  if (expected && !(*expected == cfg)) {
    ConfigMap want, got;
    expected->to_config(want);
    cfg.to_config(got);
    for (const auto& [k, v] : want.values()) {
      if (got.values().at(k) != v)
        throw CheckpointError("checkpoint config mismatch: " + k + " is " +
                              got.values().at(k) + " in the checkpoint, " + v +
                              " in the model config");
    }
  }

  // Shapes and names must be exactly those of a fresh model.
  Model<float> m = Model<float>::init(cfg, 0);
  if (m.params.size() != entries.size())
    throw CheckpointError("checkpoint has " + std::to_string(entries.size()) +
                          " entries, model expects " + std::to_string(m.params.size()));
  std::set<std::string> seen;
  for (auto& [name, t] : entries) {
    if (!seen.insert(name).second)
      throw CheckpointError("checkpoint entry '" + name + "' appears twice");
    if (!m.params.contains(name))
      throw CheckpointError("checkpoint entry '" + name + "' is not a model parameter");
    Tensor<float>& dst = m.params.get_mut(name);
    if (dst.shape() != t.shape())
      throw CheckpointError("checkpoint entry '" + name + "' has shape " +
                            shape_str(t.shape()) + ", expected " + shape_str(dst.shape()));
    std::memcpy(dst.mutable_data().data(), t.data().data(), t.size() * sizeof(float));
  }
  return m;
}

}  // namespace mftts
