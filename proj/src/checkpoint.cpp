/*
 * Copyright (c) 2026 The OWAN Lab Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "owan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "owan/config_file.hpp"

namespace owan {

namespace {

constexpr char kEndMarker[8] = {'O', 'W', 'A', 'N', 'E', 'N', 'D', '!'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  const std::uint8_t* take(std::size_t n) {
    if (n > in_.size() - pos_) throw CheckpointError("checkpoint truncated");
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint32_t u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  std::string str(std::size_t limit) {
    const auto n = u64();
    if (n > limit) throw CheckpointError("checkpoint string length out of range");
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

void write_values(Writer& w, const std::vector<float>& values) {
  for (float v : values) w.f32(v);
}

std::vector<float> read_values(Reader& r, std::size_t n) {
  if (n > r.remaining() / 4) throw CheckpointError("checkpoint truncated in tensor data");
  const auto* p = r.take(4 * n);
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[4 * i + b]) << (8 * b);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.u64(ckpt.seed);
  w.u64(ckpt.step);
  w.u64(ckpt.adam_t);
  w.str(ckpt.config_text);
  w.u64(ckpt.params.size());
  for (const auto& t : ckpt.params) {
    if (t.values.size() != shape_numel(t.shape)) throw CheckpointError("tensor '" + t.name + "' size/shape mismatch");
    w.str(t.name);
    w.u64(t.shape.size());
    for (auto d : t.shape) w.u64(d);
    write_values(w, t.values);
  }
  w.u8(ckpt.has_moments ? 1 : 0);
  if (ckpt.has_moments) {
    if (ckpt.adam_m.size() != ckpt.params.size() || ckpt.adam_v.size() != ckpt.params.size()) {
      throw CheckpointError("optimizer state does not cover every parameter");
    }
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      if (ckpt.adam_m[i].values.size() != ckpt.params[i].values.size() ||
          ckpt.adam_v[i].values.size() != ckpt.params[i].values.size()) {
        throw CheckpointError("optimizer state size mismatch for '" + ckpt.params[i].name + "'");
      }
      write_values(w, ckpt.adam_m[i].values);
      write_values(w, ckpt.adam_v[i].values);
    }
  }
  w.bytes(kEndMarker, sizeof(kEndMarker));
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (bytes.size() < sizeof(kCheckpointMagic) || std::memcmp(r.take(8), kCheckpointMagic, 8) != 0) {
    throw CheckpointError("not an OWAN checkpoint (bad magic)");
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.seed = r.u64();
  c.step = r.u64();
  c.adam_t = r.u64();
  c.config_text = r.str(r.remaining());
  const auto count = r.u64();
  if (count > r.remaining()) throw CheckpointError("checkpoint tensor count out of range");
  for (std::uint64_t i = 0; i < count; ++i) {
    StoredTensor t;
    t.name = r.str(4096);
    const auto rank = r.u64();
    if (rank > 8) throw CheckpointError("tensor '" + t.name + "' has an implausible rank");
    std::size_t numel = 1;
    for (std::uint64_t k = 0; k < rank; ++k) {
      const auto d = r.u64();
      if (d == 0 || d > r.remaining()) throw CheckpointError("tensor '" + t.name + "' has an invalid dimension");
      t.shape.push_back(d);
      numel *= d;
      if (numel > r.remaining()) throw CheckpointError("checkpoint truncated in tensor data");
    }
    t.values = read_values(r, numel);
    c.params.push_back(std::move(t));
  }
  const auto flag = r.u8();
  if (flag > 1) throw CheckpointError("corrupt optimizer flag");
  c.has_moments = flag == 1;
  if (c.has_moments) {
    for (const auto& p : c.params) {
      c.adam_m.push_back({p.name, p.shape, read_values(r, p.values.size())});
      c.adam_v.push_back({p.name, p.shape, read_values(r, p.values.size())});
    }
  }
  if (std::memcmp(r.take(8), kEndMarker, 8) != 0) throw CheckpointError("corrupt checkpoint trailer");
  if (r.remaining() != 0) throw CheckpointError("trailing bytes after checkpoint");
  try {
    c.model = model_from_config_text(c.config_text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("invalid configuration in checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  // Write-then-rename so an interrupted save never leaves a torn file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot write checkpoint " + tmp.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw CheckpointError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

OWANConfig model_from_config_text(const std::string& text) {
  OWANConfig cfg;
  for (const auto& kv : parse_key_values(text, "<checkpoint config>")) apply_model_key(cfg, kv.key, kv.value);
  cfg.validate();
  return cfg;
}

template <typename T>
Checkpoint make_checkpoint(const OWANParams<T>& params, const AdamState<T>* adam, const std::string& config_text,
                           std::uint64_t seed, std::uint64_t step) {
  Checkpoint c;
  c.config_text = config_text;
  c.model = model_from_config_text(config_text);
  if (!(c.model == params.config)) throw CheckpointError("configuration text does not describe these parameters");
  c.seed = seed;
  c.step = step;
  auto to_f32 = [](const auto& src) {
    std::vector<float> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<float>(src[i]);
    return out;
  };
  for (const auto& [name, t] : params.store) c.params.push_back({name, t.shape(), to_f32(t.values())});
  if (adam) {
    c.has_moments = true;
    c.adam_t = adam->t;
    for (const auto& [name, t] : params.store) {
      auto mi = adam->m.find(name);
      auto vi = adam->v.find(name);
      // Parameters never updated have zero moments.
      std::vector<float> zeros(t.numel(), 0.0f);
      c.adam_m.push_back({name, t.shape(), mi == adam->m.end() ? zeros : to_f32(mi->second)});
      c.adam_v.push_back({name, t.shape(), vi == adam->v.end() ? zeros : to_f32(vi->second)});
    }
  }
  return c;
}

template <typename T>
OWANParams<T> params_from_checkpoint(const Checkpoint& ckpt) {
  OWANParams<T> p = build_network<T>(ckpt.model, 0);
  if (ckpt.params.size() != p.store.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.params.size()) + " tensors, model expects " +
                          std::to_string(p.store.size()));
  }
  // Validate everything first, then copy.
  for (const auto& t : ckpt.params) {
    if (!p.store.contains(t.name)) throw CheckpointError("unexpected tensor '" + t.name + "' in checkpoint");
    if (p.store.at(t.name).shape() != t.shape) {
      throw CheckpointError("tensor '" + t.name + "' has shape " + shape_string(t.shape) + ", model expects " +
                            shape_string(p.store.at(t.name).shape()));
    }
  }
  for (const auto& t : ckpt.params) {
    auto dst = p.store.at(t.name).values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(t.values[i]);
  }
  return p;
}

template <typename T>
AdamState<T> adam_from_checkpoint(const Checkpoint& ckpt) {
  AdamState<T> s;
  if (!ckpt.has_moments) return s;
  s.t = ckpt.adam_t;
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    s.m[ckpt.adam_m[i].name].assign(ckpt.adam_m[i].values.begin(), ckpt.adam_m[i].values.end());
    s.v[ckpt.adam_v[i].name].assign(ckpt.adam_v[i].values.begin(), ckpt.adam_v[i].values.end());
  }
  return s;
}

template Checkpoint make_checkpoint<float>(const OWANParams<float>&, const AdamState<float>*, const std::string&,
                                           std::uint64_t, std::uint64_t);
template Checkpoint make_checkpoint<double>(const OWANParams<double>&, const AdamState<double>*, const std::string&,
                                            std::uint64_t, std::uint64_t);
template OWANParams<float> params_from_checkpoint<float>(const Checkpoint&);
template OWANParams<double> params_from_checkpoint<double>(const Checkpoint&);
template AdamState<float> adam_from_checkpoint<float>(const Checkpoint&);
template AdamState<double> adam_from_checkpoint<double>(const Checkpoint&);

}  // namespace owan
