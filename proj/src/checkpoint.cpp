// SPDX-License-Identifier: Apache-2.0

#include "paanet/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "paanet/model.hpp"

namespace paanet {
namespace {

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
  put_u64(buf, std::bit_cast<std::uint64_t>(v));
}

void put_i64(std::string& buf, std::int64_t v) {
  put_u64(buf, static_cast<std::uint64_t>(v));
}

// Reader-side cursor with hard bounds checks; any overrun is a truncation.
struct Cursor {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw FormatError("checkpoint: truncated file");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i)
      v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos++]))
           << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++]))
           << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++]))
           << (8 * i);
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::uint64_t read_u64_at(const std::string& payload, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(payload[off + i]))
         << (8 * i);
  return v;
}

double read_f64_at(const std::string& payload, std::size_t off) {
  return std::bit_cast<double>(read_u64_at(payload, off));
}

std::uint32_t crc_of(const std::string& buf, std::size_t len) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(len)));
}

const char* tag_name(RecordTag t) {
  switch (t) {
    case RecordTag::kTensor: return "tensor";
    case RecordTag::kF64Array: return "f64_array";
    case RecordTag::kU64: return "u64";
    case RecordTag::kF64: return "f64";
    case RecordTag::kString: return "string";
    case RecordTag::kU64Array: return "u64_array";
  }
  return "?";
}

}  // namespace

void CheckpointWriter::record_header(const std::string& name, RecordTag tag,
                                     std::uint64_t payload_len) {
  if (buf_.empty()) {
    buf_ = "PAAN";
    put_u16(buf_, kCheckpointVersion);
  }
  put_u32(buf_, static_cast<std::uint32_t>(name.size()));
  buf_ += name;
  buf_.push_back(static_cast<char>(tag));
  put_u64(buf_, payload_len);
}

void CheckpointWriter::add_tensor(const std::string& name, const Shape& shape,
                                  const ArrayXT<Scalar>& data) {
  require(shape.numel() == data.size(), "checkpoint: shape/data mismatch");
  record_header(name, RecordTag::kTensor, 32 + 8 * data.size());
  put_i64(buf_, shape.n);
  put_i64(buf_, shape.c);
  put_i64(buf_, shape.h);
  put_i64(buf_, shape.w);
  for (Eigen::Index i = 0; i < data.size(); ++i) put_f64(buf_, data(i));
}

void CheckpointWriter::add_f64_array(const std::string& name,
                                     const ArrayXT<Scalar>& data) {
  record_header(name, RecordTag::kF64Array, 8 * data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) put_f64(buf_, data(i));
}

void CheckpointWriter::add_u64(const std::string& name, std::uint64_t v) {
  record_header(name, RecordTag::kU64, 8);
  put_u64(buf_, v);
}

void CheckpointWriter::add_f64(const std::string& name, double v) {
  record_header(name, RecordTag::kF64, 8);
  put_f64(buf_, v);
}

void CheckpointWriter::add_string(const std::string& name,
                                  const std::string& v) {
  record_header(name, RecordTag::kString, v.size());
  buf_ += v;
}

void CheckpointWriter::add_u64_array(const std::string& name,
                                     const std::vector<std::uint64_t>& v) {
  record_header(name, RecordTag::kU64Array, 8 * v.size());
  for (std::uint64_t x : v) put_u64(buf_, x);
}

std::string CheckpointWriter::bytes() const {
  std::string out = buf_;
  if (out.empty()) {
    out = "PAAN";
    put_u16(out, kCheckpointVersion);
  }
  put_u32(out, crc_of(out, out.size()));
  return out;
}

void CheckpointWriter::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("checkpoint: cannot open for write: " + path);
  const std::string out = bytes();
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("checkpoint: write failed: " + path);
}

CheckpointReader CheckpointReader::from_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  return from_bytes(std::move(bytes));
}

CheckpointReader CheckpointReader::from_bytes(std::string bytes) {
  CheckpointReader r;
  r.parse(bytes);
  return r;
}

void CheckpointReader::parse(const std::string& bytes) {
  if (bytes.size() < 10) throw FormatError("checkpoint: truncated file");
  if (bytes.compare(0, 4, "PAAN") != 0)
    throw FormatError("checkpoint: bad magic bytes");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i)
    stored |= static_cast<std::uint32_t>(
                  static_cast<std::uint8_t>(bytes[body + i]))
              << (8 * i);
  if (crc_of(bytes, body) != stored)
    throw FormatError("checkpoint: checksum mismatch");

  Cursor c{bytes};
  c.pos = 4;
  const std::uint16_t version = c.u16();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: version " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointVersion));
  while (c.pos < body) {
    const std::uint32_t name_len = c.u32();
    std::string name = c.take(name_len);
    const std::uint8_t tag = c.u8();
    if (tag < 1 || tag > 6)
      throw FormatError("checkpoint: unknown record tag in " + name);
    const std::uint64_t payload_len = c.u64();
    if (c.pos + payload_len > body)
      throw FormatError("checkpoint: truncated record " + name);
    Record rec{static_cast<RecordTag>(tag), c.take(payload_len)};
    if (!records_.emplace(name, std::move(rec)).second)
      throw FormatError("checkpoint: duplicate record " + name);
    order_.push_back(std::move(name));
  }
}

const CheckpointReader::Record& CheckpointReader::get(const std::string& name,
                                                      RecordTag want) const {
  auto it = records_.find(name);
  if (it == records_.end())
    throw FormatError("checkpoint: missing record " + name);
  if (it->second.tag != want)
    throw FormatError("checkpoint: record " + name + " is " +
                      tag_name(it->second.tag) + ", expected " +
                      tag_name(want));
  return it->second;
}

bool CheckpointReader::has(const std::string& name) const {
  return records_.count(name) != 0;
}

std::pair<Shape, ArrayXT<Scalar>> CheckpointReader::tensor(
    const std::string& name) const {
  const Record& r = get(name, RecordTag::kTensor);
  if (r.payload.size() < 32 || (r.payload.size() - 32) % 8 != 0)
    throw FormatError("checkpoint: malformed tensor record " + name);
  Shape s{static_cast<std::int64_t>(read_u64_at(r.payload, 0)),
          static_cast<std::int64_t>(read_u64_at(r.payload, 8)),
          static_cast<std::int64_t>(read_u64_at(r.payload, 16)),
          static_cast<std::int64_t>(read_u64_at(r.payload, 24))};
  const std::size_t count = (r.payload.size() - 32) / 8;
  if (s.numel() < 0 || static_cast<std::size_t>(s.numel()) != count)
    throw FormatError("checkpoint: tensor size mismatch in " + name);
  ArrayXT<Scalar> data(count);
  for (std::size_t i = 0; i < count; ++i)
    data(static_cast<Eigen::Index>(i)) = read_f64_at(r.payload, 32 + 8 * i);
  return {s, std::move(data)};
}

ArrayXT<Scalar> CheckpointReader::f64_array(const std::string& name) const {
  const Record& r = get(name, RecordTag::kF64Array);
  if (r.payload.size() % 8 != 0)
    throw FormatError("checkpoint: malformed array record " + name);
  ArrayXT<Scalar> data(r.payload.size() / 8);
  for (Eigen::Index i = 0; i < data.size(); ++i)
    data(i) = read_f64_at(r.payload, 8 * static_cast<std::size_t>(i));
  return data;
}

std::uint64_t CheckpointReader::u64(const std::string& name) const {
  const Record& r = get(name, RecordTag::kU64);
  if (r.payload.size() != 8)
    throw FormatError("checkpoint: malformed u64 record " + name);
  return read_u64_at(r.payload, 0);
}

double CheckpointReader::f64(const std::string& name) const {
  const Record& r = get(name, RecordTag::kF64);
  if (r.payload.size() != 8)
    throw FormatError("checkpoint: malformed f64 record " + name);
  return read_f64_at(r.payload, 0);
}

std::string CheckpointReader::str(const std::string& name) const {
  return get(name, RecordTag::kString).payload;
}

std::vector<std::uint64_t> CheckpointReader::u64_array(
    const std::string& name) const {
  const Record& r = get(name, RecordTag::kU64Array);
  if (r.payload.size() % 8 != 0)
    throw FormatError("checkpoint: malformed u64 array record " + name);
  std::vector<std::uint64_t> v(r.payload.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = read_u64_at(r.payload, 8 * i);
  return v;
}

void StateSaver::param(const std::string& name, Tensor& t) {
  w_.add_tensor(name, t.shape(), t.data());
  if (t.learn_mask())
    w_.add_tensor(name + ".learn_mask", t.shape(), *t.learn_mask());
}

void StateSaver::buffer(const std::string& name, ArrayXT<Scalar>& a) {
  w_.add_f64_array(name, a);
}

void StateSaver::flag(const std::string& name, bool value,
                      const std::function<void(bool)>&) {
  w_.add_u64(name, value ? 1 : 0);
}

void StateLoader::param(const std::string& name, Tensor& t) {
  auto [shape, data] = r_.tensor(name);
  if (!(shape == t.shape()))
    throw FormatError("checkpoint: " + name + " has shape " + shape.str() +
                      ", model expects " + t.shape().str());
  t.data() = data;
  const std::string mask_name = name + ".learn_mask";
  if (t.learn_mask()) {
    auto [mshape, mdata] = r_.tensor(mask_name);
    if (!(mshape == t.shape()) || (mdata != *t.learn_mask()).any())
      throw FormatError("checkpoint: learn mask of " + name +
                        " does not match the model's structural mask");
  } else if (r_.has(mask_name)) {
    throw FormatError("checkpoint: " + name +
                      " carries a learn mask the model does not define");
  }
}

void StateLoader::buffer(const std::string& name, ArrayXT<Scalar>& a) {
  ArrayXT<Scalar> data = r_.f64_array(name);
  if (data.size() != a.size())
    throw FormatError("checkpoint: buffer " + name + " has " +
                      std::to_string(data.size()) + " entries, model expects " +
                      std::to_string(a.size()));
  a = data;
}

void StateLoader::flag(const std::string& name, bool,
                       const std::function<void(bool)>& on_load) {
  on_load(r_.u64(name) != 0);
}

void save_checkpoint(const std::string& path, Model& model, const Sgd* opt,
                     const std::vector<std::pair<std::string, Tensor>>& opt_params,
                     const CheckpointMeta& meta, const Rng* rng) {
  CheckpointWriter w;
  StateSaver sv(w);
  model.visit(sv);
  if (opt) {
    for (const auto& [name, t] : opt_params) {
      const ArrayXT<Scalar>* v = opt->velocity(t);
      if (v) w.add_f64_array("opt." + name + ".v", *v);
    }
  }
  w.add_u64("meta.epoch", meta.epoch);
  if (rng) {
    const auto s = rng->state();
    w.add_u64_array("meta.rng", {s[0], s[1], s[2], s[3]});
  }
  w.add_string("meta.config", meta.config_echo);
  w.write(path);
}

CheckpointMeta load_checkpoint(const std::string& path, Model& model, Sgd* opt,
                               const std::vector<std::pair<std::string, Tensor>>& opt_params,
                               Rng* rng) {
  CheckpointReader r = CheckpointReader::from_file(path);
  StateLoader lv(r);
  model.visit(lv);
  if (opt) {
    for (const auto& [name, t] : opt_params) {
      const std::string rec = "opt." + name + ".v";
      if (r.has(rec)) {
        ArrayXT<Scalar> v = r.f64_array(rec);
        if (v.size() != t.numel())
          throw FormatError("checkpoint: velocity " + rec + " size mismatch");
        opt->set_velocity(t, v);
      }
    }
  }
  CheckpointMeta meta;
  meta.epoch = r.u64("meta.epoch");
  if (rng && r.has("meta.rng")) {
    const auto v = r.u64_array("meta.rng");
    if (v.size() != 4)
      throw FormatError("checkpoint: malformed RNG state");
    rng->set_state({v[0], v[1], v[2], v[3]});
  }
  meta.config_echo = r.str("meta.config");
  return meta;
}

}  // namespace paanet
