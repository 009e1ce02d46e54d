// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "paanet/layers.hpp"
#include "paanet/optimizer.hpp"
#include "paanet/rng.hpp"

namespace paanet {

class Model;

// File layout, all little-endian:
//   "PAAN" | u16 version | record... | u32 crc32 over everything before it
//   record := u32 name_len | name | u8 tag | u64 payload_len | payload
inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class RecordTag : std::uint8_t {
  kTensor = 1,    // i64 n,c,h,w then f64 data
  kF64Array = 2,  // raw f64s
  kU64 = 3,
  kF64 = 4,
  kString = 5,
  kU64Array = 6,
};

/// Builds the record stream in memory; write() appends the checksum.
class CheckpointWriter {
 public:
  void add_tensor(const std::string& name, const Shape& shape,
                  const ArrayXT<Scalar>& data);
  void add_f64_array(const std::string& name, const ArrayXT<Scalar>& data);
  void add_u64(const std::string& name, std::uint64_t v);
  void add_f64(const std::string& name, double v);
  void add_string(const std::string& name, const std::string& v);
  void add_u64_array(const std::string& name,
                     const std::vector<std::uint64_t>& v);

  /// Full file image including magic, version, and trailing checksum.
  std::string bytes() const;
  void write(const std::string& path) const;

 private:
  void record_header(const std::string& name, RecordTag tag,
                     std::uint64_t payload_len);
  std::string buf_;
};

/// Parses and checksum-verifies a checkpoint file.  Typed getters throw
/// FormatError on a missing name or a tag mismatch.
class CheckpointReader {
 public:
  static CheckpointReader from_file(const std::string& path);
  static CheckpointReader from_bytes(std::string bytes);

  bool has(const std::string& name) const;
  std::pair<Shape, ArrayXT<Scalar>> tensor(const std::string& name) const;
  ArrayXT<Scalar> f64_array(const std::string& name) const;
  std::uint64_t u64(const std::string& name) const;
  double f64(const std::string& name) const;
  std::string str(const std::string& name) const;
  std::vector<std::uint64_t> u64_array(const std::string& name) const;

  const std::vector<std::string>& names() const { return order_; }

 private:
  struct Record {
    RecordTag tag;
    std::string payload;
  };
  const Record& get(const std::string& name, RecordTag want) const;
  void parse(const std::string& bytes);

  std::map<std::string, Record> records_;
  std::vector<std::string> order_;
};

/// Streams a module's visit() walk into checkpoint records: parameter
/// values, their learn masks, named buffers, and flags.
class StateSaver : public StateVisitor {
 public:
  explicit StateSaver(CheckpointWriter& w) : w_(w) {}
  void param(const std::string& name, Tensor& t) override;
  void buffer(const std::string& name, ArrayXT<Scalar>& a) override;
  void flag(const std::string& name, bool value,
            const std::function<void(bool)>& on_load) override;

 private:
  CheckpointWriter& w_;
};

/// Restores a visit() walk from parsed records.  Parameter shapes and
/// learn masks must match the model exactly — a mask mismatch means the
/// file belongs to a structurally different model.
class StateLoader : public StateVisitor {
 public:
  explicit StateLoader(const CheckpointReader& r) : r_(r) {}
  void param(const std::string& name, Tensor& t) override;
  void buffer(const std::string& name, ArrayXT<Scalar>& a) override;
  void flag(const std::string& name, bool value,
            const std::function<void(bool)>& on_load) override;

 private:
  const CheckpointReader& r_;
};

struct CheckpointMeta {
  std::uint64_t epoch = 0;
  std::string config_echo;
};

/// Saves model parameters, buffers, flags, optimizer velocities for
/// `opt_params`, the epoch counter, and the RNG state.  `opt` and `rng`
/// may be null for inference-only snapshots.
void save_checkpoint(const std::string& path, Model& model, const Sgd* opt,
                     const std::vector<std::pair<std::string, Tensor>>& opt_params,
                     const CheckpointMeta& meta, const Rng* rng);

/// Inverse of save_checkpoint into an already-constructed model of the
/// same architecture.  Returns the stored meta fields.
CheckpointMeta load_checkpoint(const std::string& path, Model& model, Sgd* opt,
                               const std::vector<std::pair<std::string, Tensor>>& opt_params,
                               Rng* rng);

/// Serialized bytes of one module subtree (e.g. just the backbone), for
/// byte-level comparisons.
template <typename M>
std::string module_bytes(M& module, const std::string& prefix) {
  CheckpointWriter w;
  StateSaver sv(w);
  module.visit(prefix, sv);
  return w.bytes();
}

}  // namespace paanet
