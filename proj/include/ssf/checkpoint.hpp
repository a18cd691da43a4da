#pragma once

// Parameter serialization: a human-readable manifest (name, dtype, byte
// offset, shape) followed by raw little-endian 64-bit float payloads.
// Round trips are bit-exact; a 64-bit FNV-1a hash of the file bytes serves
// as the reproducibility fingerprint.

#include <bit>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "nn.hpp"
#include "rng.hpp"

namespace ssf {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as native little-endian");

inline constexpr const char* kCheckpointMagic = "ssf-checkpoint v1";

inline void save_checkpoint(const std::string& path,
                            const ParamList<double>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("checkpoint: cannot open '" + path + "' for writing");
  out << kCheckpointMagic << "\n" << "tensors " << params.size() << "\n";
  int64_t offset = 0;
  for (const auto* p : params) {
    out << p->name << " f64 " << offset << " ";
    if (p->value.ndim() == 0) {
      out << "-";
    } else {
      for (int64_t d = 0; d < p->value.ndim(); ++d)
        out << (d ? "x" : "") << p->value.dim(d);
    }
    out << "\n";
    offset += p->value.numel() * static_cast<int64_t>(sizeof(double));
  }
  out << "payload\n";
  for (const auto* p : params)
    out.write(reinterpret_cast<const char*>(p->value.values().data()),
              static_cast<std::streamsize>(p->value.values().size() *
                                           sizeof(double)));
  if (!out) throw DataError("checkpoint: write to '" + path + "' failed");
}

inline std::map<std::string, Tensor<double>> load_checkpoint(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic)
    throw DataError("checkpoint: '" + path + "' is not a checkpoint file");
  int64_t count = 0;
  if (!std::getline(in, line) || line.rfind("tensors ", 0) != 0 ||
      (count = std::strtoll(line.c_str() + 8, nullptr, 10)) < 0)
    throw DataError("checkpoint: '" + path + "' has a malformed tensor count");

  struct Entry {
    std::string name;
    Shape shape;
    int64_t offset;
  };
  std::vector<Entry> entries;
  for (int64_t i = 0; i < count; ++i) {
    if (!std::getline(in, line))
      throw DataError("checkpoint: '" + path + "' manifest ends early");
    std::istringstream ls(line);
    Entry e;
    std::string dtype, dims;
    if (!(ls >> e.name >> dtype >> e.offset >> dims) || dtype != "f64")
      throw DataError("checkpoint: malformed manifest line '" + line + "'");
    if (dims != "-") {
      size_t pos = 0;
      while (pos <= dims.size()) {
        const size_t next = dims.find('x', pos);
        const std::string tok =
            dims.substr(pos, next == std::string::npos ? next : next - pos);
        e.shape.push_back(std::strtoll(tok.c_str(), nullptr, 10));
        if (next == std::string::npos) break;
        pos = next + 1;
      }
    }
    entries.push_back(std::move(e));
  }
  if (!std::getline(in, line) || line != "payload")
    throw DataError("checkpoint: '" + path + "' is missing the payload marker");

  std::map<std::string, Tensor<double>> out;
  const std::streampos payload_start = in.tellg();
  for (const auto& e : entries) {
    const int64_t n = shape_numel(e.shape);
    std::vector<double> vals(static_cast<size_t>(n));
    in.seekg(payload_start + static_cast<std::streamoff>(e.offset));
    in.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!in)
      throw DataError("checkpoint: payload for '" + e.name +
                      "' is truncated in '" + path + "'");
    if (!out.emplace(e.name, Tensor<double>::from_data(e.shape, std::move(vals)))
             .second)
      throw DataError("checkpoint: duplicate tensor '" + e.name + "'");
  }
  return out;
}

// Strict restore: every model parameter must appear in the file with a
// matching shape, and the file may not carry extras.
inline void load_into(const ParamList<double>& params,
                      const std::map<std::string, Tensor<double>>& stored) {
  for (auto* p : params) {
    auto it = stored.find(p->name);
    if (it == stored.end())
      throw DataError("checkpoint: parameter '" + p->name +
                      "' is missing from the file");
    if (it->second.shape() != p->value.shape())
      throw DataError("checkpoint: parameter '" + p->name + "' has shape " +
                      shape_str(it->second.shape()) + ", model expects " +
                      shape_str(p->value.shape()));
    p->value.mutable_values() = it->second.values();
  }
  if (stored.size() != params.size())
    throw DataError("checkpoint: file holds " + std::to_string(stored.size()) +
                    " tensors, model has " + std::to_string(params.size()));
}

inline std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("hash: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const uint64_t h = fnv1a64(buf.str());
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

}  // namespace ssf
