/*
 * Copyright 2026 The CKI Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cki/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cki/error.hpp"

namespace cki {

namespace {

constexpr char kMagic[4] = {'C', 'K', 'I', '1'};
constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.insert(bytes_.end(), buf, buf + sizeof(T));
  }
  void put_bytes(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<unsigned char> take() { return std::move(bytes_); }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw TruncationError(std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void ParameterSet::add(std::string name, Tensor value) {
  if (name.empty()) throw ValidationError("parameter name must not be empty");
  if (name.size() > 0xFFFF) throw ValidationError("parameter name too long: " + name.substr(0, 32));
  if (contains(name)) throw ValidationError("duplicate parameter name: " + name);
  if (value.empty()) throw ValidationError("parameter '" + name + "' is empty");
  entries_.push_back({std::move(name), std::move(value)});
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.name == name; });
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw ValidationError("no parameter named '" + name + "'");
}

Tensor& ParameterSet::get(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

bool operator==(const ParameterSet::Entry& a, const ParameterSet::Entry& b) {
  return a.name == b.name && a.value == b.value;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  return a.architecture_ == b.architecture_ && a.entries_ == b.entries_;
}

std::vector<unsigned char> encode(const ParameterSet& set, StorageType storage) {
  if (set.architecture().size() > 0xFFFF) throw ValidationError("architecture tag too long");
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put<std::uint16_t>(kVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(set.architecture().size()));
  w.put_bytes(set.architecture());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(set.size()));
  for (const auto& [name, value] : set) {
    if (name.empty()) throw ValidationError("parameter name must not be empty");
    if (value.ndim() > 0xFF) throw ValidationError("too many dimensions in " + name);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(value.ndim()));
    for (std::size_t d : value.shape()) w.put<std::uint64_t>(d);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(storage));
    for (double v : value.raw()) {
      if (storage == StorageType::f32) {
        w.put<float>(static_cast<float>(v));
      } else {
        w.put<double>(v);
      }
    }
  }
  return w.take();
}

ParameterSet decode(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  const std::size_t head = std::min<std::size_t>(bytes.size(), 4);
  if (!std::equal(kMagic, kMagic + head, bytes.begin())) {
    throw FormatError("not a CKI1 checkpoint (bad magic)");
  }
  r.get_string(4, "magic");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto tag_len = r.get<std::uint16_t>("architecture length");
  ParameterSet set(r.get_string(tag_len, "architecture tag"));
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = r.get<std::uint16_t>("name length");
    std::string name = r.get_string(name_len, "tensor name");
    const auto ndim = r.get<std::uint8_t>("ndim");
    Shape shape(ndim);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>("dimension"));
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype > 1) {
      throw FormatError("unknown dtype byte " + std::to_string(dtype) + " for " + name);
    }
    const std::size_t width = dtype == 0 ? 4 : 8;
    const std::size_t count_values = shape_size(shape);
    if (count_values != 0 && r.remaining() / width < count_values) {
      throw TruncationError("checkpoint payload of '" + name + "' is truncated");
    }
    std::vector<double> data(count_values);
    for (auto& v : data) {
      v = dtype == 0 ? static_cast<double>(r.get<float>("payload")) : r.get<double>("payload");
    }
    set.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (r.remaining() != 0) {
    throw FormatError("checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return set;
}

void save(const ParameterSet& set, const std::filesystem::path& path, StorageType storage) {
  const auto bytes = encode(set, storage);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ParameterSet load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode(bytes);
}

ShapeTable validate_compatible(const std::vector<ParameterSet>& sets) {
  if (sets.size() < 2) throw ValidationError("need at least two parameter sets to compare");
  const ParameterSet& ref = sets.front();
  for (std::size_t k = 1; k < sets.size(); ++k) {
    const ParameterSet& other = sets[k];
    const std::size_t n = std::min(ref.size(), other.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (ref[i].name != other[i].name) {
        throw ShapeError("model " + std::to_string(k) + " has '" + other[i].name +
                         "' where model 0 has '" + ref[i].name + "'");
      }
      if (ref[i].value.shape() != other[i].value.shape()) {
        throw ShapeError("parameter '" + ref[i].name + "' has shape " +
                         shape_string(other[i].value.shape()) + " in model " +
                         std::to_string(k) + " but " + shape_string(ref[i].value.shape()) +
                         " in model 0");
      }
    }
    if (ref.size() != other.size()) {
      const auto& longer = ref.size() > other.size() ? ref : other;
      throw ShapeError("parameter '" + longer[n].name + "' is missing from model " +
                       std::to_string(ref.size() > other.size() ? k : 0));
    }
  }
  ShapeTable table;
  table.reserve(ref.size());
  for (const auto& e : ref) table.push_back({e.name, e.value.shape()});
  return table;
}

}  // namespace cki
