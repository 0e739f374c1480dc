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

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cki/tensor.hpp"

namespace cki {

enum class StorageType : unsigned char { f32 = 0, f64 = 1 };

// Ordered, named parameter matrices of one model. Order is part of the
// identity: two sets with the same entries in a different order are not
// compatible.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  ParameterSet() = default;
  explicit ParameterSet(std::string architecture) : architecture_(std::move(architecture)) {}

  // Throws ValidationError on empty or duplicate names and empty tensors.
  void add(std::string name, Tensor value);

  const std::string& architecture() const { return architecture_; }
  void set_architecture(std::string tag) { architecture_ = std::move(tag); }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Tensor& value(std::size_t i) { return entries_[i].value; }
  const Tensor& value(std::size_t i) const { return entries_[i].value; }

  // Throws ValidationError if `name` is absent.
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const;

  std::size_t parameter_count() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::string architecture_;
  std::vector<Entry> entries_;
};

bool operator==(const ParameterSet::Entry& a, const ParameterSet::Entry& b);

// Writes the CKI1 layout. f32 storage rounds each value.
void save(const ParameterSet& set, const std::filesystem::path& path,
          StorageType storage = StorageType::f64);
// Reads the CKI1 layout, promoting f32 payloads to f64.
ParameterSet load(const std::filesystem::path& path);

std::vector<unsigned char> encode(const ParameterSet& set, StorageType storage = StorageType::f64);
ParameterSet decode(const std::vector<unsigned char>& bytes);

struct ShapeTableEntry {
  std::string name;
  Shape shape;
};
using ShapeTable = std::vector<ShapeTableEntry>;

// Returns the shared name/shape table when every set has the same names in
// the same order with the same shapes. Throws ShapeError naming the first
// offending matrix otherwise.
ShapeTable validate_compatible(const std::vector<ParameterSet>& sets);

}  // namespace cki
