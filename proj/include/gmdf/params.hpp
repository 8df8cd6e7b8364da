// Copyright 2026 The GM-DF Authors.
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

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gmdf/autodiff.hpp"

namespace gmdf {

/// Flat, name-ordered collection of learnable arrays.
class ParamStore {
 public:
  using Map = std::map<std::string, Matrix, std::less<>>;

  void set(std::string name, Matrix value) { arrays_[std::move(name)] = std::move(value); }
  bool contains(std::string_view name) const { return arrays_.find(name) != arrays_.end(); }
  const Matrix& get(std::string_view name) const;
  Matrix& mutable_get(std::string_view name);
  void erase(std::string_view name);

  const Map& arrays() const { return arrays_; }
  std::vector<std::string> names() const;
  std::size_t size() const { return arrays_.size(); }
  std::size_t scalar_count() const;

  /// Copy of the arrays whose name starts with `prefix`.
  ParamStore subset(std::string_view prefix) const;
  /// Inserts/overwrites every array of `other`.
  void merge(const ParamStore& other);

  /// SHA-256 over names, shapes and raw bytes, hex encoded.
  std::string digest() const;

 private:
  Map arrays_;
};

bool starts_with(std::string_view s, std::string_view prefix);

/// Hex SHA-256 of an arbitrary byte string.
std::string sha256_hex(std::string_view bytes);

/// Lazily exposes store arrays as tape variables. Arrays accepted by
/// `trainable` become gradient leaves; all others enter as constants.
class Binding {
 public:
  using Predicate = std::function<bool(std::string_view)>;

  Binding(ad::Tape& tape, const ParamStore& store, Predicate trainable);

  ad::Var operator()(std::string_view name);
  ad::Tape& tape() { return *tape_; }
  const ParamStore& store() const { return *store_; }

  /// Gradients of every bound trainable array after tape.backward(). Arrays
  /// that did not receive gradient are reported as zeros.
  ParamStore gradients() const;

 private:
  ad::Tape* tape_;
  const ParamStore* store_;
  Predicate trainable_;
  std::map<std::string, ad::Var, std::less<>> bound_;
};

Binding::Predicate all_params();
Binding::Predicate no_params();
Binding::Predicate params_with_prefix(std::string prefix);

/// Binary archive: "GMDFARC1", count, then (name, rows, cols, doubles) records,
/// little-endian.
void write_archive(const std::filesystem::path& path, const ParamStore& store);
ParamStore read_archive(const std::filesystem::path& path);

}  // namespace gmdf
