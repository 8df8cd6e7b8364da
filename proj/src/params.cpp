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

#include "gmdf/params.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace gmdf {

const Matrix& ParamStore::get(std::string_view name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return it->second;
}

Matrix& ParamStore::mutable_get(std::string_view name) {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return it->second;
}

void ParamStore::erase(std::string_view name) {
  auto it = arrays_.find(name);
  if (it != arrays_.end()) arrays_.erase(it);
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(arrays_.size());
  for (const auto& [k, v] : arrays_) out.push_back(k);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : arrays_) n += static_cast<std::size_t>(v.size());
  return n;
}

ParamStore ParamStore::subset(std::string_view prefix) const {
  ParamStore out;
  for (const auto& [k, v] : arrays_) {
    if (starts_with(k, prefix)) out.set(k, v);
  }
  return out;
}

void ParamStore::merge(const ParamStore& other) {
  for (const auto& [k, v] : other.arrays()) arrays_[k] = v;
}

namespace {

void append_u64(std::string& buf, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  buf.append(b, 8);
}

void append_doubles(std::string& buf, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits;
    const double d = m.data()[i];
    std::memcpy(&bits, &d, sizeof bits);
    append_u64(buf, bits);
  }
}

std::string serialize(const ParamStore& store) {
  std::string buf = "GMDFARC1";
  append_u64(buf, store.size());
  for (const auto& [name, m] : store.arrays()) {
    append_u64(buf, name.size());
    buf += name;
    append_u64(buf, static_cast<std::uint64_t>(m.rows()));
    append_u64(buf, static_cast<std::uint64_t>(m.cols()));
    append_doubles(buf, m);
  }
  return buf;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string ParamStore::digest() const { return sha256_hex(serialize(*this)); }

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

Binding::Binding(ad::Tape& tape, const ParamStore& store, Predicate trainable)
    : tape_(&tape), store_(&store), trainable_(std::move(trainable)) {}

ad::Var Binding::operator()(std::string_view name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Matrix& value = store_->get(name);
  ad::Var v = trainable_(name) ? tape_->leaf(value) : tape_->constant(value);
  bound_.emplace(std::string(name), v);
  return v;
}

ParamStore Binding::gradients() const {
  ParamStore out;
  for (const auto& [name, v] : bound_) {
    if (!v.needs_grad()) continue;
    const Matrix& g = v.grad();
    out.set(name, g.size() == 0 ? Matrix::Zero(v.rows(), v.cols()) : g);
  }
  return out;
}

Binding::Predicate all_params() {
  return [](std::string_view) { return true; };
}

Binding::Predicate no_params() {
  return [](std::string_view) { return false; };
}

Binding::Predicate params_with_prefix(std::string prefix) {
  return [prefix = std::move(prefix)](std::string_view n) { return starts_with(n, prefix); };
}

void write_archive(const std::filesystem::path& path, const ParamStore& store) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write archive: " + path.string());
  const std::string buf = serialize(store);
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

ParamStore read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open archive: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > buf.size()) throw std::runtime_error("truncated archive: " + path.string());
  };
  auto read_u64 = [&]() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  };
  need(8);
  if (buf.compare(0, 8, "GMDFARC1") != 0) throw std::runtime_error("bad archive magic: " + path.string());
  pos = 8;
  ParamStore store;
  const std::uint64_t count = read_u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t len = read_u64();
    need(len);
    std::string name = buf.substr(pos, len);
    pos += len;
    const auto rows = static_cast<Eigen::Index>(read_u64());
    const auto cols = static_cast<Eigen::Index>(read_u64());
    Matrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const std::uint64_t bits = read_u64();
      std::memcpy(m.data() + k, &bits, sizeof bits);
    }
    store.set(std::move(name), std::move(m));
  }
  return store;
}

}  // namespace gmdf
