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

#include <gtest/gtest.h>

#include "gmdf/config.hpp"

namespace gmdf {
namespace {

const std::filesystem::path kConfigs = std::filesystem::path(GMDF_SOURCE_DIR) / "configs";

TEST(Config, ShippedFilesParse) {
  const auto exp = parse_experiment(read_json_file(kConfigs / "gmdf.json"));
  EXPECT_EQ(exp.method, Method::kGmdf);
  EXPECT_EQ(exp.protocol.heldout, "delta");
  EXPECT_EQ(exp.protocol.domains.size(), 4u);
  const auto data = parse_data_spec(read_json_file(kConfigs / "data_4domain.json"));
  EXPECT_EQ(data.domains.size(), 4u);
  EXPECT_EQ(parse_data_spec(to_json(data)).domains[3].domain_name, data.domains[3].domain_name);
}

TEST(Config, RoundTripKeepsDigest) {
  const auto exp = parse_experiment(read_json_file(kConfigs / "gmdf.json"));
  EXPECT_EQ(config_digest(exp), config_digest(parse_experiment(to_json(exp))));
  auto other = exp;
  other.meta.beta *= 2;
  EXPECT_NE(config_digest(exp), config_digest(other));
}

TEST(Config, DigestIgnoresKeyOrder) {
  const Json a = Json::parse(R"({"x": 1, "y": {"b": [1, 2], "a": "s"}})");
  const Json b = Json::parse(R"({"y": {"a": "s", "b": [1, 2]}, "x": 1})");
  EXPECT_EQ(config_digest(a), config_digest(b));
  EXPECT_NE(config_digest(a), config_digest(Json::parse(R"({"x": 1, "y": {"b": [2, 1], "a": "s"}})")));
  EXPECT_EQ(config_digest(a).size(), 64u);
}

TEST(Config, UnknownKeysAreErrors) {
  Json j = read_json_file(kConfigs / "gmdf.json");
  j["meta"]["betta"] = 0.1;
  try {
    parse_experiment(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("betta"), std::string::npos);
  }
  Json top = read_json_file(kConfigs / "gmdf.json");
  top["extra"] = true;
  EXPECT_THROW(parse_experiment(top), ConfigError);
}

TEST(Config, BadValuesAreErrors) {
  const Json base = read_json_file(kConfigs / "gmdf.json");
  Json j = base;
  j["method"] = "magic";
  EXPECT_THROW(parse_experiment(j), ConfigError);
  j = base;
  j["meta"]["beta"] = "fast";
  EXPECT_THROW(parse_experiment(j), ConfigError);
  Json d = read_json_file(kConfigs / "data_4domain.json");
  d["domains"][0]["forgery_method"] = "nope";
  EXPECT_THROW(parse_data_spec(d), ConfigError);
  d = read_json_file(kConfigs / "data_4domain.json");
  d["domains"][1]["domain_name"] = d["domains"][0]["domain_name"];
  EXPECT_THROW(parse_data_spec(d), ConfigError);
}

TEST(Config, MethodNames) {
  for (auto m : {Method::kGmdf, Method::kMerged, Method::kSingleDomain}) EXPECT_EQ(parse_method(to_string(m)), m);
}

}  // namespace
}  // namespace gmdf
