// Copyright 2026 The popnet Authors.
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


#include "popnet/config.hpp"

#include <cctype>
#include <charconv>
#include <functional>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

#include "popnet/common.hpp"

namespace popnet {

namespace {

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : text_(text) {}

  Json document() {
    Json root = Json::object();
    Json* table = &root;
    skip_blank_lines();
    while (!at_end()) {
      if (peek() == '[') {
        ++pos_;
        if (!at_end() && peek() == '[') fail("arrays of tables are not supported");
        skip_spaces();
        const auto path = key_path();
        skip_spaces();
        expect(']');
        table = &open_table(root, path, true);
      } else {
        const auto path = key_path();
        skip_spaces();
        expect('=');
        skip_spaces();
        assign(*table, path, value());
      }
      end_of_line();
      skip_blank_lines();
    }
    return root;
  }

  Json single_value() {
    skip_spaces();
    Json v = value();
    skip_spaces();
    if (!at_end()) fail("trailing characters after value");
    return v;
  }

  std::vector<std::string> single_key_path() {
    skip_spaces();
    auto path = key_path();
    skip_spaces();
    if (!at_end()) fail("trailing characters after key");
    return path;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) line += text_[i] == '\n';
    throw ConfigError("config line " + std::to_string(line) + ": " + msg);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  void expect(char c) {
    if (at_end() || peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_spaces() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (!at_end() && peek() == '#')
      while (!at_end() && peek() != '\n') ++pos_;
  }

  // Whitespace, comments and newlines, as allowed inside arrays and between lines.
  void skip_blank_lines() {
    for (;;) {
      skip_spaces();
      skip_comment();
      if (at_end()) return;
      if (peek() == '\n') {
        ++pos_;
      } else if (peek() == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') {
        pos_ += 2;
      } else {
        return;
      }
    }
  }

  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (at_end()) return;
    if (peek() == '\r') ++pos_;
    if (at_end() || peek() != '\n') fail("expected end of line");
    ++pos_;
  }

  static bool bare_key_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  }

  std::string key() {
    if (at_end()) fail("expected a key");
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    const std::size_t start = pos_;
    while (!at_end() && bare_key_char(peek())) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> path{key()};
    for (;;) {
      skip_spaces();
      if (at_end() || peek() != '.') return path;
      ++pos_;
      skip_spaces();
      path.push_back(key());
    }
  }

  Json& open_table(Json& root, const std::vector<std::string>& path, bool header) {
    Json* t = &root;
    for (const auto& k : path) {
      if (!t->contains(k)) (*t)[k] = Json::object();
      t = &(*t)[k];
      if (!t->is_object()) fail("key '" + k + "' is not a table");
    }
    if (header) {
      if (defined_tables_.count(t)) fail("table defined twice");
      defined_tables_.insert(t);
    }
    return *t;
  }

  void assign(Json& table, const std::vector<std::string>& path, Json v) {
    Json& parent = open_table(table, {path.begin(), path.end() - 1}, false);
    if (parent.contains(path.back())) fail("duplicate key '" + path.back() + "'");
    parent[path.back()] = std::move(v);
  }

  static void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }

  std::string basic_string() {
    expect('"');
    std::string out;
    for (;;) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (at_end()) fail("unterminated escape");
      const char e = text_[pos_++];
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case 'u':
        case 'U': {
          const std::size_t len = e == 'u' ? 4 : 8;
          if (pos_ + len > text_.size()) fail("truncated unicode escape");
          std::uint32_t cp = 0;
          const auto* first = text_.data() + pos_;
          auto [ptr, ec] = std::from_chars(first, first + len, cp, 16);
          if (ec != std::errc() || ptr != first + len) fail("bad unicode escape");
          append_utf8(out, cp);
          pos_ += len;
          break;
        }
        default: fail(std::string("unknown escape '\\") + e + "'");
      }
    }
  }

  std::string literal_string() {
    expect('\'');
    const std::size_t start = pos_;
    while (!at_end() && peek() != '\'' && peek() != '\n') ++pos_;
    if (at_end() || peek() != '\'') fail("unterminated string");
    std::string out(text_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  Json array() {
    expect('[');
    Json out = Json::array();
    skip_blank_lines();
    while (!at_end() && peek() != ']') {
      out.push_back(value());
      skip_blank_lines();
      if (!at_end() && peek() == ',') {
        ++pos_;
        skip_blank_lines();
      } else {
        break;
      }
    }
    expect(']');
    return out;
  }

  Json inline_table() {
    expect('{');
    Json out = Json::object();
    skip_spaces();
    if (!at_end() && peek() == '}') {
      ++pos_;
      return out;
    }
    for (;;) {
      const auto path = key_path();
      skip_spaces();
      expect('=');
      skip_spaces();
      assign(out, path, value());
      skip_spaces();
      if (!at_end() && peek() == ',') {
        ++pos_;
        skip_spaces();
        continue;
      }
      expect('}');
      return out;
    }
  }

  Json scalar() {
    const std::size_t start = pos_;
    while (!at_end() && (bare_key_char(peek()) || peek() == '.' || peek() == '+')) ++pos_;
    std::string tok(text_.substr(start, pos_ - start));
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (std::size_t i = 0; i < tok.size(); ++i) {
      if (tok[i] != '_') {
        digits += tok[i];
      } else if (i == 0 || i + 1 == tok.size() || !std::isdigit(static_cast<unsigned char>(tok[i - 1])) ||
                 !std::isdigit(static_cast<unsigned char>(tok[i + 1]))) {
        fail("misplaced '_' in number '" + tok + "'");
      }
    }
    std::string_view body = digits;
    double sign = 1.0;
    if (!body.empty() && (body[0] == '+' || body[0] == '-')) {
      sign = body[0] == '-' ? -1.0 : 1.0;
      body.remove_prefix(1);
    }
    if (body == "inf") return sign * std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = body.find_first_of(".eE") != std::string_view::npos;
    if (body.empty() || !std::isdigit(static_cast<unsigned char>(body[0]))) fail("invalid value '" + tok + "'");
    if (body.size() > 1 && body[0] == '0' && std::isdigit(static_cast<unsigned char>(body[1])))
      fail("leading zeros in number '" + tok + "'");
    if (is_float) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
      if (ec != std::errc() || ptr != body.data() + body.size()) fail("invalid number '" + tok + "'");
      return sign * v;
    }
    std::int64_t v = 0;
    const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
    auto [ptr, ec] = std::from_chars(first, digits.data() + digits.size(), v);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) fail("invalid integer '" + tok + "'");
    return v;
  }

  Json value() {
    if (at_end()) fail("expected a value");
    switch (peek()) {
      case '"': return basic_string();
      case '\'': return literal_string();
      case '[': return array();
      case '{': return inline_table();
      default: return scalar();
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::set<const Json*> defined_tables_;
};

// Tables whose keys are data rather than schema.
bool open_map(const std::string& path) {
  return path == "synth.education" || path == "synth.outcome_coefficients";
}

std::string type_label(const Json& v) {
  if (v.is_boolean()) return "a boolean";
  if (v.is_number_integer()) return "an integer";
  if (v.is_number()) return "a number";
  if (v.is_string()) return "a string";
  if (v.is_array()) return "an array";
  if (v.is_object()) return "a table";
  return "null";
}

// Coerces `user` to the shape of `def`; returns the merged value.
Json conform(const Json& def, const Json& user, const std::string& path) {
  const auto mismatch = [&] {
    return ConfigError("config key '" + path + "' must be " + type_label(def) + ", got " + type_label(user));
  };
  if (def.is_object()) {
    if (!user.is_object()) throw mismatch();
    if (open_map(path)) {
      for (const auto& [k, v] : user.items())
        if (!v.is_number()) throw ConfigError("config key '" + path + "." + k + "' must be a number");
      Json out = Json::object();
      for (const auto& [k, v] : user.items()) out[k] = v.get<double>();
      return out;
    }
    Json out = def;
    for (const auto& [k, v] : user.items()) {
      const std::string sub = path.empty() ? k : path + "." + k;
      if (!def.contains(k)) throw ConfigError("unknown config key '" + sub + "'");
      out[k] = conform(def[k], v, sub);
    }
    return out;
  }
  if (def.is_array()) {
    if (!user.is_array()) throw mismatch();
    if (def.empty()) return user;
    Json out = Json::array();
    for (std::size_t i = 0; i < user.size(); ++i)
      out.push_back(conform(def[0], user[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }
  if (def.is_boolean() || def.is_string()) {
    if (def.type() != user.type()) throw mismatch();
    return user;
  }
  if (def.is_number_integer()) {
    if (!user.is_number_integer()) throw mismatch();
    return user;
  }
  if (def.is_number()) {
    if (!user.is_number()) throw mismatch();
    return user.get<double>();
  }
  return user;
}

}  // namespace

Json parse_toml(std::string_view text) { return TomlParser(text).document(); }

Json parse_toml_value(std::string_view text) { return TomlParser(text).single_value(); }

Json default_config() {
  static const char* kDefaults = R"(
seed = 1
threads = 1

[paths]
out = "popnet-run"
edges = ""
attributes = ""
ground_truth = ""

[synth]
n_persons = 10000
n_municipalities = 16
grid_side = 4
municipality_zipf = 0.8
household_size_mean = 2.5
school_group_size = 25
workplace_size = 20
neighbor_k = 10
commute_probability = 0.3
family_link_probability = 0.6
outcome_intercept = -0.5
not_voted_fraction = 0.1
missing_fraction = 0.05

[synth.education]
vocational = 0.4
bachelor = 0.35
university = 0.25

[synth.homophily]
neighbors = 0.0
colleagues = 0.8
family = 0.8
household = 0.8
classmates = 0.9

[synth.outcome_coefficients]
"education=vocational" = 1.5
"education=university" = -1.5

[walk]
walks_per_node = 10
walk_length = 10

[deepwalk]
dim = 32
window = 5
epochs = 20
lr_initial = 0.025
lr_min = 0.0001
negatives = 5
unigram_exponent = 0.75
export_tsv = false

[line]
order = "both"
dim_per_order = 16
lr = 0.025
epochs = 5
negatives = 5
unigram_exponent = 0.75
batch_size = 100000
export_tsv = false

[dine]
input = "deepwalk"
optimizer = "sgd"
lr = 0.1
batch_size = 10000
epochs = 50
noise_sigma = 0.2
export_tsv = false

[predict]
embedding = "dine"
algorithms = ["logreg"]
feature_sets = ["embeddings", "covariates", "embeddings+covariates"]
outer_folds = 5
inner_folds = 5
budget = 100
l2_min = 0.001
l2_max = 100.0
k_min = 2
k_max = 100

[shapley]
embedding = "dine"
feature_set = "embeddings"
algorithm = "logreg"
target_class = "populist"
tune = true
l2_inverse = 1.0
k = 5
n_permutations = 200
max_rows = 1000

[utility]
embedding = "dine"
dimension = -1
group_attribute = "municipality"
correlate = ["age", "income_percentile"]
aggregate = ["education", "gender", "parents_born_abroad", "municipality"]

[report]
percentile = 99.0
)";
  static const Json parsed = parse_toml(kDefaults);
  return parsed;
}

Json resolve_config(const Json& user) { return conform(default_config(), user, ""); }

void apply_override(Json& config, std::string_view assignment) {
  std::size_t eq = std::string_view::npos;
  char quote = 0;
  for (std::size_t i = 0; i < assignment.size() && eq == std::string_view::npos; ++i) {
    const char c = assignment[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '=') {
      eq = i;
    }
  }
  if (eq == std::string_view::npos)
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  std::vector<std::string> path;
  try {
    path = TomlParser(assignment.substr(0, eq)).single_key_path();
  } catch (const ConfigError&) {
    throw ConfigError("override '" + std::string(assignment) + "' has an invalid key");
  }
  const std::string_view raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = parse_toml_value(raw);
  } catch (const ConfigError&) {
    value = std::string(raw);
  }
  Json patch = value;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    Json wrapped = Json::object();
    wrapped[*it] = std::move(patch);
    patch = std::move(wrapped);
  }
  // Open maps take single-entry overrides as additions, not replacements.
  std::string joined;
  Json* cursor = &config;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    joined += (i ? "." : "") + path[i];
    if (!cursor->is_object() || !cursor->contains(path[i])) break;
    cursor = &(*cursor)[path[i]];
    if (open_map(joined) && i + 2 == path.size()) {
      if (!value.is_number()) throw ConfigError("config key '" + joined + "." + path.back() + "' must be a number");
      (*cursor)[path.back()] = value.get<double>();
      return;
    }
  }
  std::function<void(Json&, const Json&)> merge = [&](Json& dst, const Json& src) {
    for (const auto& [k, v] : src.items()) {
      if (v.is_object() && dst.contains(k) && dst[k].is_object()) {
        merge(dst[k], v);
      } else {
        dst[k] = v;
      }
    }
  };
  Json user = config;
  merge(user, patch);
  config = resolve_config(user);
}

Json load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return resolve_config(parse_toml(ss.str()));
}

std::uint64_t config_hash(const Json& config) { return fnv1a(config.dump()); }

}  // namespace popnet
