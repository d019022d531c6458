#include "mbandit/config.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mbandit {

namespace {

const std::set<std::string, std::less<>>& SectionKeys(std::string_view section) {
  static const std::set<std::string, std::less<>> env = {
      "kind",      "n",          "K",          "L",
      "seed",      "peaked",     "peak_concentration",
      "mnar_bias", "gamma",      "noise_std",  "epsilon",
      "lambda_min", "lambda_max", "pbc_path",  "gamma_min",
      "gamma_max"};
  static const std::set<std::string, std::less<>> run = {
      "name", "T", "replications", "alpha", "base_seed", "stride", "workers"};
  static const std::set<std::string, std::less<>> output = {"dir"};
  static const std::set<std::string, std::less<>> policy = {
      "kind", "name", "estimate_condition"};
  static const std::set<std::string, std::less<>> none;
  if (section == "env") return env;
  if (section == "run") return run;
  if (section == "output") return output;
  if (section == "policy") return policy;
  return none;
}

std::string_view TrimView(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Splits "policy[3].kind" into ("policy", 3, "kind"); index is -1 for plain
// "section.key".
struct KeyParts {
  std::string section;
  long index = -1;
  std::string field;
};

bool SplitKey(const std::string& key, KeyParts& out) {
  const auto dot = key.find('.');
  if (dot == std::string::npos) return false;
  std::string head = key.substr(0, dot);
  out.field = key.substr(dot + 1);
  out.index = -1;
  const auto bracket = head.find('[');
  if (bracket != std::string::npos) {
    if (head.back() != ']') return false;
    const std::string digits = head.substr(bracket + 1, head.size() - bracket - 2);
    if (digits.empty() ||
        !std::all_of(digits.begin(), digits.end(),
                     [](char c) { return c >= '0' && c <= '9'; })) {
      return false;
    }
    out.index = std::stol(digits);
    head = head.substr(0, bracket);
  }
  out.section = head;
  return true;
}

bool IsBareKeyChar(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
}

// Parses a quoted string starting at s[0]; returns the unquoted text and the
// number of characters consumed.
bool ParseQuoted(std::string_view s, std::string& text, std::size_t& consumed,
                 std::string& error) {
  const char quote = s.front();
  text.clear();
  for (std::size_t i = 1; i < s.size(); ++i) {
    const char c = s[i];
    if (c == quote) {
      consumed = i + 1;
      return true;
    }
    if (c == '\\' && quote == '"') {
      if (i + 1 >= s.size()) break;
      const char e = s[++i];
      switch (e) {
        case 'n': text.push_back('\n'); break;
        case 't': text.push_back('\t'); break;
        case '"': text.push_back('"'); break;
        case '\\': text.push_back('\\'); break;
        default:
          error = std::string("unsupported escape \\") + e;
          return false;
      }
      continue;
    }
    text.push_back(c);
  }
  error = "unterminated string";
  return false;
}

bool LooksLikeScalar(std::string_view s) {
  if (s == "true" || s == "false") return true;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::size_t FindComment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == '\\' && quote == '"') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return i;
    }
  }
  return std::string_view::npos;
}

class TypedReader {
 public:
  explicit TypedReader(const ConfigTable& table) : table_(table) {}

  const ConfigTable::Value* Find(const std::string& key) const {
    auto it = table_.entries().find(key);
    return it == table_.entries().end() ? nullptr : &it->second;
  }

  void String(const std::string& key, std::string& out) const {
    if (const auto* v = Find(key)) out = v->text;
  }

  void Double(const std::string& key, double& out) const {
    if (const auto* v = Find(key)) out = ParseDouble(key, *v);
  }

  void OptionalDouble(const std::string& key, std::optional<double>& out) const {
    if (const auto* v = Find(key)) out = ParseDouble(key, *v);
  }

  template <typename Int>
  void Integer(const std::string& key, Int& out, bool allow_negative) const {
    const auto* v = Find(key);
    if (!v) return;
    // Exact integers beyond 2^53 go through the integer parser.
    if constexpr (std::is_same_v<Int, std::uint64_t>) {
      std::uint64_t u = 0;
      auto [ptr, ec] =
          std::from_chars(v->text.data(), v->text.data() + v->text.size(), u);
      if (!v->quoted && ec == std::errc() && ptr == v->text.data() + v->text.size()) {
        out = u;
        return;
      }
    }
    const double d = ParseDouble(key, *v);
    if (d != std::floor(d) || std::abs(d) > 9.007199254740992e15) {
      throw ConfigError("config key \"" + key + "\": expected an integer, got \"" +
                        v->text + "\"");
    }
    if (!allow_negative && d < 0.0) {
      throw ConfigError("config key \"" + key + "\": must not be negative");
    }
    out = static_cast<Int>(d);
  }

  void Bool(const std::string& key, bool& out) const {
    const auto* v = Find(key);
    if (!v) return;
    if (!v->quoted && v->text == "true") {
      out = true;
    } else if (!v->quoted && v->text == "false") {
      out = false;
    } else {
      throw ConfigError("config key \"" + key + "\": expected true or false, got \"" +
                        v->text + "\"");
    }
  }

 private:
  static double ParseDouble(const std::string& key, const ConfigTable::Value& v) {
    double d = 0.0;
    const char* end = v.text.data() + v.text.size();
    auto [ptr, ec] = std::from_chars(v.text.data(), end, d);
    if (v.quoted || ec != std::errc() || ptr != end || !std::isfinite(d)) {
      throw ConfigError("config key \"" + key + "\": expected a number, got \"" +
                        v.text + "\"");
    }
    return d;
  }

  const ConfigTable& table_;
};

}  // namespace

void CheckKnownKey(const std::string& key) {
  KeyParts parts;
  const bool ok = SplitKey(key, parts) &&
                  ((parts.section == "policy") == (parts.index >= 0)) &&
                  SectionKeys(parts.section).count(parts.field) > 0;
  if (!ok) throw ConfigError("unknown config key \"" + key + "\"");
}

ConfigTable ConfigTable::Parse(std::string_view text, std::string_view source) {
  ConfigTable table;
  std::string prefix;
  long policy_count = 0;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": " +
                       msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto c = FindComment(line); c != std::string_view::npos) {
      line = line.substr(0, c);
    }
    line = TrimView(line);
    if (line.empty()) continue;

    if (line.starts_with("[[")) {
      if (!line.ends_with("]]")) throw fail("malformed table header");
      const std::string name(TrimView(line.substr(2, line.size() - 4)));
      if (name != "policy") throw fail("unknown array table [[" + name + "]]");
      prefix = "policy[" + std::to_string(policy_count++) + "]";
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("malformed table header");
      const std::string name(TrimView(line.substr(1, line.size() - 2)));
      if (name != "env" && name != "run" && name != "output") {
        throw fail("unknown table [" + name + "]");
      }
      prefix = name;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("expected key = value");
    const std::string_view key_part = TrimView(line.substr(0, eq));
    if (key_part.empty() ||
        !std::all_of(key_part.begin(), key_part.end(), IsBareKeyChar)) {
      throw fail("invalid key \"" + std::string(key_part) + "\"");
    }
    const std::string key =
        prefix.empty() ? std::string(key_part) : prefix + "." + std::string(key_part);
    std::string_view value_part = TrimView(line.substr(eq + 1));
    if (value_part.empty()) throw fail("missing value for \"" + key + "\"");

    Value value;
    if (value_part.front() == '"' || value_part.front() == '\'') {
      std::size_t consumed = 0;
      std::string error;
      if (!ParseQuoted(value_part, value.text, consumed, error)) throw fail(error);
      if (!TrimView(value_part.substr(consumed)).empty()) {
        throw fail("unexpected text after string value");
      }
      value.quoted = true;
    } else {
      if (!LooksLikeScalar(value_part)) {
        throw fail("invalid value \"" + std::string(value_part) + "\" for \"" +
                   key + "\" (strings must be quoted)");
      }
      value.text = std::string(value_part);
    }
    if (table.entries_.count(key)) throw fail("duplicate key \"" + key + "\"");
    try {
      CheckKnownKey(key);
    } catch (const ConfigError& e) {
      throw fail(e.what());
    }
    table.entries_[key] = std::move(value);
  }
  return table;
}

ConfigTable ConfigTable::ParseFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return Parse(buf.str(), path.string());
}

void ConfigTable::ApplyOverride(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override \"" + std::string(assignment) +
                      "\" must have the form key=value");
  }
  const std::string key(TrimView(assignment.substr(0, eq)));
  const std::string_view rhs = TrimView(assignment.substr(eq + 1));
  CheckKnownKey(key);
  Value value;
  if (!rhs.empty() && (rhs.front() == '"' || rhs.front() == '\'')) {
    std::size_t consumed = 0;
    std::string error;
    if (!ParseQuoted(rhs, value.text, consumed, error) || consumed != rhs.size()) {
      throw ConfigError("override \"" + key + "\": malformed string value");
    }
    value.quoted = true;
  } else {
    value.text = std::string(rhs);
  }
  Set(key, std::move(value));
}

void ConfigTable::Set(const std::string& key, Value value) {
  CheckKnownKey(key);
  entries_[key] = std::move(value);
}

ExperimentConfig BuildExperimentConfig(const ConfigTable& table,
                                       const std::string& default_name) {
  ExperimentConfig c;
  c.name = default_name;
  TypedReader r(table);

  r.String("run.name", c.name);
  r.Integer("run.T", c.horizon, false);
  r.Integer("run.replications", c.replications, false);
  r.Double("run.alpha", c.alpha);
  r.Integer("run.base_seed", c.base_seed, false);
  r.Integer("run.stride", c.stride, false);
  r.Integer("run.workers", c.workers, false);
  if (table.Contains("run.stride") && c.stride < 1) {
    throw ConfigError("run.stride must be >= 1");
  }
  r.String("output.dir", c.output_dir);

  std::string kind;
  r.String("env.kind", kind);
  if (!kind.empty()) {
    const auto parsed = ParseEnvKind(kind);
    if (!parsed) throw ConfigError("env.kind: unknown environment \"" + kind + "\"");
    c.env.kind = *parsed;
  }
  r.Integer("env.n", c.env.n, false);
  r.Integer("env.K", c.env.k, false);
  r.Integer("env.L", c.env.l, false);
  r.Integer("env.seed", c.env.seed, false);
  r.Bool("env.peaked", c.env.peaked);
  r.Double("env.peak_concentration", c.env.peak_concentration);
  r.Double("env.mnar_bias", c.env.mnar_bias);
  r.OptionalDouble("env.gamma", c.env.gamma);
  r.Double("env.noise_std", c.env.noise_std);
  r.Double("env.epsilon", c.env.epsilon);
  r.Double("env.lambda_min", c.env.lambda_min);
  r.Double("env.lambda_max", c.env.lambda_max);
  r.String("env.pbc_path", c.env.pbc_path);
  r.Double("env.gamma_min", c.env.gamma_min);
  r.Double("env.gamma_max", c.env.gamma_max);

  long max_index = -1;
  for (const auto& [key, value] : table.entries()) {
    KeyParts parts;
    if (SplitKey(key, parts) && parts.section == "policy") {
      max_index = std::max(max_index, parts.index);
    }
  }
  for (long i = 0; i <= max_index; ++i) {
    const std::string prefix = "policy[" + std::to_string(i) + "].";
    PolicySpec spec;
    std::string pkind;
    r.String(prefix + "kind", pkind);
    if (pkind.empty()) throw ConfigError(prefix + "kind is required");
    const auto parsed = ParsePolicyKind(pkind);
    if (!parsed) {
      throw ConfigError(prefix + "kind: unknown policy \"" + pkind + "\"");
    }
    spec.kind = *parsed;
    r.String(prefix + "name", spec.name);
    r.Bool(prefix + "estimate_condition", spec.estimate_condition);
    c.policies.push_back(std::move(spec));
  }

  c.Validate();
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path,
                                      const std::vector<std::string>& overrides) {
  ConfigTable table = ConfigTable::ParseFile(path);
  for (const auto& o : overrides) table.ApplyOverride(o);
  return BuildExperimentConfig(table, path.stem().string());
}

namespace {

std::string Quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string RenderConfig(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[run]\n"
     << "name = " << Quote(c.name) << '\n'
     << "T = " << c.horizon << '\n'
     << "replications = " << c.replications << '\n'
     << "alpha = " << FormatNumber(c.alpha) << '\n'
     << "base_seed = " << c.base_seed << '\n';
  if (c.stride > 0) os << "stride = " << c.stride << '\n';
  if (c.workers > 0) os << "workers = " << c.workers << '\n';

  const EnvSpec& e = c.env;
  os << "\n[env]\n"
     << "kind = " << Quote(std::string(EnvKindName(e.kind))) << '\n'
     << "n = " << e.n << '\n'
     << "K = " << e.k << '\n'
     << "L = " << e.l << '\n'
     << "seed = " << e.seed << '\n'
     << "peaked = " << (e.peaked ? "true" : "false") << '\n'
     << "peak_concentration = " << FormatNumber(e.peak_concentration) << '\n'
     << "mnar_bias = " << FormatNumber(e.mnar_bias) << '\n';
  if (e.gamma) os << "gamma = " << FormatNumber(*e.gamma) << '\n';
  os << "noise_std = " << FormatNumber(e.noise_std) << '\n'
     << "epsilon = " << FormatNumber(e.epsilon) << '\n'
     << "lambda_min = " << FormatNumber(e.lambda_min) << '\n'
     << "lambda_max = " << FormatNumber(e.lambda_max) << '\n';
  if (!e.pbc_path.empty()) os << "pbc_path = " << Quote(e.pbc_path) << '\n';
  os << "gamma_min = " << FormatNumber(e.gamma_min) << '\n'
     << "gamma_max = " << FormatNumber(e.gamma_max) << '\n';

  os << "\n[output]\n"
     << "dir = " << Quote(c.output_dir) << '\n';

  for (const auto& p : c.policies) {
    os << "\n[[policy]]\n"
       << "kind = " << Quote(std::string(PolicyKindName(p.kind))) << '\n';
    if (!p.name.empty()) os << "name = " << Quote(p.name) << '\n';
    if (p.estimate_condition) os << "estimate_condition = true\n";
  }
  return os.str();
}

}  // namespace mbandit
