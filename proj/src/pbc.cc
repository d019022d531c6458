#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mbandit/envs.h"

namespace mbandit {

namespace {

std::string Trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::string Upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      cur.push_back(c);
    } else if (c == ',' && !quoted) {
      out.push_back(Trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(Trim(cur));
  return out;
}

bool IsMissingToken(const std::string& s) {
  return s.empty() || s == "?" || s == "NA" || s == "na" || s == "NaN";
}

bool ParseDouble(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

[[noreturn]] void Fail(const std::string& path, std::size_t row,
                       const std::string& column, const std::string& msg) {
  std::ostringstream os;
  os << path << ": row " << row << ", column " << column << ": " << msg;
  throw IngestError(os.str());
}

}  // namespace

PbcData ReadPbcCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError(path + ": cannot open file");

  std::string line;
  if (!std::getline(in, line)) throw IngestError(path + ": empty file");
  const std::vector<std::string> header = SplitCsvLine(line);
  auto find_col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (Upper(header[i]) == name) return i;
    }
    throw IngestError(path + ": missing required column \"" + name + "\"");
  };
  const std::size_t z_col = find_col("Z1");
  const std::size_t x_col = find_col("X");
  const std::size_t d_col = find_col("D");
  const std::size_t width = std::max({z_col, x_col, d_col}) + 1;

  struct Row {
    std::size_t arm;
    double x;
    std::size_t d;
  };
  std::vector<Row> rows;
  PbcData data;
  std::size_t row_no = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row_no;
    if (Trim(line).empty()) continue;
    ++data.rows_read;
    const std::vector<std::string> fields = SplitCsvLine(line);
    if (fields.size() < width) {
      Fail(path, row_no, header[width - 1], "too few fields");
    }
    const std::string& z = fields[z_col];
    if (IsMissingToken(z)) {
      ++data.rows_skipped;
      continue;
    }
    double zv = 0.0;
    if (!ParseDouble(z, zv) || zv < 1.0 || zv != std::floor(zv)) {
      Fail(path, row_no, "Z1", "expected a positive integer, got \"" + z + "\"");
    }
    double xv = 0.0;
    if (!ParseDouble(fields[x_col], xv)) {
      Fail(path, row_no, "X", "non-numeric value \"" + fields[x_col] + "\"");
    }
    if (xv < 0.0) Fail(path, row_no, "X", "negative value");
    double dv = 0.0;
    if (!ParseDouble(fields[d_col], dv) || (dv != 0.0 && dv != 1.0)) {
      Fail(path, row_no, "D", "expected 0 or 1, got \"" + fields[d_col] + "\"");
    }
    rows.push_back({static_cast<std::size_t>(zv) - 1, xv,
                    static_cast<std::size_t>(dv)});
    data.max_x = std::max(data.max_x, xv);
  }

  std::size_t num_arms = 0;
  for (const auto& r : rows) num_arms = std::max(num_arms, r.arm + 1);
  if (num_arms == 0) throw IngestError(path + ": no usable rows");
  data.pools.assign(num_arms, {});
  for (const auto& r : rows) {
    const double outcome = data.max_x > 0.0 ? r.x / data.max_x : 1.0;
    data.pools[r.arm].push_back({outcome, MediatorValue(r.d)});
  }
  for (std::size_t a = 0; a < num_arms; ++a) {
    if (data.pools[a].empty()) {
      throw IngestError(path + ": column Z1: no rows for arm value " +
                        std::to_string(a + 1));
    }
  }
  return data;
}

BootstrapEnv MakeBootstrapEnv(const PbcData& data,
                              const SyntheticGammaSpec& gamma_spec,
                              RngStream& rng) {
  if (!(gamma_spec.lo > 0.0 && gamma_spec.lo <= gamma_spec.hi &&
        gamma_spec.hi <= 1.0)) {
    throw std::invalid_argument("synthetic gamma range must satisfy 0 < lo <= hi <= 1");
  }
  Eigen::MatrixXd gamma(data.pools.size(), data.num_mediators);
  for (Eigen::Index a = 0; a < gamma.rows(); ++a) {
    for (Eigen::Index m = 0; m < gamma.cols(); ++m) {
      gamma(a, m) = rng.Uniform(gamma_spec.lo, gamma_spec.hi);
    }
  }
  return BootstrapEnv(data.pools, data.num_mediators, std::move(gamma));
}

BootstrapEnv IngestPbc(const std::string& csv_path,
                       const SyntheticGammaSpec& gamma_spec, RngStream& rng) {
  return MakeBootstrapEnv(ReadPbcCsv(csv_path), gamma_spec, rng);
}

}  // namespace mbandit
