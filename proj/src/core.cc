#include "mbandit/core.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mbandit {

OutcomeAlphabet::OutcomeAlphabet(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.empty()) {
    throw std::invalid_argument("outcome alphabet must be nonempty");
  }
  for (std::size_t i = 1; i < values_.size(); ++i) {
    if (!(values_[i] > values_[i - 1])) {
      throw std::invalid_argument(
          "outcome alphabet must be strictly increasing");
    }
  }
}

OutcomeAlphabet OutcomeAlphabet::Normalized(std::size_t size) {
  if (size == 0) throw std::invalid_argument("alphabet size must be >= 1");
  const double total = 0.5 * static_cast<double>(size) * (size + 1);
  std::vector<double> values(size);
  for (std::size_t i = 0; i < size; ++i) values[i] = (i + 1) / total;
  return OutcomeAlphabet(std::move(values));
}

bool OutcomeAlphabet::IsNormalized(double tol) const {
  double s = 0.0;
  for (double v : values_) s += std::abs(v);
  return std::abs(s - 1.0) <= tol;
}

std::optional<std::size_t> OutcomeAlphabet::IndexOf(double y) const {
  auto it = std::lower_bound(values_.begin(), values_.end(), y - 1e-12);
  if (it != values_.end() && std::abs(*it - y) <= 1e-12) {
    return static_cast<std::size_t>(it - values_.begin());
  }
  return std::nullopt;
}

ObservedRound MakeRound(ArmId arm, double y, bool o_y, MediatorValue m,
                        bool o_m) {
  return ObservedRound(arm, o_y ? std::optional<double>(y) : std::nullopt,
                       o_m ? std::optional<MediatorValue>(m) : std::nullopt);
}

std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::seed_seq MakeSeedSeq(std::uint64_t seed, std::uint64_t stream_id) {
  const std::uint64_t a = Mix64(seed);
  const std::uint64_t b = Mix64(a ^ Mix64(stream_id + 0x632be59bd9b4e019ULL));
  return std::seed_seq{static_cast<std::uint32_t>(a),
                       static_cast<std::uint32_t>(a >> 32),
                       static_cast<std::uint32_t>(b),
                       static_cast<std::uint32_t>(b >> 32)};
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  auto seq = MakeSeedSeq(seed, stream_id);
  engine_.seed(seq);
}

RngStream RngStream::Derive(std::uint64_t child) const {
  return RngStream(Mix64(seed_ ^ Mix64(stream_id_)), child);
}

double RngStream::Uniform() {
  return std::generate_canonical<double, 53>(engine_);
}

double RngStream::Uniform(double lo, double hi) {
  return lo + (hi - lo) * Uniform();
}

double RngStream::Normal(double mean, double stddev) {
  if (stddev == 0.0) return mean;
  std::normal_distribution<double> dist(mean, stddev);
  return dist(engine_);
}

bool RngStream::Bernoulli(double p) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return Uniform() < p;
}

std::size_t RngStream::UniformIndex(std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

std::size_t RngStream::Categorical(std::span<const double> probs) {
  const double u = Uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding can leave acc slightly below 1; return the last positive cell.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

std::vector<double> RngStream::Dirichlet(
    std::span<const double> concentration) {
  std::vector<double> out(concentration.size());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::gamma_distribution<double> g(concentration[i], 1.0);
    out[i] = g(engine_);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace mbandit
