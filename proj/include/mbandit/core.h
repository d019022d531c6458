#ifndef MBANDIT_CORE_H_
#define MBANDIT_CORE_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace mbandit {

// Zero-based index of an arm.
struct ArmId {
  std::size_t index = 0;

  constexpr ArmId() = default;
  constexpr explicit ArmId(std::size_t i) : index(i) {}
  friend constexpr auto operator<=>(const ArmId&, const ArmId&) = default;
};

// Zero-based mediator value in [0, K). A degenerate mediator has K = 1.
struct MediatorValue {
  std::size_t index = 0;

  constexpr MediatorValue() = default;
  constexpr explicit MediatorValue(std::size_t i) : index(i) {}
  friend constexpr auto operator<=>(const MediatorValue&,
                                    const MediatorValue&) = default;
};

// Finite, strictly increasing outcome support used by the categorical
// environments and the odds-ratio estimators.
class OutcomeAlphabet {
 public:
  OutcomeAlphabet() = default;
  // Throws std::invalid_argument unless `values` is nonempty and strictly
  // increasing.
  explicit OutcomeAlphabet(std::vector<double> values);

  // Evenly spaced positive support (1, 2, ..., L) scaled so that sum |y| = 1.
  static OutcomeAlphabet Normalized(std::size_t size);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  bool IsNormalized(double tol = 1e-12) const;

  // Index of `y` in the support; nullopt if `y` is not (within 1e-12) a
  // member.
  std::optional<std::size_t> IndexOf(double y) const;

 private:
  std::vector<double> values_;
};

// What a policy sees after a pull. The observation indicators are derived from
// the presence of the values, so a "missing but observed" round cannot be
// represented.
class ObservedRound {
 public:
  ObservedRound(ArmId arm, std::optional<double> y_obs,
                std::optional<MediatorValue> m_obs)
      : arm_(arm), y_obs_(y_obs), m_obs_(m_obs) {}

  ArmId arm() const { return arm_; }
  const std::optional<double>& y_obs() const { return y_obs_; }
  const std::optional<MediatorValue>& m_obs() const { return m_obs_; }
  bool o_y() const { return y_obs_.has_value(); }
  bool o_m() const { return m_obs_.has_value(); }

  friend bool operator==(const ObservedRound&, const ObservedRound&) = default;

 private:
  ArmId arm_;
  std::optional<double> y_obs_;
  std::optional<MediatorValue> m_obs_;
};

// Applies the masking rule: a value is kept iff its indicator is set.
ObservedRound MakeRound(ArmId arm, double y, bool o_y, MediatorValue m,
                        bool o_m);

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t Mix64(std::uint64_t x);

// Deterministic random stream identified by (seed, stream_id). Equal pairs
// reproduce identical draws; different stream ids are decorrelated through
// splitmix64 mixing before seeding the engine.
class RngStream {
 public:
  using Engine = std::mt19937_64;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Child stream for a sub-task; depends only on (seed, stream_id, child).
  RngStream Derive(std::uint64_t child) const;

  double Uniform();                        // [0, 1)
  double Uniform(double lo, double hi);    // [lo, hi)
  double Normal(double mean, double stddev);
  bool Bernoulli(double p);
  std::size_t UniformIndex(std::size_t n);  // [0, n)
  std::size_t Categorical(std::span<const double> probs);
  std::vector<double> Dirichlet(std::span<const double> concentration);

  Engine& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  Engine engine_;
};

}  // namespace mbandit

#endif  // MBANDIT_CORE_H_
