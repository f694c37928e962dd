#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace parapde {

inline constexpr int kMaxPower = 3;
inline constexpr int kMaxDerivative = 4;
inline constexpr std::size_t kNumTerms = (kMaxPower + 1) * (kMaxDerivative + 1);

/// Candidate term u^power * d^order u / dx^order. A zero derivative order
/// contributes no derivative factor, so (0,0) is the constant term and (1,0)
/// is u itself.
struct TermDescriptor {
  int power = 0;
  int derivative_order = 0;

  std::string label() const;
  /// Column index in the canonical (power, order) lexicographic ordering.
  std::size_t index() const {
    return static_cast<std::size_t>(power * (kMaxDerivative + 1) + derivative_order);
  }

  bool operator==(const TermDescriptor&) const = default;
};

/// All 20 candidate terms in column order.
std::vector<TermDescriptor> all_terms();

TermDescriptor term_at(std::size_t index);

/// Inverse of TermDescriptor::label.
std::optional<TermDescriptor> parse_term_label(const std::string& label);

/// Axis along which coefficients vary; each index on it is one regression step.
enum class ParameterAxis { Temporal, Spatial };

std::string to_string(ParameterAxis axis);
ParameterAxis parse_axis(const std::string& s);

}  // namespace parapde
