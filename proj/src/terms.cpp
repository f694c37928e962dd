#include "parapde/terms.hpp"

#include "parapde/errors.hpp"

namespace parapde {

std::string TermDescriptor::label() const {
  std::string pow_part;
  if (power == 1) pow_part = "u";
  else if (power > 1) pow_part = "u^" + std::to_string(power);

  std::string der_part;
  if (derivative_order > 0) der_part = "u_" + std::string(static_cast<std::size_t>(derivative_order), 'x');

  if (pow_part.empty() && der_part.empty()) return "1";
  if (pow_part.empty()) return der_part;
  if (der_part.empty()) return pow_part;
  return pow_part + " " + der_part;
}

std::vector<TermDescriptor> all_terms() {
  std::vector<TermDescriptor> out;
  out.reserve(kNumTerms);
  for (int p = 0; p <= kMaxPower; ++p)
    for (int d = 0; d <= kMaxDerivative; ++d) out.push_back({p, d});
  return out;
}

TermDescriptor term_at(std::size_t index) {
  return {static_cast<int>(index) / (kMaxDerivative + 1),
          static_cast<int>(index) % (kMaxDerivative + 1)};
}

std::optional<TermDescriptor> parse_term_label(const std::string& label) {
  for (const auto& t : all_terms())
    if (t.label() == label) return t;
  return std::nullopt;
}

std::string to_string(ParameterAxis axis) {
  return axis == ParameterAxis::Temporal ? "temporal" : "spatial";
}

ParameterAxis parse_axis(const std::string& s) {
  if (s == "temporal") return ParameterAxis::Temporal;
  if (s == "spatial") return ParameterAxis::Spatial;
  throw ConfigError("unknown parameter axis '" + s + "' (expected temporal or spatial)");
}

}  // namespace parapde
