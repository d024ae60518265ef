#include "advx/core.hpp"

#include <cctype>
#include <stdexcept>

namespace advx {

void OracleOutput::validate() const {
  if (activity.empty()) throw std::invalid_argument("oracle output: empty activity");
  if (attention.empty()) throw std::invalid_argument("oracle output: empty attention map");
  for (double v : attention.pixels())
    if (!(v >= 0.0)) throw std::invalid_argument("oracle output: negative attention weight");
}

ScalarMap attention_at_resolution(const ScalarMap& attention, int width, int height) {
  ScalarMap map = attention.same_shape(width, height)
                      ? attention
                      : resize_bilinear(attention, width, height);
  double total = 0.0;
  for (double& v : map.pixels()) {
    if (v < 0.0) v = 0.0;
    total += v;
  }
  const double n = static_cast<double>(map.size());
  for (double& v : map.pixels()) v = total > 0.0 ? v / total : 1.0 / n;
  return map;
}

std::string_view to_string(Scenario s) noexcept { return s == Scenario::s1 ? "S1" : "S2"; }

Scenario parse_scenario(std::string_view text) {
  if (text == "s1" || text == "S1") return Scenario::s1;
  if (text == "s2" || text == "S2") return Scenario::s2;
  throw std::invalid_argument("unknown scenario: " + std::string(text));
}

std::string normalize_token(std::string_view token) {
  std::string out;
  bool pending_space = false;
  for (char c : token) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool equal_activity(const WordList& a1, const WordList& a2) {
  if (a1.size() != a2.size()) return false;
  for (std::size_t i = 0; i < a1.size(); ++i)
    if (normalize_token(a1[i]) != normalize_token(a2[i])) return false;
  return true;
}

}  // namespace advx
