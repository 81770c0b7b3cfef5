#include "hsd/labels.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace hsd {

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::Neutral:
      return "neutral";
    case ClassLabel::Racism:
      return "racism";
    case ClassLabel::Sexism:
      return "sexism";
  }
  return "?";
}

char short_code(ClassLabel label) {
  switch (label) {
    case ClassLabel::Neutral:
      return 'N';
    case ClassLabel::Racism:
      return 'R';
    case ClassLabel::Sexism:
      return 'S';
  }
  return '?';
}

std::optional<ClassLabel> parse_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "neutral" || lower == "none" || lower == "n") return ClassLabel::Neutral;
  if (lower == "racism" || lower == "r") return ClassLabel::Racism;
  if (lower == "sexism" || lower == "s") return ClassLabel::Sexism;
  return std::nullopt;
}

}  // namespace hsd
