#ifndef HSD_LABELS_HPP
#define HSD_LABELS_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace hsd {

/// Message class. The ordinal order is fixed and used for every tie-break.
enum class ClassLabel : int { Neutral = 0, Racism = 1, Sexism = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<ClassLabel, kNumClasses> kAllLabels{
    ClassLabel::Neutral, ClassLabel::Racism, ClassLabel::Sexism};

constexpr std::size_t index_of(ClassLabel label) {
  return static_cast<std::size_t>(label);
}

constexpr ClassLabel label_from_index(std::size_t i) {
  return static_cast<ClassLabel>(static_cast<int>(i));
}

std::string_view to_string(ClassLabel label);

/// Single-letter code used in compact exports (N, R, S).
char short_code(ClassLabel label);

/// Case-insensitive parse of "neutral" / "racism" / "sexism" (also "none",
/// and the single letters n/r/s). Returns nullopt on anything else.
std::optional<ClassLabel> parse_label(std::string_view text);

/// Softmax output of one classifier, ordered (Neutral, Racism, Sexism).
template <typename Scalar>
using Distribution = Eigen::Matrix<Scalar, 3, 1>;

using ClassDistribution = Distribution<double>;

}  // namespace hsd

#endif  // HSD_LABELS_HPP
