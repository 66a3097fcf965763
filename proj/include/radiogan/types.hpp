#ifndef RADIOGAN_TYPES_HPP_
#define RADIOGAN_TYPES_HPP_

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace radiogan {

using Index = Eigen::Index;

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// 2D image, rows = height (top to bottom), cols = width.
template <typename T>
using Image = Matrix<T>;

/// Five conditioning classes. The integer codes are part of every file format.
enum class ClassLabel : int { normal = 0, lung = 1, head_neck = 2, oesophagus = 3, lymphoma = 4 };

inline constexpr int kNumClasses = 5;

inline constexpr std::array<ClassLabel, kNumClasses> kAllClasses = {
    ClassLabel::normal, ClassLabel::lung, ClassLabel::head_neck, ClassLabel::oesophagus,
    ClassLabel::lymphoma};

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "normal", "lung", "head_neck", "oesophagus", "lymphoma"};

constexpr int class_code(ClassLabel label) { return static_cast<int>(label); }

inline std::string_view class_name(ClassLabel label) { return kClassNames.at(class_code(label)); }

inline ClassLabel class_from_code(int code) {
  if (code < 0 || code >= kNumClasses) {
    throw std::invalid_argument("unknown class code " + std::to_string(code));
  }
  return static_cast<ClassLabel>(code);
}

inline std::optional<ClassLabel> parse_class_name(std::string_view name) {
  for (int c = 0; c < kNumClasses; ++c) {
    if (kClassNames[c] == name) return static_cast<ClassLabel>(c);
  }
  return std::nullopt;
}

// "normal, lung, head_neck, oesophagus, lymphoma"
inline std::string class_name_list() {
  std::string out;
  for (auto name : kClassNames) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

// Comma-joined class ordering recorded in checkpoint metadata.
inline std::string class_ordering() {
  std::string out;
  for (auto name : kClassNames) {
    if (!out.empty()) out += ',';
    out += name;
  }
  return out;
}

}  // namespace radiogan

#endif  // RADIOGAN_TYPES_HPP_
