#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cxr {

/// Finding as read from the source datasets, before mapping into a label space.
enum class Finding { Normal, BacterialPneumonia, ViralPneumonia, Covid19 };

/// four_class keeps bacterial and viral pneumonia apart; three_class merges them.
enum class ClassMode { ThreeClass, FourClass };

std::optional<ClassMode> parse_class_mode(std::string_view text);
std::string to_string(ClassMode mode);

/// Ordered class names; the COVID-19 class is always last.
std::vector<std::string> class_names(ClassMode mode);

int class_index(ClassMode mode, Finding finding);

}  // namespace cxr
