#include "cxr/core/classes.hpp"

namespace cxr {

std::optional<ClassMode> parse_class_mode(std::string_view text) {
    if (text == "four_class") return ClassMode::FourClass;
    if (text == "three_class") return ClassMode::ThreeClass;
    return std::nullopt;
}

std::string to_string(ClassMode mode) {
    return mode == ClassMode::FourClass ? "four_class" : "three_class";
}

std::vector<std::string> class_names(ClassMode mode) {
    if (mode == ClassMode::FourClass)
        return {"Normal", "BacterialPneumonia", "ViralPneumonia", "COVID19"};
    return {"Normal", "Pneumonia", "COVID19"};
}

int class_index(ClassMode mode, Finding finding) {
    switch (finding) {
        case Finding::Normal: return 0;
        case Finding::BacterialPneumonia: return 1;
        case Finding::ViralPneumonia: return mode == ClassMode::FourClass ? 2 : 1;
        case Finding::Covid19: return mode == ClassMode::FourClass ? 3 : 2;
    }
    return -1;
}

}  // namespace cxr
