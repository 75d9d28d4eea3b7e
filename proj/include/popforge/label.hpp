#pragma once

#include <string>

#include "popforge/errors.hpp"

namespace popforge {

enum class Label { REAL, SPOOF };

inline Label flipped(Label l) { return l == Label::REAL ? Label::SPOOF : Label::REAL; }

inline const char* to_string(Label l) { return l == Label::REAL ? "real" : "spoof"; }

inline Label label_from_string(const std::string& s) {
    if (s == "real") return Label::REAL;
    if (s == "spoof") return Label::SPOOF;
    throw UnknownLabelToken("unknown label: " + s);
}

} // namespace popforge
