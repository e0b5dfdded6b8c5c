#pragma once

#include <string>

#include "artikin/eval.hpp"
#include "artikin/model.hpp"

namespace artikin {

// Versioned structured-text model document (ARTIKIN-MODEL v1): header,
// per-part kind/axis/pivot/scalars/point_range plus a URDF-style joint line
// for simulator hand-off, canonical points, and assignment logits. Numeric
// fields round-trip exactly (17 significant digits). The parser rejects
// unknown keys and non-unit axes. Schema documented in the README.
void export_model(const ArticulatedModel& model, const std::string& path);
ArticulatedModel import_model(const std::string& path);

// Structured-text evaluation report (ARTIKIN-REPORT v1); distances in cm,
// angles in degrees. The parser rejects unknown keys.
void save_eval_report(const EvalReport& report, const std::string& path);
EvalReport load_eval_report(const std::string& path);

}  // namespace artikin
