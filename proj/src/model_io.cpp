#include "artikin/model_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "artikin/errors.hpp"

namespace artikin {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt3(const Eigen::Vector3d& v) {
  return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z());
}

std::vector<double> numbers_or_throw(std::istringstream& ls, long line_no) {
  std::vector<double> values;
  double v;
  while (ls >> v) values.push_back(v);
  std::string rest;
  if (ls.clear(), ls >> rest)
    throw ParseError("non-numeric value: " + rest, line_no);
  return values;
}

// Contiguous index range of points whose argmax label is k, or "none".
std::string point_range_string(const ArticulatedModel& model, int k) {
  int lo = -1, hi = -1;
  for (int i = 0; i < model.point_count(); ++i) {
    if (model.hard_label(i) != k) continue;
    if (lo < 0) lo = i;
    hi = i;
  }
  if (lo < 0) return "none";
  return std::to_string(lo) + " " + std::to_string(hi);
}

std::string urdf_joint_line(const Joint& joint, int k) {
  std::ostringstream os;
  os << "urdf: <joint name=\"part_" << k << "\" type=\""
     << (joint.kind == JointKind::kRevolute ? "revolute" : "prismatic")
     << "\"><origin xyz=\"" << fmt3(joint.pivot) << "\"/><axis xyz=\""
     << fmt3(joint.axis.direction())
     << "\"/><parent link=\"part_0\"/><child link=\"part_" << k
     << "\"/></joint>";
  return os.str();
}

}  // namespace

void export_model(const ArticulatedModel& model, const std::string& path) {
  model.validate();
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open for writing: " + path);

  out << "ARTIKIN-MODEL v1\n";
  out << "units: m\n";
  out << "temperature: " << fmt(model.temperature) << "\n";
  out << "parts: " << model.part_count() << "\n";
  out << "points: " << model.point_count() << "\n";
  out << "frames: " << model.frame_count() << "\n";
  out << "canonical_frame: " << model.canonical_frame << "\n";
  for (int k = 0; k < model.part_count(); ++k) {
    const Joint& joint = model.parts[k];
    out << "[part " << k << "]\n";
    out << "kind: " << to_string(joint.kind) << "\n";
    if (joint.kind != JointKind::kStatic) {
      out << "axis: " << fmt3(joint.axis.direction()) << "\n";
      out << "pivot: " << fmt3(joint.pivot) << "\n";
      out << "scalars:";
      for (double q : joint.scalars) out << " " << fmt(q);
      out << "\n";
    }
    out << "point_range: " << point_range_string(model, k) << "\n";
    if (joint.kind != JointKind::kStatic)
      out << urdf_joint_line(joint, k) << "\n";
  }
  out << "[canonical_points]\n";
  for (const auto& p : model.canonical_points)
    out << "point: " << fmt3(p) << "\n";
  out << "[logits]\n";
  for (int i = 0; i < model.point_count(); ++i) {
    out << "row:";
    for (int k = 0; k < model.part_count(); ++k)
      out << " " << fmt(model.assignment_logits(i, k));
    out << "\n";
  }
  if (!out) throw InvalidInputError("write failed: " + path);
}

ArticulatedModel import_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file: " + path);

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line) || line.rfind("ARTIKIN-MODEL v1", 0) != 0)
    throw ParseError("missing ARTIKIN-MODEL v1 header in " + path, 1);
  ++line_no;

  ArticulatedModel model;
  int declared_parts = -1, declared_points = -1, declared_frames = -1;
  enum class Section { kHeader, kPart, kCanonical, kLogits };
  Section section = Section::kHeader;
  int current_part = -1;
  std::vector<std::vector<double>> logit_rows;

  while (std::getline(in, line)) {
    ++line_no;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::string body = line.substr(first);
    while (!body.empty() && (body.back() == '\r' || body.back() == ' '))
      body.pop_back();

    if (body.front() == '[') {
      if (body == "[canonical_points]") {
        section = Section::kCanonical;
        continue;
      }
      if (body == "[logits]") {
        section = Section::kLogits;
        continue;
      }
      std::istringstream hs(body);
      std::string open, idx;
      hs >> open >> idx;
      if (open != "[part" || idx.empty() || idx.back() != ']')
        throw ParseError("bad section header: " + body, line_no);
      int k;
      try {
        k = std::stoi(idx.substr(0, idx.size() - 1));
      } catch (const std::exception&) {
        throw ParseError("bad part index: " + body, line_no);
      }
      if (k != static_cast<int>(model.parts.size()))
        throw ParseError("part sections must be sequential", line_no);
      model.parts.emplace_back();
      current_part = k;
      section = Section::kPart;
      continue;
    }

    const size_t colon = body.find(':');
    if (colon == std::string::npos)
      throw ParseError("expected 'key: value' line: " + body, line_no);
    const std::string key = body.substr(0, colon);
    std::istringstream ls(body.substr(colon + 1));

    if (section == Section::kHeader) {
      if (key == "units") {
        std::string units;
        ls >> units;
        if (units != "m") throw ParseError("unsupported units: " + units, line_no);
      } else if (key == "temperature") {
        if (!(ls >> model.temperature) || !(model.temperature > 0.0))
          throw ParseError("bad temperature", line_no);
      } else if (key == "parts") {
        ls >> declared_parts;
      } else if (key == "points") {
        ls >> declared_points;
      } else if (key == "frames") {
        ls >> declared_frames;
      } else if (key == "canonical_frame") {
        ls >> model.canonical_frame;
      } else {
        throw ParseError("unknown header key '" + key + "'", line_no);
      }
    } else if (section == Section::kPart) {
      Joint& joint = model.parts[current_part];
      if (key == "kind") {
        std::string kind;
        ls >> kind;
        try {
          joint.kind = joint_kind_from_string(kind);
        } catch (const InvalidInputError& e) {
          throw ParseError(e.what(), line_no);
        }
      } else if (key == "axis") {
        const auto v = numbers_or_throw(ls, line_no);
        if (v.size() != 3) throw ParseError("axis needs 3 values", line_no);
        const Eigen::Vector3d raw(v[0], v[1], v[2]);
        if (std::abs(raw.norm() - 1.0) > 1e-6)
          throw ParseError("non-unit axis", line_no);
        joint.axis = UnitAxis(raw);
      } else if (key == "pivot") {
        const auto v = numbers_or_throw(ls, line_no);
        if (v.size() != 3) throw ParseError("pivot needs 3 values", line_no);
        joint.pivot = {v[0], v[1], v[2]};
      } else if (key == "scalars") {
        joint.scalars = numbers_or_throw(ls, line_no);
      } else if (key == "point_range") {
        // Derived metadata; accepted and re-derivable from the logits.
        std::string token;
        ls >> token;
      } else if (key == "urdf") {
        // Informational block for simulator hand-off; not re-imported.
      } else {
        throw ParseError("unknown part key '" + key + "'", line_no);
      }
    } else if (section == Section::kCanonical) {
      if (key != "point")
        throw ParseError("unknown key '" + key + "' in canonical_points",
                         line_no);
      const auto v = numbers_or_throw(ls, line_no);
      if (v.size() != 3) throw ParseError("point needs 3 values", line_no);
      model.canonical_points.push_back({v[0], v[1], v[2]});
    } else {
      if (key != "row")
        throw ParseError("unknown key '" + key + "' in logits", line_no);
      logit_rows.push_back(numbers_or_throw(ls, line_no));
    }
  }

  if (declared_parts >= 0 && declared_parts != model.part_count())
    throw ParseError("declared parts do not match part sections");
  if (declared_points >= 0 &&
      declared_points != static_cast<int>(model.canonical_points.size()))
    throw ParseError("declared points do not match canonical_points");
  if (logit_rows.size() != model.canonical_points.size())
    throw ParseError("logit row count does not match points");

  const int n = static_cast<int>(model.canonical_points.size());
  const int k_count = model.part_count();
  model.assignment_logits.resize(n, k_count);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(logit_rows[i].size()) != k_count)
      throw ParseError("logit row " + std::to_string(i) + " has " +
                       std::to_string(logit_rows[i].size()) + " values");
    for (int k = 0; k < k_count; ++k)
      model.assignment_logits(i, k) = logit_rows[i][k];
  }

  for (int k = 0; k < k_count; ++k) {
    Joint& joint = model.parts[k];
    if (joint.kind == JointKind::kStatic && joint.scalars.empty() &&
        declared_frames > 0)
      joint.scalars.assign(declared_frames, 0.0);
  }
  if (declared_frames >= 0 && model.frame_count() != declared_frames)
    throw ParseError("declared frames do not match scalar lengths");

  try {
    model.validate();
  } catch (const InvalidInputError& e) {
    throw ParseError(std::string(e.what()) + " in " + path);
  }
  return model;
}

void save_eval_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open for writing: " + path);
  out << "ARTIKIN-REPORT v1\n";
  out << "units: cm deg\n";
  out << "joint_type_accuracy: " << fmt(report.joint_type_accuracy) << "\n";
  out << "epe_cm: " << fmt(report.epe * 100.0) << "\n";
  out << "chamfer_whole_cm: " << fmt(report.chamfer_whole * 100.0) << "\n";
  out << "chamfer_movable_cm: " << fmt(report.chamfer_movable * 100.0) << "\n";
  out << "chamfer_static_cm: " << fmt(report.chamfer_static * 100.0) << "\n";
  out << "mean_axis_error_deg: " << fmt(report.mean_axis_error_deg()) << "\n";
  out << "mean_position_error_cm: " << fmt(report.mean_position_error() * 100.0)
      << "\n";
  for (const auto& p : report.parts) {
    out << "part: gt=" << p.gt_part << " pred=" << p.pred_part
        << " gt_kind=" << to_string(p.gt_kind)
        << " pred_kind=" << to_string(p.pred_kind)
        << " axis_error_deg=" << fmt(p.axis_error_deg)
        << " position_error_cm=" << fmt(p.position_error * 100.0) << "\n";
  }
  if (!report.unmatched_gt_parts.empty()) {
    out << "unmatched_gt:";
    for (int k : report.unmatched_gt_parts) out << " " << k;
    out << "\n";
  }
  if (!report.unmatched_pred_parts.empty()) {
    out << "unmatched_pred:";
    for (int k : report.unmatched_pred_parts) out << " " << k;
    out << "\n";
  }
  if (!out) throw InvalidInputError("write failed: " + path);
}

EvalReport load_eval_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open report file: " + path);
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line) || line.rfind("ARTIKIN-REPORT v1", 0) != 0)
    throw ParseError("missing ARTIKIN-REPORT v1 header in " + path, 1);
  ++line_no;

  EvalReport report;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const size_t colon = line.find(':');
    if (colon == std::string::npos)
      throw ParseError("expected 'key: value' line", line_no);
    const std::string key = line.substr(0, colon);
    std::istringstream ls(line.substr(colon + 1));
    if (key == "units") {
      std::string d, a;
      ls >> d >> a;
      if (d != "cm" || a != "deg")
        throw ParseError("unsupported report units", line_no);
    } else if (key == "joint_type_accuracy") {
      ls >> report.joint_type_accuracy;
    } else if (key == "epe_cm") {
      ls >> report.epe;
      report.epe /= 100.0;
    } else if (key == "chamfer_whole_cm") {
      ls >> report.chamfer_whole;
      report.chamfer_whole /= 100.0;
    } else if (key == "chamfer_movable_cm") {
      ls >> report.chamfer_movable;
      report.chamfer_movable /= 100.0;
    } else if (key == "chamfer_static_cm") {
      ls >> report.chamfer_static;
      report.chamfer_static /= 100.0;
    } else if (key == "mean_axis_error_deg" ||
               key == "mean_position_error_cm") {
      double ignored;
      ls >> ignored;  // derived aggregates
    } else if (key == "part") {
      PartEval pe;
      std::string token;
      while (ls >> token) {
        const size_t eq = token.find('=');
        if (eq == std::string::npos)
          throw ParseError("bad part token: " + token, line_no);
        const std::string name = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (name == "gt") pe.gt_part = std::stoi(value);
        else if (name == "pred") pe.pred_part = std::stoi(value);
        else if (name == "gt_kind") pe.gt_kind = joint_kind_from_string(value);
        else if (name == "pred_kind")
          pe.pred_kind = joint_kind_from_string(value);
        else if (name == "axis_error_deg") pe.axis_error_deg = std::stod(value);
        else if (name == "position_error_cm")
          pe.position_error = std::stod(value) / 100.0;
        else {
          throw ParseError("unknown part token: " + name, line_no);
        }
      }
      pe.kind_match = pe.pred_part >= 0 && pe.gt_kind == pe.pred_kind;
      report.parts.push_back(pe);
    } else if (key == "unmatched_gt") {
      int k;
      while (ls >> k) report.unmatched_gt_parts.push_back(k);
    } else if (key == "unmatched_pred") {
      int k;
      while (ls >> k) report.unmatched_pred_parts.push_back(k);
    } else {
      throw ParseError("unknown report key '" + key + "'", line_no);
    }
  }
  return report;
}

}  // namespace artikin
