#pragma once

// JSON / CSV serialization of the solver reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "varinv/app/config.hpp"

namespace varinv::app {

inline json to_json(const CriticalPointClass& c) {
  json j = {{"tag", to_string(c.tag)},
            {"sigma_min", c.sigma_min},
            {"jacobian_norm", c.jacobian_norm},
            {"d2_norm", c.d2_norm},
            {"d3_sup", c.d3_sup},
            {"d3_inf", c.d3_inf},
            {"diagonal_third", c.diagonal_third}};
  if (c.diagonal_third) j["diagonal_coeffs"] = to_json(c.diagonal_coeffs);
  return j;
}

inline json to_json(const SolveReport& r) {
  return {{"status", to_string(r.status)},
          {"solution", to_json(r.solution)},
          {"residual_norm", r.residual_norm},
          {"class_at_solution", to_json(r.class_at_solution)},
          {"iterations", r.iterations},
          {"runs", r.runs},
          {"start_index", r.start_index},
          {"seed", r.seed},
          {"classified_points", r.classified_points}};
}

inline json to_json(const BarrierBound& b) {
  return {{"ring_bound", b.ring_bound}, {"level", b.level}, {"exponent", b.exponent},
          {"exponent_mismatch", b.exponent_mismatch}};
}

inline json to_json(const MountainPassReport& r) {
  return {{"critical_point", to_json(r.critical_point)},
          {"critical_value", r.critical_value},
          {"gradient_norm", r.gradient_norm},
          {"path_history_length", r.path_history_length},
          {"barrier_estimate", r.barrier_estimate},
          {"relaxation_iterations", r.relaxation_iterations},
          {"polish_iterations", r.polish_iterations},
          {"max_history", r.max_history}};
}

inline json to_json(const AuditReport& r) {
  json j = {{"verdict", to_string(r.verdict)}, {"gap", r.gap}};
  j["critical_points"] = json::array();
  for (const auto& cp : r.critical_points) {
    j["critical_points"].push_back({{"point", to_json(cp.point)},
                                    {"psi_value", cp.psi_value},
                                    {"residual", cp.residual},
                                    {"class", to_json(cp.cls)}});
  }
  if (r.mountain_pass) j["mountain_pass"] = to_json(*r.mountain_pass);
  if (r.barrier) j["barrier"] = to_json(*r.barrier);
  return j;
}

inline json to_json(const GrowthReport& r) {
  json dirs = json::array();
  for (const auto& d : r.directions) dirs.push_back(to_json(d));
  return {{"kind", "growth-evidence"},
          {"coercive_flag", r.coercive_flag},
          {"min_exponent", r.min_exponent},
          {"fitted_exponent", r.fitted_exponent},
          {"radii", r.radii},
          {"directions", dirs},
          {"min_value_at_max_radius", r.min_value_at_max_radius},
          {"max_value_at_min_radius", r.max_value_at_min_radius},
          {"warnings", r.warnings}};
}

inline json to_json(const PSCandidate& c) {
  return {{"point", to_json(c.point)}, {"phi", c.phi}, {"grad_norm", c.grad_norm}};
}

inline json to_json(const PSProbeReport& r) {
  json cands = json::array();
  for (const auto& c : r.candidate_sequences) cands.push_back(to_json(c));
  return {{"kind", "palais-smale-evidence"},
          {"violation_found", r.violation_found},
          {"max_norm_at_small_gradient", r.max_norm_at_small_gradient},
          {"strongest", to_json(r.strongest)},
          {"candidates", cands}};
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string trace_csv(const std::vector<TraceEntry>& trace) {
  std::string s = "iter,phi,grad_norm\n";
  for (const auto& e : trace) {
    s += std::to_string(e.iteration) + "," + format_double(e.phi) + "," + format_double(e.grad_norm) + "\n";
  }
  return s;
}

inline std::string vector_lines(const Vector& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) s += format_double(v(i)) + "\n";
  return s;
}

/// One row per node: step,node,value,x0,x1,...
inline std::string path_csv(const std::vector<PathState>& history) {
  std::string s;
  if (history.empty()) return "step,node,value\n";
  s = "step,node,value";
  for (Index i = 0; i < history.front().nodes.front().size(); ++i) s += ",x" + std::to_string(i);
  s += "\n";
  for (std::size_t k = 0; k < history.size(); ++k) {
    const PathState& p = history[k];
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
      s += std::to_string(k) + "," + std::to_string(i) + "," + format_double(p.values[i]);
      for (Index d = 0; d < p.nodes[i].size(); ++d) s += "," + format_double(p.nodes[i](d));
      s += "\n";
    }
  }
  return s;
}

}  // namespace varinv::app
