#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "sshred/sindy/model.hpp"

namespace sshred {

// One line per state equation, e.g. "dz1/dt = 4.68 z2 - 2.37 z3".
inline std::string equations_text(const SindyModel& m, int precision = 4, const std::string& var = "z") {
  const auto names = term_names(m.spec, var);
  const RowMat c = m.coefficients();
  std::ostringstream os;
  for (std::size_t j = 0; j < m.dim(); ++j) {
    os << 'd' << var << (j + 1) << "/dt =";
    bool first = true;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
      if (!m.mask(I, J) || c(I, J) == 0.0) continue;
      const double v = c(I, J);
      std::ostringstream num;
      num << std::setprecision(precision) << std::abs(v);
      if (first)
        os << ' ' << (v < 0 ? "-" : "") << num.str();
      else
        os << (v < 0 ? " - " : " + ") << num.str();
      if (names[i] != "1") os << ' ' << names[i];
      first = false;
    }
    if (first) os << " 0";
    os << '\n';
  }
  return os.str();
}

inline nlohmann::json to_json(const LibrarySpec& s) {
  nlohmann::json trig = nlohmann::json::array();
  for (const auto& t : s.trig)
    trig.push_back({{"kind", t.kind == TrigTerm::Kind::Sin ? "sin" : "cos"}, {"freq", t.freq}});
  return {{"dim", s.dim}, {"include_constant", s.include_constant}, {"max_degree", s.max_degree}, {"trig", trig}};
}

inline LibrarySpec library_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> allowed{"dim", "include_constant", "max_degree", "trig"};
  for (const auto& [k, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError("library spec: unknown key '" + k + "'");
  LibrarySpec s;
  s.dim = j.at("dim").get<std::size_t>();
  s.include_constant = j.value("include_constant", true);
  s.max_degree = j.value("max_degree", 1);
  if (j.contains("trig")) {
    for (const auto& t : j.at("trig")) {
      const auto kind = t.at("kind").get<std::string>();
      if (kind != "sin" && kind != "cos") throw ConfigError("library spec: trig kind must be sin or cos");
      s.trig.push_back({kind == "sin" ? TrigTerm::Kind::Sin : TrigTerm::Kind::Cos, t.value("freq", 1.0)});
    }
  }
  library_terms(s);  // validates
  return s;
}

inline nlohmann::json to_json(const SindyModel& m) {
  const RowMat c = m.coefficients();
  nlohmann::json xi = nlohmann::json::array(), mask = nlohmann::json::array();
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array(), mr = nlohmann::json::array();
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      r.push_back(c(i, j));
      mr.push_back(static_cast<bool>(m.mask(i, j)));
    }
    xi.push_back(r);
    mask.push_back(mr);
  }
  return {{"library", to_json(m.spec)}, {"terms", term_names(m.spec)}, {"xi", xi},
          {"mask", mask}, {"dt", m.dt}, {"substeps", m.substeps}};
}

inline SindyModel sindy_from_json(const nlohmann::json& j) {
  const LibrarySpec spec = library_from_json(j.at("library"));
  const auto& xi = j.at("xi");
  const auto p = static_cast<Eigen::Index>(library_size(spec));
  const auto d = static_cast<Eigen::Index>(spec.dim);
  if (static_cast<Eigen::Index>(xi.size()) != p) throw FormatError("sindy model: xi has wrong row count");
  RowMat c(p, d);
  MaskMat mask(p, d);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (static_cast<Eigen::Index>(xi[i].size()) != d) throw FormatError("sindy model: xi has wrong column count");
    for (Eigen::Index j2 = 0; j2 < d; ++j2) {
      c(i, j2) = xi[i][j2].get<double>();
      mask(i, j2) = j.at("mask")[i][j2].get<bool>();
    }
  }
  SindyModel m(spec, c, j.at("dt").get<double>(), j.at("substeps").get<int>());
  m.mask = mask;
  m.apply_mask();
  return m;
}

}  // namespace sshred
