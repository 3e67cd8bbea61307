// Plain-text LP dump. One record per line, whitespace separated:
//
//   lp <nvars> <nrows>
//   var <name> <lower> <upper> <cost>          (nvars lines)
//   row <name> <le|eq|ge> <rhs> <nterms> <var> <coef> ...   (nrows lines)
//
// Names must not contain whitespace (the scheduler's names never do). Numbers
// use the shortest round-trip representation, infinities are inf / -inf.

#include <charconv>
#include <cmath>
#include <sstream>

#include "ptx/error.hpp"
#include "ptx/lp.hpp"

namespace ptx {

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_num(const std::string& tok, std::size_t line) {
  if (tok == "inf" || tok == "+inf") return kInf;
  if (tok == "-inf") return -kInf;
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    throw ParseError("line " + std::to_string(line), "bad number '" + tok + "'");
  }
  return v;
}

std::size_t parse_index(const std::string& tok, std::size_t line) {
  std::size_t v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    throw ParseError("line " + std::to_string(line), "bad index '" + tok + "'");
  }
  return v;
}

}  // namespace

std::string to_text(const LinearProgram& lp) {
  std::string out;
  out += "lp " + std::to_string(lp.num_vars()) + " " + std::to_string(lp.rows.size()) + "\n";
  for (std::size_t j = 0; j < lp.num_vars(); ++j) {
    const std::string name =
        j < lp.var_names.size() && !lp.var_names[j].empty() ? lp.var_names[j]
                                                            : "x" + std::to_string(j);
    out += "var " + name + " " + num(lp.lower[j]) + " " + num(lp.upper[j]) + " " +
           num(lp.objective[j]) + "\n";
  }
  for (std::size_t i = 0; i < lp.rows.size(); ++i) {
    const auto& r = lp.rows[i];
    out += "row " + (r.name.empty() ? "r" + std::to_string(i) : r.name) + " ";
    out += std::string(to_string(r.rel)) + " " + num(r.rhs) + " " +
           std::to_string(r.terms.size());
    for (const auto& t : r.terms) out += " " + std::to_string(t.var) + " " + num(t.coef);
    out += "\n";
  }
  return out;
}

LinearProgram lp_from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  std::size_t nvars = 0, nrows = 0;
  bool header = false;
  LinearProgram lp;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    const std::string where = "line " + std::to_string(lineno);
    auto next = [&]() {
      std::string tok;
      if (!(ls >> tok)) throw ParseError(where, "unexpected end of record");
      return tok;
    };
    if (kind == "lp") {
      nvars = parse_index(next(), lineno);
      nrows = parse_index(next(), lineno);
      header = true;
    } else if (!header) {
      throw ParseError(where, "missing 'lp' header");
    } else if (kind == "var") {
      std::string name = next();
      const double lo = parse_num(next(), lineno);
      const double hi = parse_num(next(), lineno);
      const double c = parse_num(next(), lineno);
      lp.add_variable(std::move(name), lo, hi, c);
    } else if (kind == "row") {
      LpRow r;
      r.name = next();
      const std::string rel = next();
      if (rel == "le") {
        r.rel = Relation::LessEqual;
      } else if (rel == "eq") {
        r.rel = Relation::Equal;
      } else if (rel == "ge") {
        r.rel = Relation::GreaterEqual;
      } else {
        throw ParseError(where, "bad relation '" + rel + "'");
      }
      r.rhs = parse_num(next(), lineno);
      const std::size_t nt = parse_index(next(), lineno);
      for (std::size_t k = 0; k < nt; ++k) {
        const std::size_t v = parse_index(next(), lineno);
        const double c = parse_num(next(), lineno);
        r.terms.push_back({v, c});
      }
      lp.rows.push_back(std::move(r));
    } else {
      throw ParseError(where, "unknown record '" + kind + "'");
    }
  }
  if (!header) throw ParseError("line 0", "empty LP text");
  if (lp.num_vars() != nvars || lp.rows.size() != nrows) {
    throw ParseError("header", "record counts do not match the header");
  }
  try {
    validate(lp);
  } catch (const ContractViolation& e) {
    throw ParseError("body", e.what());
  }
  return lp;
}

}  // namespace ptx
