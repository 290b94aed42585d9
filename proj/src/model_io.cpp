#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "stochvsl/milp.hpp"

namespace stochvsl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string var_name(const LinearProgram& lp, int j) {
  return fmt::format("{}{}", lp.var(j).kind == VarKind::binary ? 'b' : 'x', j);
}

std::string num(double v) {
  if (v == kInf) return "+inf";
  if (v == -kInf) return "-inf";
  if (v == 0.0) return "0";  // avoids "-0"
  return fmt::format("{}", v);
}

void write_terms(std::string& out, const LinearProgram& lp, const std::vector<Term>& terms) {
  int on_line = 0;
  for (const auto& t : terms) {
    if (on_line == 8) {
      out += "\n  ";
      on_line = 0;
    }
    out += fmt::format(" {} {} {}", t.coef < 0 ? '-' : '+', num(std::abs(t.coef)), var_name(lp, t.var));
    ++on_line;
  }
}

std::string format_lp(const LinearProgram& lp) {
  std::string out = "\\ mixed-binary model written by stochvsl\n";
  out += lp.maximize() ? "Maximize\n" : "Minimize\n";
  out += " obj:";
  write_terms(out, lp, lp.objective().terms());
  if (lp.objective().constant() != 0.0 || lp.objective().terms().empty()) {
    const double c = lp.objective().constant();
    out += fmt::format(" {} {}", c < 0 ? '-' : '+', num(std::abs(c)));
  }
  out += "\nSubject To\n";
  for (int i = 0; i < lp.num_rows(); ++i) {
    const auto& row = lp.rows()[i];
    out += fmt::format(" c{}:", i);
    write_terms(out, lp, row.terms);
    const char* rel = row.sense == RowSense::le ? "<=" : row.sense == RowSense::ge ? ">=" : "=";
    out += fmt::format(" {} {}\n", rel, num(row.rhs));
  }
  out += "Bounds\n";
  for (int j = 0; j < lp.num_vars(); ++j) {
    const auto& v = lp.var(j);
    if (v.lb == -kInf && v.ub == kInf) {
      out += fmt::format(" {} free\n", var_name(lp, j));
    } else {
      out += fmt::format(" {} <= {} <= {}\n", num(v.lb), var_name(lp, j), num(v.ub));
    }
  }
  std::string bins;
  int on_line = 0;
  for (int j = 0; j < lp.num_vars(); ++j) {
    if (lp.var(j).kind != VarKind::binary) continue;
    bins += " " + var_name(lp, j);
    if (++on_line == 10) {
      bins += "\n";
      on_line = 0;
    }
  }
  if (!bins.empty()) {
    out += "Binaries\n" + bins;
    if (on_line != 0) out += "\n";
  }
  out += "End\n";
  return out;
}

std::string format_mps(const LinearProgram& lp) {
  std::string out = "NAME stochvsl\nOBJSENSE\n    ";
  out += lp.maximize() ? "MAX\n" : "MIN\n";
  out += "ROWS\n N obj\n";
  for (int i = 0; i < lp.num_rows(); ++i) {
    const auto s = lp.rows()[i].sense;
    out += fmt::format(" {} c{}\n", s == RowSense::le ? 'L' : s == RowSense::ge ? 'G' : 'E', i);
  }
  // column-major view
  std::vector<std::vector<std::pair<int, double>>> cols(lp.num_vars());
  for (int i = 0; i < lp.num_rows(); ++i)
    for (const auto& t : lp.rows()[i].terms) cols[t.var].emplace_back(i, t.coef);
  std::vector<double> obj(lp.num_vars(), 0.0);
  for (const auto& t : lp.objective().terms()) obj[t.var] = t.coef;

  out += "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (int j = 0; j < lp.num_vars(); ++j) {
    const bool is_bin = lp.var(j).kind == VarKind::binary;
    if (is_bin != in_int) {
      out += fmt::format("    M{} 'MARKER' '{}'\n", marker++, is_bin ? "INTORG" : "INTEND");
      in_int = is_bin;
    }
    const auto name = var_name(lp, j);
    if (obj[j] != 0.0 || cols[j].empty()) out += fmt::format("    {} obj {}\n", name, num(obj[j]));
    for (const auto& [i, a] : cols[j]) out += fmt::format("    {} c{} {}\n", name, i, num(a));
  }
  if (in_int) out += fmt::format("    M{} 'MARKER' 'INTEND'\n", marker++);

  out += "RHS\n";
  if (lp.objective().constant() != 0.0) {
    out += fmt::format("    RHS obj {}\n", num(-lp.objective().constant()));
  }
  for (int i = 0; i < lp.num_rows(); ++i) {
    if (lp.rows()[i].rhs != 0.0) out += fmt::format("    RHS c{} {}\n", i, num(lp.rows()[i].rhs));
  }
  out += "BOUNDS\n";
  for (int j = 0; j < lp.num_vars(); ++j) {
    const auto& v = lp.var(j);
    const auto name = var_name(lp, j);
    if (v.kind == VarKind::binary && v.lb == 0.0 && v.ub == 1.0) {
      out += fmt::format(" BV BND {}\n", name);
    } else if (v.lb == v.ub) {
      out += fmt::format(" FX BND {} {}\n", name, num(v.lb));
    } else if (v.lb == -kInf && v.ub == kInf) {
      out += fmt::format(" FR BND {}\n", name);
    } else {
      if (v.lb == -kInf) out += fmt::format(" MI BND {}\n", name);
      else if (v.lb != 0.0) out += fmt::format(" LO BND {} {}\n", name, num(v.lb));
      if (v.ub != kInf) out += fmt::format(" UP BND {} {}\n", name, num(v.ub));
    }
  }
  out += "ENDATA\n";
  return out;
}

double parse_num(const std::string& s) {
  if (s == "+inf" || s == "inf" || s == "+infinity" || s == "infinity") return kInf;
  if (s == "-inf" || s == "-infinity") return -kInf;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number: " + s);
  return v;
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  try {
    parse_num(s);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

// Variables are identified by their x<id>/b<id> names.
struct VarTable {
  std::map<int, VarKind> kinds;
  std::map<int, std::pair<double, double>> bounds;

  static int id_of(const std::string& name) {
    if (name.size() < 2 || (name[0] != 'x' && name[0] != 'b'))
      throw std::invalid_argument("unexpected variable name " + name);
    return std::stoi(name.substr(1));
  }
  int touch(const std::string& name) {
    const int id = id_of(name);
    kinds.emplace(id, name[0] == 'b' ? VarKind::binary : VarKind::continuous);
    return id;
  }
  LinearProgram make() const {
    LinearProgram lp;
    const int n = kinds.empty() ? 0 : kinds.rbegin()->first + 1;
    if (static_cast<int>(kinds.size()) != n) throw std::invalid_argument("variable ids are not contiguous");
    for (const auto& [id, kind] : kinds) {
      auto it = bounds.find(id);
      const auto def = kind == VarKind::binary ? std::pair{0.0, 1.0} : std::pair{0.0, kInf};
      const auto [lb, ub] = it == bounds.end() ? def : it->second;
      if (kind == VarKind::binary) {
        lp.add_binary(fmt::format("b{}", id));
        lp.vars().back().lb = lb;
        lp.vars().back().ub = ub;
      } else {
        lp.add_var(fmt::format("x{}", id), lb, ub);
      }
    }
    return lp;
  }
};

std::vector<std::string> tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto c = line.find('\\'); c != std::string::npos) line.resize(c);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) out.push_back(tok);
  }
  return out;
}

LinearProgram parse_lp(const std::string& text) {
  const auto tok = tokens(text);
  enum class Sec { none, obj, rows, bounds, binaries };
  Sec sec = Sec::none;
  bool maximize = true;
  VarTable table;
  std::vector<Term> obj_terms;
  double obj_const = 0.0;
  std::vector<Row> rows;
  Row* row = nullptr;
  double sign = 1.0;
  double coef = 1.0;
  bool have_coef = false;
  int expect_rhs = 0;  // 1 after a relation token

  auto flush_constant = [&] {
    if (have_coef && sec == Sec::obj) obj_const += sign * coef;
    sign = 1.0;
    coef = 1.0;
    have_coef = false;
  };

  for (std::size_t p = 0; p < tok.size(); ++p) {
    const std::string& t = tok[p];
    std::string lower = t;
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(ch));
    if (lower == "maximize" || lower == "minimize") {
      maximize = lower == "maximize";
      sec = Sec::obj;
      continue;
    }
    if (lower == "subject" && p + 1 < tok.size()) {
      flush_constant();
      ++p;
      sec = Sec::rows;
      continue;
    }
    if (lower == "bounds") {
      flush_constant();
      sec = Sec::bounds;
      continue;
    }
    if (lower == "binaries") {
      sec = Sec::binaries;
      continue;
    }
    if (lower == "end") break;

    if (sec == Sec::obj || sec == Sec::rows) {
      if (t.back() == ':') {
        flush_constant();
        if (sec == Sec::rows) {
          rows.push_back({t.substr(0, t.size() - 1), {}, RowSense::le, 0.0});
          row = &rows.back();
        }
        continue;
      }
      if (t == "<=" || t == ">=" || t == "=") {
        row->sense = t == "<=" ? RowSense::le : t == ">=" ? RowSense::ge : RowSense::eq;
        expect_rhs = 1;
        continue;
      }
      if (expect_rhs) {
        row->rhs = parse_num(t);
        expect_rhs = 0;
        continue;
      }
      if (t == "+" || t == "-") {
        flush_constant();
        sign = t == "-" ? -1.0 : 1.0;
        continue;
      }
      if (is_number(t)) {
        coef = parse_num(t);
        have_coef = true;
        continue;
      }
      const int id = table.touch(t);
      const Term term{id, sign * coef};
      if (sec == Sec::obj) obj_terms.push_back(term);
      else row->terms.push_back(term);
      sign = 1.0;
      coef = 1.0;
      have_coef = false;
    } else if (sec == Sec::bounds) {
      if (p + 1 < tok.size() && tok[p + 1] == "free") {
        const int id = table.touch(t);
        table.bounds[id] = {-kInf, kInf};
        ++p;
        continue;
      }
      // lb <= name <= ub
      if (p + 4 >= tok.size()) throw std::invalid_argument("truncated bounds line");
      const double lb = parse_num(t);
      const int id = table.touch(tok[p + 2]);
      const double ub = parse_num(tok[p + 4]);
      table.bounds[id] = {lb, ub};
      p += 4;
    } else if (sec == Sec::binaries) {
      table.touch(t);
    }
  }

  LinearProgram lp = table.make();
  LinExpr obj(obj_const);
  for (const auto& term : obj_terms) obj.add(term.var, term.coef);
  lp.set_objective(obj, maximize);
  for (auto& r : rows) lp.push_row(std::move(r));
  lp.validate();
  return lp;
}

LinearProgram parse_mps(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  enum class Sec { none, objsense, rows, columns, rhs, bounds };
  Sec sec = Sec::none;
  bool maximize = false;
  VarTable table;
  std::map<std::string, int> row_index;
  std::vector<Row> rows;
  std::string obj_row;
  std::vector<Term> obj_terms;
  double obj_const = 0.0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<std::string> f;
    std::string w;
    while (ls >> w) f.push_back(w);
    if (f.empty() || f[0][0] == '*') continue;
    const bool header = !std::isspace(static_cast<unsigned char>(line[0]));
    if (header) {
      if (f[0] == "NAME") continue;
      if (f[0] == "OBJSENSE") {
        sec = Sec::objsense;
        if (f.size() > 1) maximize = f[1] == "MAX" || f[1] == "MAXIMIZE";
        continue;
      }
      if (f[0] == "ROWS") sec = Sec::rows;
      else if (f[0] == "COLUMNS") sec = Sec::columns;
      else if (f[0] == "RHS") sec = Sec::rhs;
      else if (f[0] == "BOUNDS") sec = Sec::bounds;
      else if (f[0] == "ENDATA") break;
      else throw std::invalid_argument("unknown MPS section " + f[0]);
      continue;
    }
    switch (sec) {
      case Sec::objsense: maximize = f[0] == "MAX" || f[0] == "MAXIMIZE"; break;
      case Sec::rows:
        if (f[0] == "N") {
          obj_row = f[1];
        } else {
          const RowSense s = f[0] == "L" ? RowSense::le : f[0] == "G" ? RowSense::ge : RowSense::eq;
          row_index[f[1]] = static_cast<int>(rows.size());
          rows.push_back({f[1], {}, s, 0.0});
        }
        break;
      case Sec::columns: {
        if (f.size() >= 3 && f[1] == "'MARKER'") break;
        const int id = table.touch(f[0]);
        for (std::size_t k = 1; k + 1 < f.size(); k += 2) {
          const double a = parse_num(f[k + 1]);
          if (f[k] == obj_row) {
            if (a != 0.0) obj_terms.push_back({id, a});
          } else {
            rows.at(row_index.at(f[k])).terms.push_back({id, a});
          }
        }
        break;
      }
      case Sec::rhs:
        for (std::size_t k = 1; k + 1 < f.size(); k += 2) {
          const double v = parse_num(f[k + 1]);
          if (f[k] == obj_row) obj_const = -v;
          else rows.at(row_index.at(f[k])).rhs = v;
        }
        break;
      case Sec::bounds: {
        const int id = table.touch(f[2]);
        auto it = table.bounds.find(id);
        const bool bin = table.kinds[id] == VarKind::binary;
        auto b = it != table.bounds.end() ? it->second
                                          : (bin ? std::pair{0.0, 1.0} : std::pair{0.0, kInf});
        const std::string& k = f[0];
        if (k == "UP") b.second = parse_num(f[3]);
        else if (k == "LO") b.first = parse_num(f[3]);
        else if (k == "FX") b.first = b.second = parse_num(f[3]);
        else if (k == "FR") b = {-kInf, kInf};
        else if (k == "MI") b.first = -kInf;
        else if (k == "PL") b.second = kInf;
        else if (k == "BV") b = {0.0, 1.0};
        else throw std::invalid_argument("unknown bound type " + k);
        table.bounds[id] = b;
        break;
      }
      case Sec::none: throw std::invalid_argument("MPS data before a section header");
    }
  }
  LinearProgram lp = table.make();
  LinExpr obj(obj_const);
  for (const auto& t : obj_terms) obj.add(t.var, t.coef);
  lp.set_objective(obj, maximize);
  for (auto& r : rows) {
    r.terms = [&] {
      LinExpr e;
      for (const auto& t : r.terms) e.add(t.var, t.coef);
      return e.normalized().terms();
    }();
    lp.push_row(std::move(r));
  }
  lp.validate();
  return lp;
}

}  // namespace

std::string format_model(const LinearProgram& lp, ModelFormat format) {
  return format == ModelFormat::lp ? format_lp(lp) : format_mps(lp);
}

void export_model(const LinearProgram& lp, const std::string& path, ModelFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << format_model(lp, format);
  if (!out) throw std::runtime_error("failed writing " + path);
}

LinearProgram parse_model(const std::string& text, ModelFormat format) {
  return format == ModelFormat::lp ? parse_lp(text) : parse_mps(text);
}

LinearProgram import_model(const std::string& path, ModelFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str(), format);
}

}  // namespace stochvsl
