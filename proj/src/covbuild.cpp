#include "pcabm/covbuild.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <queue>
#include <random>
#include <sstream>
#include <unordered_map>

#include "pcabm/random.hpp"

namespace pcabm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string list_ids(const std::vector<std::string>& ids) {
  std::string s;
  const std::size_t shown = std::min<std::size_t>(ids.size(), 10);
  for (std::size_t k = 0; k < shown; ++k) s += (k ? ", " : "") + ids[k];
  if (ids.size() > shown) s += ", ... (" + std::to_string(ids.size()) + " total)";
  return s;
}

double as_number(const std::string& v, const std::string& attr, const std::string& id) {
  const char* begin = v.c_str();
  char* end = nullptr;
  const double x = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(x)) {
    throw Error("attribute '" + attr + "' of node " + id + " is not numeric: '" + v + "'");
  }
  return x;
}

}  // namespace

NodalTable NodalTable::read_csv(std::istream& in) {
  NodalTable t;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (!header) {
      if (cells.size() < 1) throw Error("nodal table header is empty");
      t.columns.assign(cells.begin() + 1, cells.end());
      header = true;
      continue;
    }
    if (cells.size() != t.columns.size() + 1) {
      throw Error("nodal table line " + std::to_string(lineno) + ": expected " +
                  std::to_string(t.columns.size() + 1) + " fields, got " + std::to_string(cells.size()));
    }
    if (cells[0].empty()) throw Error("nodal table line " + std::to_string(lineno) + ": empty node id");
    t.ids.push_back(cells[0]);
    std::vector<std::optional<std::string>> row;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (cells[c].empty() || cells[c] == "NA") {
        row.emplace_back(std::nullopt);
      } else {
        row.emplace_back(cells[c]);
      }
    }
    t.values.push_back(std::move(row));
  }
  if (!header) throw Error("nodal table has no header");
  std::vector<std::string> sorted = t.ids;
  std::sort(sorted.begin(), sorted.end());
  auto dup = std::adjacent_find(sorted.begin(), sorted.end());
  if (dup != sorted.end()) throw Error("nodal table lists node " + *dup + " twice");
  return t;
}

void NodalTable::write_csv(std::ostream& out) const {
  out << "node_id";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < ids.size(); ++r) {
    out << ids[r];
    for (const auto& v : values[r]) out << ',' << (v ? *v : "NA");
    out << '\n';
  }
}

std::optional<std::size_t> NodalTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) return c;
  }
  return std::nullopt;
}

std::size_t NodalTable::require_column(const std::string& name) const {
  if (auto c = column(name)) return *c;
  throw Error("nodal table has no attribute '" + name + "'");
}

bool NodalTable::row_all_missing(std::size_t row) const {
  return std::all_of(values[row].begin(), values[row].end(), [](const auto& v) { return !v; });
}

NodalTable NodalTable::align(const Network& network) const {
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t r = 0; r < ids.size(); ++r) where.emplace(ids[r], r);
  NodalTable out;
  out.columns = columns;
  out.ids = network.ids();
  for (const auto& id : network.ids()) {
    auto it = where.find(id);
    if (it == where.end()) {
      out.values.emplace_back(columns.size(), std::nullopt);
    } else {
      out.values.push_back(values[it->second]);
    }
  }
  return out;
}

NodalTable NodalTable::select(const std::vector<std::size_t>& rows) const {
  NodalTable out;
  out.columns = columns;
  for (auto r : rows) {
    out.ids.push_back(ids.at(r));
    out.values.push_back(values.at(r));
  }
  return out;
}

std::string CovariateRule::text() const {
  switch (kind) {
    case Kind::same: return "same(" + attribute + ")";
    case Kind::same_value: return "same_value(" + attribute + ", " + value + ")";
    case Kind::absdiff: return "absdiff(" + attribute + ")";
    case Kind::logsum1: return "logsum1(" + attribute + ")";
    case Kind::logdegprod: return "logdegprod";
  }
  return "";
}

CovariateRecipe CovariateRecipe::parse(const std::string& text) {
  CovariateRecipe recipe;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto fail = [&](const std::string& what) {
      throw Error("recipe line " + std::to_string(lineno) + " '" + line + "': " + what);
    };
    if (line == "logdegprod") {
      recipe.rules.push_back({CovariateRule::Kind::logdegprod, "", ""});
      continue;
    }
    const auto open = line.find('(');
    if (open == std::string::npos || line.back() != ')') fail("expected name(arguments)");
    const std::string name = trim(line.substr(0, open));
    std::vector<std::string> args;
    {
      std::istringstream as(line.substr(open + 1, line.size() - open - 2));
      std::string a;
      while (std::getline(as, a, ',')) args.push_back(trim(a));
    }
    for (const auto& a : args) {
      if (a.empty()) fail("empty argument");
    }
    CovariateRule rule{CovariateRule::Kind::same, "", ""};
    if (name == "same" || name == "absdiff" || name == "logsum1") {
      if (args.size() != 1) fail(name + " takes one attribute");
      rule.kind = name == "same" ? CovariateRule::Kind::same
                  : name == "absdiff" ? CovariateRule::Kind::absdiff
                                      : CovariateRule::Kind::logsum1;
      rule.attribute = args[0];
    } else if (name == "same_value") {
      if (args.size() != 2) fail("same_value takes an attribute and a value");
      rule.kind = CovariateRule::Kind::same_value;
      rule.attribute = args[0];
      rule.value = args[1];
    } else {
      fail("unknown rule '" + name + "'");
    }
    recipe.rules.push_back(std::move(rule));
  }
  if (recipe.rules.empty()) throw Error("recipe has no rules");
  return recipe;
}

std::vector<std::string> CovariateRecipe::attributes() const {
  std::vector<std::string> out;
  for (const auto& r : rules) {
    if (r.kind != CovariateRule::Kind::logdegprod &&
        std::find(out.begin(), out.end(), r.attribute) == out.end()) {
      out.push_back(r.attribute);
    }
  }
  return out;
}

PairCovariates build_covariates(const Network& network, const NodalTable& table,
                                const CovariateRecipe& recipe) {
  const std::size_t n = network.n();
  if (table.rows() != n) throw Error("nodal table is not aligned with the network");
  for (std::size_t r = 0; r < n; ++r) {
    if (table.ids[r] != network.ids()[r]) throw Error("nodal table is not aligned with the network");
  }
  const std::size_t p = recipe.rules.size();
  PairCovariates z(n, p);
  for (std::size_t c = 0; c < p; ++c) {
    const auto& rule = recipe.rules[c];
    // Per-node value feeding the pairwise rule.
    std::vector<std::string> text(n);
    std::vector<double> num(n, 0.0);
    if (rule.kind == CovariateRule::Kind::logdegprod) {
      const auto d = degrees(network);
      std::vector<std::string> isolated;
      for (std::size_t i = 0; i < n; ++i) {
        if (d[i] < 1) isolated.push_back(network.ids()[i]);
        num[i] = std::log(static_cast<double>(d[i]));
      }
      if (!isolated.empty()) {
        throw Error("logdegprod needs every degree >= 1; restrict to the largest component first. "
                    "Isolated nodes: " + list_ids(isolated));
      }
    } else {
      const std::size_t col = table.require_column(rule.attribute);
      std::vector<std::string> missing;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& v = table.values[i][col];
        if (!v) {
          missing.push_back(table.ids[i]);
          continue;
        }
        text[i] = *v;
        if (rule.kind == CovariateRule::Kind::absdiff) num[i] = as_number(*v, rule.attribute, table.ids[i]);
        if (rule.kind == CovariateRule::Kind::logsum1) {
          const double x = as_number(*v, rule.attribute, table.ids[i]);
          if (!(x > -1)) throw Error("logsum1 needs values above -1; node " + table.ids[i]);
          num[i] = std::log(x + 1.0);
        }
      }
      if (!missing.empty()) {
        throw Error("attribute '" + rule.attribute + "' is missing for nodes: " + list_ids(missing));
      }
    }
    std::size_t idx = 0;
    for (NodeIndex i = 0; i < n; ++i) {
      for (NodeIndex j = i + 1; j < n; ++j, ++idx) {
        double v = 0.0;
        switch (rule.kind) {
          case CovariateRule::Kind::same: v = text[i] == text[j] ? 1.0 : 0.0; break;
          case CovariateRule::Kind::same_value:
            v = (text[i] == rule.value && text[j] == rule.value) ? 1.0 : 0.0;
            break;
          case CovariateRule::Kind::absdiff: v = std::abs(num[i] - num[j]); break;
          case CovariateRule::Kind::logsum1:
          case CovariateRule::Kind::logdegprod: v = num[i] + num[j]; break;
        }
        z.pair(idx)[c] = v;
      }
    }
  }
  return z;
}

ImputePolicy ImputePolicy::parse(const std::string& text, std::uint64_t seed) {
  const std::string t = trim(text);
  ImputePolicy p;
  p.seed = seed;
  if (t == "mode") {
    p.kind = Kind::mode;
    return p;
  }
  const auto open = t.find('(');
  if (open != std::string::npos && t.back() == ')') {
    const std::string name = trim(t.substr(0, open));
    const std::string arg = trim(t.substr(open + 1, t.size() - open - 2));
    if (!arg.empty() && name == "constant") {
      p.kind = Kind::constant;
      p.value = arg;
      return p;
    }
    if (!arg.empty() && name == "conditional_random") {
      p.kind = Kind::conditional_random;
      p.group = arg;
      return p;
    }
  }
  throw Error("unknown imputation policy '" + text + "'; expected constant(v), mode or conditional_random(attr)");
}

NodalTable impute(const NodalTable& table, const std::map<std::string, ImputePolicy>& policies,
                  const std::vector<std::string>& required) {
  NodalTable out = table;
  for (const auto& [attr, policy] : policies) {
    const std::size_t col = out.require_column(attr);
    // Observed values (from the input table, not from earlier imputations).
    std::vector<std::size_t> observed_rows;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (table.values[r][col]) observed_rows.push_back(r);
    }
    if (observed_rows.size() == table.rows()) continue;
    switch (policy.kind) {
      case ImputePolicy::Kind::constant:
        for (auto& row : out.values) {
          if (!row[col]) row[col] = policy.value;
        }
        break;
      case ImputePolicy::Kind::mode: {
        if (observed_rows.empty()) throw Error("attribute '" + attr + "' has no observed values to take a mode of");
        std::map<std::string, std::size_t> freq;
        for (auto r : observed_rows) ++freq[*table.values[r][col]];
        // Most frequent; ties go to the lexicographically smallest value.
        auto best = freq.begin();
        for (auto it = freq.begin(); it != freq.end(); ++it) {
          if (it->second > best->second) best = it;
        }
        for (auto& row : out.values) {
          if (!row[col]) row[col] = best->first;
        }
        break;
      }
      case ImputePolicy::Kind::conditional_random: {
        const std::size_t gcol = table.require_column(policy.group);
        if (observed_rows.empty()) throw Error("attribute '" + attr + "' has no observed values to draw from");
        std::map<std::string, std::vector<std::string>> pool;
        std::vector<std::string> all;
        for (auto r : observed_rows) {
          all.push_back(*table.values[r][col]);
          if (table.values[r][gcol]) pool[*table.values[r][gcol]].push_back(*table.values[r][col]);
        }
        std::uint64_t tag = 0xcbf29ce484222325ULL;  // FNV-1a of the attribute name
        for (unsigned char ch : attr) tag = (tag ^ ch) * 0x100000001b3ULL;
        Rng rng(derive_seed(policy.seed, tag));
        for (std::size_t r = 0; r < out.rows(); ++r) {
          if (out.values[r][col]) continue;
          const std::vector<std::string>* src = &all;
          if (const auto& g = table.values[r][gcol]) {
            auto it = pool.find(*g);
            if (it != pool.end()) src = &it->second;
          }
          std::uniform_int_distribution<std::size_t> pick(0, src->size() - 1);
          out.values[r][col] = (*src)[pick(rng)];
        }
        break;
      }
    }
  }
  for (const auto& attr : required) {
    const std::size_t col = out.require_column(attr);
    std::vector<std::string> missing;
    for (std::size_t r = 0; r < out.rows(); ++r) {
      if (!out.values[r][col]) missing.push_back(out.ids[r]);
    }
    if (!missing.empty()) {
      throw Error("attribute '" + attr + "' has missing values and no imputation policy: " + list_ids(missing));
    }
  }
  return out;
}

RestrictedNetwork largest_component(const Network& network, const NodalTable& table, bool drop_all_missing) {
  const std::size_t n = network.n();
  if (table.rows() != n) throw Error("nodal table is not aligned with the network");
  if (network.edges().empty()) throw Error("network has no edges; no component to keep");
  std::vector<char> allowed(n, 1);
  if (drop_all_missing && !table.columns.empty()) {
    for (std::size_t i = 0; i < n; ++i) allowed[i] = table.row_all_missing(i) ? 0 : 1;
  }
  std::vector<std::ptrdiff_t> comp(n, -1);
  std::vector<std::size_t> sizes;
  for (std::size_t s = 0; s < n; ++s) {
    if (!allowed[s] || comp[s] >= 0) continue;
    const auto id = static_cast<std::ptrdiff_t>(sizes.size());
    std::size_t count = 0;
    std::queue<std::size_t> q;
    q.push(s);
    comp[s] = id;
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      ++count;
      for (const auto& nb : network.neighbors(u)) {
        if (allowed[nb.node] && comp[nb.node] < 0) {
          comp[nb.node] = id;
          q.push(nb.node);
        }
      }
    }
    sizes.push_back(count);
  }
  if (sizes.empty()) throw Error("no nodes remain after filtering");
  // Components are numbered by their smallest node, so the first maximum wins ties.
  const auto best = static_cast<std::ptrdiff_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  RestrictedNetwork out;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (comp[i] == best) {
      out.kept.push_back(i);
      rows.push_back(i);
    }
  }
  if (out.kept.size() < 2) throw Error("largest component has fewer than 2 nodes");
  out.network = induced_subgraph(network, out.kept);
  out.table = table.select(rows);
  return out;
}

}  // namespace pcabm
