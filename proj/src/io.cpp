#include "pcabm/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace pcabm::io {

NodeIndex IdMap::intern(const std::string& id) {
  if (auto found = find(id)) return *found;
  const NodeIndex idx = ids_.size();
  ids_.push_back(id);
  auto pos = std::lower_bound(sorted_.begin(), sorted_.end(), id,
                              [](const auto& a, const std::string& v) { return a.first < v; });
  sorted_.insert(pos, {id, idx});
  return idx;
}

std::optional<NodeIndex> IdMap::find(const std::string& id) const {
  auto pos = std::lower_bound(sorted_.begin(), sorted_.end(), id,
                              [](const auto& a, const std::string& v) { return a.first < v; });
  if (pos != sorted_.end() && pos->first == id) return pos->second;
  return std::nullopt;
}

namespace {

std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

double parse_number(const std::string& tok, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error("line " + std::to_string(line_no) + ": cannot parse number '" + tok + "'");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

}  // namespace

std::vector<EdgeRecord> read_edge_records(std::istream& in) {
  std::vector<EdgeRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(strip_comment(line));
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() < 2 || tok.size() > 3) {
      throw Error("edge list line " + std::to_string(line_no) + ": expected 'src dst [weight]'");
    }
    const double w = tok.size() == 3 ? parse_number(tok[2], line_no) : 1.0;
    out.push_back({tok[0], tok[1], w});
  }
  return out;
}

std::vector<CovariateRecord> read_covariate_records(std::istream& in) {
  std::vector<CovariateRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(strip_comment(line));
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() < 2) {
      throw Error("covariate line " + std::to_string(line_no) + ": expected 'src dst v1 ... vp'");
    }
    CovariateRecord rec{tok[0], tok[1], {}};
    for (std::size_t k = 2; k < tok.size(); ++k) rec.values.push_back(parse_number(tok[k], line_no));
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::string> read_node_ids(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(strip_comment(line));
    std::string id;
    if (ss >> id) out.push_back(id);
  }
  return out;
}

Network assemble(const std::vector<std::string>& nodes, const std::vector<EdgeRecord>& edges,
                 const std::vector<CovariateRecord>& covariates, const EdgeListOptions& options) {
  IdMap ids;
  for (const auto& id : nodes) ids.intern(id);
  for (const auto& e : edges) {
    ids.intern(e.src);
    ids.intern(e.dst);
  }
  for (const auto& c : covariates) {
    ids.intern(c.src);
    ids.intern(c.dst);
  }

  RawNetwork raw;
  raw.n = ids.size();
  raw.ids = ids.ids();
  raw.p = covariates.empty() ? 0 : covariates.front().values.size();

  // Sum duplicates per pair (ordered when directed), symmetrize by max, then mirror.
  std::map<std::pair<NodeIndex, NodeIndex>, double> summed;
  for (const auto& e : edges) {
    NodeIndex i = *ids.find(e.src);
    NodeIndex j = *ids.find(e.dst);
    if (!options.directed && i > j) std::swap(i, j);
    summed[{i, j}] += e.weight;
  }
  if (options.directed) {
    std::map<std::pair<NodeIndex, NodeIndex>, double> undirected;
    for (const auto& [key, w] : summed) {
      const auto lo = std::min(key.first, key.second), hi = std::max(key.first, key.second);
      auto [it, fresh] = undirected.try_emplace({lo, hi}, w);
      if (!fresh) it->second = std::max(it->second, w);
    }
    summed = std::move(undirected);
  }
  for (auto [key, w] : summed) {
    if (options.cap_weights_at_one && w > 1.0) w = 1.0;
    raw.adjacency.push_back({key.first, key.second, w});
    if (key.first != key.second) raw.adjacency.push_back({key.second, key.first, w});
  }
  for (const auto& c : covariates) {
    raw.covariates.push_back({*ids.find(c.src), *ids.find(c.dst), c.values});
  }
  return validate(raw);
}

Network load_network(const std::string& edges_path,
                     const std::optional<std::string>& covariates_path,
                     const std::optional<std::string>& nodes_path,
                     const EdgeListOptions& options) {
  std::vector<std::string> nodes;
  if (nodes_path) {
    auto in = open_in(*nodes_path);
    nodes = read_node_ids(in);
  }
  auto ein = open_in(edges_path);
  auto edges = read_edge_records(ein);
  std::vector<CovariateRecord> cov;
  if (covariates_path) {
    auto cin = open_in(*covariates_path);
    cov = read_covariate_records(cin);
  }
  return assemble(nodes, edges, cov, options);
}

void write_edges(std::ostream& out, const Network& network) {
  const auto& ids = network.ids();
  for (const auto& e : network.edges()) {
    out << ids[e.i] << ' ' << ids[e.j] << ' ' << e.weight << '\n';
  }
}

void write_covariates(std::ostream& out, const Network& network) {
  const auto& ids = network.ids();
  const auto& cov = network.covariates();
  if (cov.p() == 0) return;
  char buf[32];
  for (NodeIndex i = 0; i < network.n(); ++i) {
    for (NodeIndex j = i + 1; j < network.n(); ++j) {
      out << ids[i] << ' ' << ids[j];
      for (double v : cov.at(i, j)) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
      }
      out << '\n';
    }
  }
}

void write_nodes(std::ostream& out, const Network& network) {
  for (const auto& id : network.ids()) out << id << '\n';
}

void write_labels(std::ostream& out, const Network& network, const Labeling& labeling) {
  out << "node_id,community\n";
  for (NodeIndex i = 0; i < network.n(); ++i) {
    out << network.ids()[i] << ',' << labeling[i] + 1 << '\n';
  }
}

namespace {

std::vector<std::pair<std::string, int>> read_label_rows(std::istream& in) {
  std::vector<std::pair<std::string, int>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != 2) throw Error("labels line " + std::to_string(line_no) + ": expected 2 columns");
    if (line_no == 1 && cells[1] == "community") continue;
    const double v = parse_number(cells[1], line_no);
    if (v < 1 || v != static_cast<int>(v)) {
      throw Error("labels line " + std::to_string(line_no) + ": community must be an integer >= 1");
    }
    rows.emplace_back(cells[0], static_cast<int>(v));
  }
  return rows;
}

}  // namespace

Labeling read_labels(std::istream& in, const Network& network, int K) {
  std::unordered_map<std::string, int> by_id;
  int max_label = 0;
  for (auto& [id, c] : read_label_rows(in)) {
    by_id[id] = c;
    max_label = std::max(max_label, c);
  }
  std::vector<int> labels(network.n());
  std::vector<std::string> missing;
  for (NodeIndex i = 0; i < network.n(); ++i) {
    auto it = by_id.find(network.ids()[i]);
    if (it == by_id.end()) {
      missing.push_back(network.ids()[i]);
      continue;
    }
    labels[i] = it->second;
  }
  if (!missing.empty()) {
    std::string msg = "labels missing for " + std::to_string(missing.size()) + " node(s):";
    for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 20); ++k) msg += " " + missing[k];
    throw Error(msg);
  }
  return Labeling::from_one_based(labels, K > 0 ? K : max_label);
}

std::pair<std::vector<int>, std::vector<int>> read_label_pair(std::istream& a, std::istream& b) {
  auto ra = read_label_rows(a);
  std::unordered_map<std::string, int> rb;
  for (auto& [id, c] : read_label_rows(b)) rb[id] = c;
  std::vector<int> la, lb;
  for (auto& [id, c] : ra) {
    auto it = rb.find(id);
    if (it == rb.end()) continue;
    la.push_back(c - 1);
    lb.push_back(it->second - 1);
  }
  if (la.size() != ra.size() || la.size() != rb.size()) {
    throw Error("label files cover different node sets (" + std::to_string(ra.size()) + " vs " +
                std::to_string(rb.size()) + " nodes, " + std::to_string(la.size()) + " shared)");
  }
  return {la, lb};
}

std::string read_file(const std::string& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << contents;
}

}  // namespace pcabm::io
