#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pcabm/network.hpp"

namespace pcabm::io {

struct EdgeListOptions {
  // Records are directed (src -> dst); the undirected weight is the max over both directions.
  // Otherwise records are undirected and duplicates of a pair are summed.
  bool directed = false;
  // Weights above 1 become 1 after symmetrization (binarized analyses).
  bool cap_weights_at_one = false;
};

// External-id <-> dense index map. Indices follow registration order.
class IdMap {
 public:
  NodeIndex intern(const std::string& id);
  std::optional<NodeIndex> find(const std::string& id) const;
  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }

 private:
  std::vector<std::string> ids_;
  std::vector<std::pair<std::string, NodeIndex>> sorted_;
};

// Reads `src dst [weight]` records. Duplicate lines are summed; `#` starts a comment.
// Self-loops surface as validation issues.
struct EdgeRecord {
  std::string src;
  std::string dst;
  double weight;
};
std::vector<EdgeRecord> read_edge_records(std::istream& in);

// Reads `src dst v1 ... vp` records; p is inferred from the first record.
struct CovariateRecord {
  std::string src;
  std::string dst;
  std::vector<double> values;
};
std::vector<CovariateRecord> read_covariate_records(std::istream& in);

std::vector<std::string> read_node_ids(std::istream& in);

// Assembles and validates a network. The node universe is `nodes` (in that order) followed by
// every id first seen in the edge and covariate records.
Network assemble(const std::vector<std::string>& nodes, const std::vector<EdgeRecord>& edges,
                 const std::vector<CovariateRecord>& covariates,
                 const EdgeListOptions& options = {});

Network load_network(const std::string& edges_path,
                     const std::optional<std::string>& covariates_path = std::nullopt,
                     const std::optional<std::string>& nodes_path = std::nullopt,
                     const EdgeListOptions& options = {});

void write_edges(std::ostream& out, const Network& network);
void write_covariates(std::ostream& out, const Network& network);
void write_nodes(std::ostream& out, const Network& network);

// labels.csv: `node_id,community` with communities in 1..K.
void write_labels(std::ostream& out, const Network& network, const Labeling& labeling);
// Reads 1-based communities into a labeling in network node order. Every node must be present.
Labeling read_labels(std::istream& in, const Network& network, int K = 0);
// Aligns two label files by node id; both must cover the same nodes. Returns 0-based labels.
std::pair<std::vector<int>, std::vector<int>> read_label_pair(std::istream& a, std::istream& b);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace pcabm::io
