#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pcabm/network.hpp"

namespace pcabm {

// Per-node attribute records. Missing values are std::nullopt (empty cell or NA in CSV).
struct NodalTable {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<std::string>>> values;  // [row][column]

  // Header row required; the first column holds node ids.
  static NodalTable read_csv(std::istream& in);
  void write_csv(std::ostream& out) const;

  std::size_t rows() const { return ids.size(); }
  std::optional<std::size_t> column(const std::string& name) const;
  std::size_t require_column(const std::string& name) const;
  bool row_all_missing(std::size_t row) const;

  // Rows reordered to the network's node order; nodes absent from the table get all-missing rows.
  NodalTable align(const Network& network) const;
  NodalTable select(const std::vector<std::size_t>& rows) const;
};

struct CovariateRule {
  enum class Kind { same, same_value, absdiff, logsum1, logdegprod };
  Kind kind;
  std::string attribute;
  std::string value;  // same_value only
  std::string text() const;
};

// One rule per line: same(a) | same_value(a, v) | absdiff(a) | logsum1(a) | logdegprod.
// Blank lines and text after '#' are ignored.
struct CovariateRecipe {
  std::vector<CovariateRule> rules;
  static CovariateRecipe parse(const std::string& text);
  std::vector<std::string> attributes() const;
};

// Table rows must be aligned with the network. Column c of the result follows rule c.
PairCovariates build_covariates(const Network& network, const NodalTable& table,
                                const CovariateRecipe& recipe);

struct ImputePolicy {
  enum class Kind { constant, mode, conditional_random };
  Kind kind = Kind::mode;
  std::string value;        // constant
  std::string group;        // conditional_random: draw from observed values within this group
  std::uint64_t seed = 1;   // conditional_random

  // constant(v) | mode | conditional_random(group)
  static ImputePolicy parse(const std::string& text, std::uint64_t seed = 1);
};

// Fills missing cells of every attribute named in `policies`. Attributes listed in `required`
// that still hold missing values afterwards raise an error naming the nodes.
NodalTable impute(const NodalTable& table, const std::map<std::string, ImputePolicy>& policies,
                  const std::vector<std::string>& required = {});

struct RestrictedNetwork {
  Network network;
  NodalTable table;
  std::vector<NodeIndex> kept;  // original indices, ascending
};

// Largest connected component (ties: the component containing the smallest node index),
// optionally after dropping nodes whose attributes are all missing.
RestrictedNetwork largest_component(const Network& network, const NodalTable& table,
                                    bool drop_all_missing = false);

}  // namespace pcabm
