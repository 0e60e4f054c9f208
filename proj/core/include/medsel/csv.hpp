#pragma once

#include "medsel/dataset.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace medsel {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC-4180-style reader: comma separated, optional double-quoted fields,
// header row required. Throws InvalidInput on ragged rows.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

enum class ColumnRole { Outcome, Treatment, Mediator, Covariate, Id, Ignore };

ColumnRole parse_column_role(const std::string& name);
std::string to_string(ColumnRole role);

using RoleMap = std::map<std::string, ColumnRole>;

// Parses a sidecar mapping of column name to role, e.g.
//   {"y": "outcome", "snp": "treatment", "gene1": "mediator", "sex": "covariate"}
// A top-level "roles" object is also accepted.
RoleMap parse_roles_json(const std::string& text);
std::string roles_to_json(const RoleMap& roles);

// Builds a Dataset from a table. Mediators and covariates keep the table's
// column order. Exactly one outcome and one treatment column are required;
// empty or unparsable cells are rejected with their coordinates.
Dataset dataset_from_table(const CsvTable& table, const RoleMap& roles);

// Writes y, z, mediators, covariates with a header; returns the matching roles.
RoleMap write_dataset_csv(std::ostream& out, const Dataset& d);

// Shortest round-trip decimal representation.
std::string format_double(double v);

// Quotes a field when it contains a comma, quote or line break.
std::string csv_escape(const std::string& field);

}  // namespace medsel
