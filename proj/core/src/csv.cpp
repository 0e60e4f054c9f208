#include "medsel/csv.hpp"

#include "medsel/error.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace medsel {

namespace {

std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  if (quoted)
    throw InvalidInput("unterminated quoted field on line " + std::to_string(line_no));
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_cell(const std::string& raw, std::size_t row, const std::string& column) {
  const std::string cell = trim(raw);
  if (cell.empty())
    throw InvalidInput("missing value at row " + std::to_string(row) + ", column '" +
                       column + "'");
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw InvalidInput("unparsable number '" + cell + "' at row " +
                       std::to_string(row) + ", column '" + column + "'");
  return value;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
      line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_record(line, line_no);
    if (!have_header) {
      for (auto& f : fields) f = trim(f);
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw InvalidInput("line " + std::to_string(line_no) + " has " +
                         std::to_string(fields.size()) + " fields, header has " +
                         std::to_string(table.header.size()));
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw InvalidInput("CSV input is empty (header row required)");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return read_csv(in);
}

ColumnRole parse_column_role(const std::string& name) {
  if (name == "outcome") return ColumnRole::Outcome;
  if (name == "treatment") return ColumnRole::Treatment;
  if (name == "mediator") return ColumnRole::Mediator;
  if (name == "covariate") return ColumnRole::Covariate;
  if (name == "id") return ColumnRole::Id;
  if (name == "ignore") return ColumnRole::Ignore;
  throw InvalidInput("unknown column role '" + name + "'");
}

std::string to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::Outcome: return "outcome";
    case ColumnRole::Treatment: return "treatment";
    case ColumnRole::Mediator: return "mediator";
    case ColumnRole::Covariate: return "covariate";
    case ColumnRole::Id: return "id";
    case ColumnRole::Ignore: return "ignore";
  }
  return "ignore";
}

RoleMap parse_roles_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("roles: malformed JSON: ") + e.what());
  }
  if (doc.is_object() && doc.contains("roles")) doc = doc.at("roles");
  if (!doc.is_object()) throw InvalidInput("roles: expected a JSON object");
  RoleMap roles;
  for (const auto& [name, role] : doc.items()) {
    if (!role.is_string())
      throw InvalidInput("roles: role for column '" + name + "' must be a string");
    roles[name] = parse_column_role(role.get<std::string>());
  }
  return roles;
}

std::string roles_to_json(const RoleMap& roles) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [name, role] : roles) doc[name] = to_string(role);
  return doc.dump(2);
}

Dataset dataset_from_table(const CsvTable& table, const RoleMap& roles) {
  for (const auto& [name, role] : roles) {
    (void)role;
    bool found = false;
    for (const auto& h : table.header) found = found || h == name;
    if (!found) throw InvalidInput("roles reference missing column '" + name + "'");
  }
  Index outcome = -1, treatment = -1, id = -1;
  std::vector<Index> mediators, covariates;
  for (Index c = 0; c < static_cast<Index>(table.header.size()); ++c) {
    const auto it = roles.find(table.header[static_cast<std::size_t>(c)]);
    if (it == roles.end()) continue;
    switch (it->second) {
      case ColumnRole::Outcome:
        if (outcome >= 0) throw InvalidInput("more than one outcome column");
        outcome = c;
        break;
      case ColumnRole::Treatment:
        if (treatment >= 0) throw InvalidInput("more than one treatment column");
        treatment = c;
        break;
      case ColumnRole::Mediator: mediators.push_back(c); break;
      case ColumnRole::Covariate: covariates.push_back(c); break;
      case ColumnRole::Id: id = c; break;
      case ColumnRole::Ignore: break;
    }
  }
  if (outcome < 0) throw InvalidInput("no column has role 'outcome'");
  if (treatment < 0) throw InvalidInput("no column has role 'treatment'");
  if (mediators.empty()) throw InvalidInput("no column has role 'mediator'");

  const auto n = static_cast<Index>(table.rows.size());
  Dataset d;
  d.y.resize(n);
  d.z.resize(n);
  d.m.resize(n, static_cast<Index>(mediators.size()));
  d.x.resize(n, static_cast<Index>(covariates.size()));
  for (auto c : mediators) d.mediator_names.push_back(table.header[static_cast<std::size_t>(c)]);
  for (auto c : covariates) d.covariate_names.push_back(table.header[static_cast<std::size_t>(c)]);
  for (Index r = 0; r < n; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    auto cell = [&](Index c) {
      return parse_cell(row[static_cast<std::size_t>(c)], static_cast<std::size_t>(r),
                        table.header[static_cast<std::size_t>(c)]);
    };
    d.y(r) = cell(outcome);
    d.z(r) = cell(treatment);
    for (std::size_t j = 0; j < mediators.size(); ++j) d.m(r, static_cast<Index>(j)) = cell(mediators[j]);
    for (std::size_t j = 0; j < covariates.size(); ++j) d.x(r, static_cast<Index>(j)) = cell(covariates[j]);
    if (id >= 0) d.row_ids.push_back(trim(row[static_cast<std::size_t>(id)]));
  }
  require_valid(d);
  return d;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

RoleMap write_dataset_csv(std::ostream& out, const Dataset& d) {
  RoleMap roles;
  std::vector<std::string> header{"y", "z"};
  roles["y"] = ColumnRole::Outcome;
  roles["z"] = ColumnRole::Treatment;
  for (Index j = 0; j < d.p(); ++j) {
    header.push_back(d.mediator_name(j));
    roles[header.back()] = ColumnRole::Mediator;
  }
  for (Index j = 0; j < d.q(); ++j) {
    header.push_back(d.covariate_name(j));
    roles[header.back()] = ColumnRole::Covariate;
  }
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << csv_escape(header[c]);
  out << '\n';
  for (Index r = 0; r < d.n(); ++r) {
    out << format_double(d.y(r)) << ',' << format_double(d.z(r));
    for (Index j = 0; j < d.p(); ++j) out << ',' << format_double(d.m(r, j));
    for (Index j = 0; j < d.q(); ++j) out << ',' << format_double(d.x(r, j));
    out << '\n';
  }
  return roles;
}

}  // namespace medsel
