#include "pdrfe/interaction_log.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pdrfe {

namespace {

std::string trim_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

int parse_defect(const std::string& raw, const std::string& where) {
  if (raw == "0") return 0;
  if (raw == "1") return 1;
  throw std::runtime_error(where + ": defect must be 0 or 1, got '" + raw + "'");
}

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<std::string> split_delimited(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw std::runtime_error("unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

std::vector<InteractionRow> load_interaction_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open interaction log " + path.string());
  std::vector<InteractionRow> rows;
  std::string line;
  std::size_t lineno = 0;

  if (path.extension() == ".jsonl") {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string where = path.string() + ":" + std::to_string(lineno);
      try {
        const auto j = nlohmann::json::parse(line);
        auto text = [&](const char* key) {
          const auto& v = j.at(key);
          return v.is_string() ? v.get<std::string>() : v.dump();
        };
        const auto& d = j.at("defect");
        const std::string raw = d.is_string() ? d.get<std::string>() : d.dump();
        rows.push_back({text("cid"), text("sid"), text("utterance"), parse_defect(raw, where)});
      } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(where + ": " + e.what());
      }
    }
    return rows;
  }

  const char delim = path.extension() == ".tsv" ? '\t' : ',';
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  ++lineno;
  const auto header = split_delimited(trim_cr(line), delim);
  auto column = [&](const char* name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw std::runtime_error(path.string() + ": header lacks column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_cid = column("cid"), c_sid = column("sid"),
                    c_utt = column("utterance"), c_def = column("defect");
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_cr(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    std::vector<std::string> f;
    try {
      f = split_delimited(line, delim);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    if (f.size() != header.size()) {
      throw std::runtime_error(where + ": expected " + std::to_string(header.size()) +
                               " fields, got " + std::to_string(f.size()));
    }
    rows.push_back({f[c_cid], f[c_sid], f[c_utt], parse_defect(f[c_def], where)});
  }
  return rows;
}

void write_interaction_log(const std::filesystem::path& path,
                           const std::vector<InteractionRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (path.extension() == ".jsonl") {
    for (const auto& r : rows) {
      nlohmann::json j = {{"cid", r.cid}, {"sid", r.sid}, {"utterance", r.utterance},
                          {"defect", r.defect}};
      out << j.dump() << '\n';
    }
    return;
  }
  out << "cid,sid,utterance,defect\n";
  for (const auto& r : rows) {
    out << quote_field(r.cid) << ',' << quote_field(r.sid) << ',' << quote_field(r.utterance)
        << ',' << r.defect << '\n';
  }
}

std::size_t IdMap::intern(const std::string& id) {
  auto [it, inserted] = index_.emplace(id, ids_.size());
  if (inserted) ids_.push_back(id);
  return it->second;
}

std::size_t IdMap::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("unknown id '" + id + "'");
  return it->second;
}

CategoricalTable load_categorical_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metadata table " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  auto header = split_delimited(trim_cr(line), ',');
  if (header.size() < 2) throw std::runtime_error(path.string() + ": need id plus >= 1 column");
  CategoricalTable t;
  t.columns.assign(header.begin() + 1, header.end());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_cr(line);
    if (line.empty()) continue;
    auto f = split_delimited(line, ',');
    if (f.size() != header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": field count differs from header");
    }
    t.ids.push_back(f[0]);
    t.values.emplace_back(f.begin() + 1, f.end());
  }
  return t;
}

void write_categorical_table(const std::filesystem::path& path, const CategoricalTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "id";
  for (const auto& c : table.columns) out << ',' << quote_field(c);
  out << '\n';
  for (std::size_t r = 0; r < table.ids.size(); ++r) {
    out << quote_field(table.ids[r]);
    for (const auto& v : table.values[r]) out << ',' << quote_field(v);
    out << '\n';
  }
}

Tensor one_hot(const CategoricalTable& table, const IdMap& order) {
  const std::size_t ncol = table.columns.size();
  std::vector<IdMap> levels(ncol);
  for (const auto& row : table.values)
    for (std::size_t c = 0; c < ncol; ++c) levels[c].intern(row.at(c));
  std::vector<std::size_t> offset(ncol + 1, 0);
  for (std::size_t c = 0; c < ncol; ++c) offset[c + 1] = offset[c] + levels[c].size();
  Tensor out({order.size(), offset[ncol]});
  for (std::size_t r = 0; r < table.ids.size(); ++r) {
    if (!order.contains(table.ids[r])) continue;
    const std::size_t row = order.at(table.ids[r]);
    for (std::size_t c = 0; c < ncol; ++c)
      out.at(row, offset[c] + levels[c].at(table.values[r][c])) = 1.0;
  }
  return out;
}

IndexedLog index_log(const std::vector<InteractionRow>& rows, const EdgeEncoder& encoder,
                     IdMap customers, IdMap skills) {
  IndexedLog log{std::move(customers), std::move(skills), {}};
  log.records.reserve(rows.size());
  for (const auto& r : rows) {
    log.records.push_back({log.customers.intern(r.cid), log.skills.intern(r.sid),
                           encoder.encode(r.utterance), r.defect});
  }
  return log;
}

}  // namespace pdrfe
