#include "knobtune/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <json.hpp>

#include "knobtune/csv.hpp"
#include "knobtune/error.hpp"
#include "knobtune/log.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace knobtune {

void Schema::validate() const {
  if (knob_names.empty()) throw DataError("schema: no knob columns");
  if (metric_names.empty()) throw DataError("schema: no metric columns");
  if (latency_name.empty()) throw DataError("schema: empty latency column name");
  if (workload_id_name.empty()) throw DataError("schema: empty workload id column name");
  std::set<std::string> seen;
  auto claim = [&](const std::string& name) {
    if (!seen.insert(name).second) throw DataError("schema: column '" + name + "' listed twice");
  };
  for (const auto& n : knob_names) claim(n);
  for (const auto& n : metric_names) claim(n);
  claim(latency_name);
  claim(workload_id_name);
}

std::size_t Schema::metric_index(std::string_view name) const {
  const auto it = std::find(metric_names.begin(), metric_names.end(), name);
  if (it == metric_names.end()) throw DataError("unknown metric '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - metric_names.begin());
}

std::size_t Corpus::total_rows() const {
  std::size_t n = 0;
  for (const auto* group : {&offline, &online_b, &online_c})
    for (const auto& t : *group) n += t.size();
  return n;
}

namespace {

std::vector<std::string> string_list(const json& doc, const char* key) {
  if (!doc.contains(key)) throw DataError(std::string("manifest: missing key '") + key + "'");
  const auto& arr = doc.at(key);
  if (!arr.is_array()) throw DataError(std::string("manifest: '") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& v : arr) {
    if (!v.is_string()) throw DataError(std::string("manifest: '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<fs::path> path_list(const json& doc, const char* key, const fs::path& base) {
  std::vector<fs::path> out;
  if (!doc.contains(key)) return out;
  for (const auto& s : string_list(doc, key)) {
    fs::path p(s);
    out.push_back(p.is_absolute() ? p : base / p);
  }
  return out;
}

json relative_list(const std::vector<fs::path>& paths, const fs::path& base) {
  json arr = json::array();
  for (const auto& p : paths) {
    std::error_code ec;
    fs::path rel = fs::relative(fs::absolute(p), fs::absolute(base.empty() ? "." : base), ec);
    if (ec || rel.empty()) rel = fs::absolute(p);
    arr.push_back(rel.generic_string());
  }
  return arr;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::ofstream open_for_write(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

enum class Role { ignored, workload_id, latency, knob, metric };

struct ColumnPlan {
  std::vector<Role> roles;
  std::vector<std::size_t> slot;  // index within knobs/metrics
};

ColumnPlan plan_columns(const std::vector<std::string_view>& header, const Schema& schema,
                        const fs::path& path) {
  ColumnPlan plan;
  plan.roles.assign(header.size(), Role::ignored);
  plan.slot.assign(header.size(), 0);

  std::set<std::string_view> seen;
  for (const auto h : header)
    if (!seen.insert(h).second)
      throw DataError(path.string() + ": duplicate column name '" + std::string(h) + "'");

  auto locate = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  plan.roles[locate(schema.workload_id_name)] = Role::workload_id;
  plan.roles[locate(schema.latency_name)] = Role::latency;
  for (std::size_t i = 0; i < schema.knob_names.size(); ++i) {
    const auto c = locate(schema.knob_names[i]);
    plan.roles[c] = Role::knob;
    plan.slot[c] = i;
  }
  for (std::size_t i = 0; i < schema.metric_names.size(); ++i) {
    const auto c = locate(schema.metric_names[i]);
    plan.roles[c] = Role::metric;
    plan.slot[c] = i;
  }
  const auto ignored = std::count(plan.roles.begin(), plan.roles.end(), Role::ignored);
  if (ignored > 0)
    log::warn(path.string() + ": ignoring " + std::to_string(ignored) +
              " column(s) not named in the manifest");
  return plan;
}

}  // namespace

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("manifest '" + path.string() + "': " + e.what());
  }
  if (!doc.is_object()) throw DataError("manifest '" + path.string() + "': expected an object");
  for (const char* key : {"workload_id", "latency"})
    if (!doc.contains(key) || !doc.at(key).is_string())
      throw DataError(std::string("manifest: missing string key '") + key + "'");

  Manifest m;
  m.schema.workload_id_name = doc.at("workload_id").get<std::string>();
  m.schema.latency_name = doc.at("latency").get<std::string>();
  m.schema.knob_names = string_list(doc, "knobs");
  m.schema.metric_names = string_list(doc, "metrics");
  m.schema.validate();

  const fs::path base = path.parent_path();
  m.files.offline = path_list(doc, "offline", base);
  m.files.online_b = path_list(doc, "online_b", base);
  m.files.online_c = path_list(doc, "online_c", base);
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path();
  json doc;
  doc["workload_id"] = manifest.schema.workload_id_name;
  doc["latency"] = manifest.schema.latency_name;
  doc["knobs"] = manifest.schema.knob_names;
  doc["metrics"] = manifest.schema.metric_names;
  doc["offline"] = relative_list(manifest.files.offline, base);
  doc["online_b"] = relative_list(manifest.files.online_b, base);
  doc["online_c"] = relative_list(manifest.files.online_c, base);
  auto out = open_for_write(path);
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

double encode_cell(std::string_view cell) {
  if (const auto v = csv::parse_double(cell)) return *v;
  const std::string token = lower(cell);
  if (token == "true" || token == "on" || token == "yes") return 1.0;
  if (token == "false" || token == "off" || token == "no") return 0.0;
  throw DataError("unrecognized token '" + std::string(cell) + "'");
}

std::vector<WorkloadTable> load_tables(std::span<const fs::path> paths,
                                       const std::shared_ptr<const Schema>& schema) {
  std::map<std::string, WorkloadTable> grouped;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");

    std::string header_line;
    if (!std::getline(in, header_line)) throw DataError(path.string() + ": missing header row");
    const auto header = csv::split_line(header_line);
    const ColumnPlan plan = plan_columns(header, *schema, path);

    std::string line;
    std::size_t line_no = 1;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line == "\r") continue;
      const auto fields = csv::split_line(line);
      if (fields.size() != header.size())
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, found " +
                        std::to_string(fields.size()));
      Observation obs;
      obs.knobs.resize(schema->knob_names.size());
      obs.metrics.resize(schema->metric_names.size());
      std::string id;
      for (std::size_t c = 0; c < fields.size(); ++c) {
        if (plan.roles[c] == Role::ignored) continue;
        if (plan.roles[c] == Role::workload_id) {
          id = std::string(fields[c]);
          continue;
        }
        double value = 0.0;
        try {
          value = encode_cell(fields[c]);
        } catch (const DataError& e) {
          throw DataError(path.string() + ":" + std::to_string(line_no) + ": column '" +
                          std::string(header[c]) + "': " + e.what());
        }
        switch (plan.roles[c]) {
          case Role::latency: obs.latency = value; break;
          case Role::knob: obs.knobs[plan.slot[c]] = value; break;
          case Role::metric: obs.metrics[plan.slot[c]] = value; break;
          default: break;
        }
      }
      if (id.empty())
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": empty workload id");
      auto& table = grouped[id];
      table.workload_id = id;
      table.schema = schema;
      table.observations.push_back(std::move(obs));
      ++rows;
    }
    if (rows == 0) throw DataError(path.string() + ": no observations");
  }

  std::vector<WorkloadTable> out;
  out.reserve(grouped.size());
  for (auto& [id, table] : grouped) out.push_back(std::move(table));
  return out;
}

Corpus load_corpus(const CorpusFiles& files, const Schema& schema) {
  schema.validate();
  auto shared = std::make_shared<const Schema>(schema);
  Corpus corpus;
  corpus.schema = shared;
  corpus.offline = load_tables(files.offline, shared);
  corpus.online_b = load_tables(files.online_b, shared);
  corpus.online_c = load_tables(files.online_c, shared);
  return corpus;
}

Corpus load_corpus(const fs::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  return load_corpus(m.files, m.schema);
}

ConstantDrop drop_constant_columns(const Corpus& corpus) {
  const Schema& schema = *corpus.schema;
  std::vector<const Observation*> rows;
  for (const auto* group : {&corpus.offline, &corpus.online_b, &corpus.online_c})
    for (const auto& t : *group)
      for (const auto& o : t.observations) rows.push_back(&o);

  auto is_constant = [&](auto column_of) {
    if (rows.empty()) return false;
    const double first = column_of(*rows.front());
    return std::all_of(rows.begin(), rows.end(),
                       [&](const Observation* o) { return column_of(*o) == first; });
  };

  std::vector<std::size_t> keep_knobs, keep_metrics;
  std::vector<std::string> dropped;
  for (std::size_t j = 0; j < schema.knob_names.size(); ++j) {
    if (is_constant([j](const Observation& o) { return o.knobs[j]; }))
      dropped.push_back(schema.knob_names[j]);
    else
      keep_knobs.push_back(j);
  }
  for (std::size_t j = 0; j < schema.metric_names.size(); ++j) {
    if (is_constant([j](const Observation& o) { return o.metrics[j]; }))
      dropped.push_back(schema.metric_names[j]);
    else
      keep_metrics.push_back(j);
  }

  ConstantDrop result;
  std::sort(dropped.begin(), dropped.end());
  result.dropped = dropped;
  if (dropped.empty()) {
    result.corpus = corpus;
    return result;
  }

  Schema reduced = schema;
  reduced.knob_names.clear();
  reduced.metric_names.clear();
  for (auto j : keep_knobs) reduced.knob_names.push_back(schema.knob_names[j]);
  for (auto j : keep_metrics) reduced.metric_names.push_back(schema.metric_names[j]);
  auto shared = std::make_shared<const Schema>(std::move(reduced));

  auto project = [&](const std::vector<WorkloadTable>& tables) {
    std::vector<WorkloadTable> out;
    for (const auto& t : tables) {
      WorkloadTable p{t.workload_id, {}, shared};
      p.observations.reserve(t.size());
      for (const auto& o : t.observations) {
        Observation q;
        q.latency = o.latency;
        for (auto j : keep_knobs) q.knobs.push_back(o.knobs[j]);
        for (auto j : keep_metrics) q.metrics.push_back(o.metrics[j]);
        p.observations.push_back(std::move(q));
      }
      out.push_back(std::move(p));
    }
    return out;
  };
  result.corpus.schema = shared;
  result.corpus.offline = project(corpus.offline);
  result.corpus.online_b = project(corpus.online_b);
  result.corpus.online_c = project(corpus.online_c);
  return result;
}

MapValidationSplit split_map_validation(const WorkloadTable& table, std::size_t n_map) {
  if (n_map == 0)
    throw DataError("workload '" + table.workload_id + "': map part must have at least one row");
  if (table.size() < n_map + 1)
    throw DataError("workload '" + table.workload_id + "': needs " + std::to_string(n_map + 1) +
                    " rows, has " + std::to_string(table.size()));
  MapValidationSplit split;
  split.map_part = {table.workload_id, {}, table.schema};
  split.map_part.observations.assign(table.observations.begin(),
                                     table.observations.begin() + static_cast<std::ptrdiff_t>(n_map));
  split.validation_part = {table.workload_id, {table.observations[n_map]}, table.schema};
  split.ignored_rows = table.size() - n_map - 1;
  if (split.ignored_rows > 0)
    log::warn("workload '" + table.workload_id + "': ignoring " +
              std::to_string(split.ignored_rows) + " row(s) after the validation row");
  return split;
}

void write_workload_csv(const WorkloadTable& table, const fs::path& path) {
  const Schema& schema = *table.schema;
  auto out = open_for_write(path);
  std::vector<std::string> header{schema.workload_id_name};
  header.insert(header.end(), schema.knob_names.begin(), schema.knob_names.end());
  header.insert(header.end(), schema.metric_names.begin(), schema.metric_names.end());
  header.push_back(schema.latency_name);
  out << csv::join(header) << '\n';
  for (const auto& o : table.observations) {
    out << table.workload_id;
    for (double v : o.knobs) out << ',' << csv::format_double(v);
    for (double v : o.metrics) out << ',' << csv::format_double(v);
    out << ',' << csv::format_double(o.latency) << '\n';
  }
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

void write_name_list(std::span<const std::string> names, const fs::path& path) {
  auto out = open_for_write(path);
  for (const auto& n : names) out << n << '\n';
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

std::vector<std::string> read_name_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

}  // namespace knobtune
