#include "ucca/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace ucca {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

std::string dump_json(const Json& j) { return j.dump(2, ' ', false, Json::error_handler_t::strict) + "\n"; }

namespace {

Json parse_json(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error("malformed JSON in " + where + ": " + e.what());
  }
}

template <typename T>
T field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw Error(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error(where + ": field '" + std::string(key) + "' has the wrong type");
  }
}

template <typename T>
T optional_field(const Json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return field<T>(j, key, where);
}

void check_format(const Json& j, const std::string& where) {
  if (j.contains("format") && j.at("format") != kFormatVersion) {
    throw Error(where + ": unsupported format " + j.at("format").dump());
  }
}

Json terminal_to_json(const Terminal& t) {
  return {{"position", t.position}, {"text", t.surface}, {"pos", t.pos_tag},
          {"dep", t.dep_label},     {"entity", t.entity_type}, {"iob", t.entity_iob}};
}

Terminal terminal_from_json(const Json& j, const std::string& where) {
  Terminal t;
  t.position = field<int>(j, "position", where);
  t.surface = field<std::string>(j, "text", where);
  t.pos_tag = optional_field<std::string>(j, "pos", "", where);
  t.dep_label = optional_field<std::string>(j, "dep", "", where);
  t.entity_type = optional_field<std::string>(j, "entity", "", where);
  t.entity_iob = optional_field<std::string>(j, "iob", "O", where);
  return t;
}

std::vector<Terminal> terminals_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw Error(where + ": tokens must be a list");
  std::vector<Terminal> out;
  for (const auto& t : j) out.push_back(terminal_from_json(t, where));
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k].position != static_cast<int>(k) + 1) throw Error(where + ": token positions must run 1..n in order");
  }
  return out;
}

Json terminals_to_json(const std::vector<Terminal>& ts) {
  Json out = Json::array();
  for (const auto& t : ts) out.push_back(terminal_to_json(t));
  return out;
}

Category category_from(const std::string& code, const std::string& where) {
  auto c = try_parse_category(code);
  if (!c) throw Error(where + ": unknown category code '" + code + "'");
  return *c;
}

std::string passage_where(const Json& j, const std::string& fallback) {
  if (j.is_object() && j.contains("id") && j.at("id").is_string()) return "passage '" + j.at("id").get<std::string>() + "'";
  return fallback;
}

}  // namespace

Json passage_to_json(const Passage& p) {
  Json j = {{"format", kFormatVersion}, {"id", p.id}, {"language", p.language}, {"tokens", terminals_to_json(p.terminals)}};
  if (p.graph) {
    Json edges = Json::array();
    for (const auto& e : p.graph->edges) {
      edges.push_back({{"parent", e.parent}, {"child", e.child}, {"category", to_string(e.category)}, {"remote", e.remote}});
    }
    j["graph"] = {{"root", p.graph->root}, {"nodes", p.graph->nodes}, {"edges", edges}};
  }
  return j;
}

Passage passage_from_json(const Json& j) {
  const std::string where = passage_where(j, "passage");
  if (!j.is_object()) throw Error("passage must be a JSON object");
  check_format(j, where);
  Passage p;
  p.id = field<std::string>(j, "id", where);
  p.language = optional_field<std::string>(j, "language", "", where);
  if (!j.contains("tokens")) throw Error(where + ": missing field 'tokens'");
  p.terminals = terminals_from_json(j.at("tokens"), where);
  if (j.contains("graph") && !j.at("graph").is_null()) {
    const Json& g = j.at("graph");
    UccaGraph graph;
    graph.root = field<std::string>(g, "root", where);
    graph.nodes = field<std::vector<std::string>>(g, "nodes", where);
    const Json edges = g.contains("edges") ? g.at("edges") : Json::array();
    if (!edges.is_array()) throw Error(where + ": edges must be a list");
    for (const auto& e : edges) {
      graph.edges.push_back({field<std::string>(e, "parent", where), field<std::string>(e, "child", where),
                             category_from(field<std::string>(e, "category", where), where),
                             optional_field<bool>(e, "remote", false, where)});
    }
    p.graph = std::move(graph);
  }
  return p;
}

void save_passage(const Passage& p, const fs::path& path) { write_file(path, dump_json(passage_to_json(p))); }

Passage load_passage(const fs::path& path) { return passage_from_json(parse_json(read_file(path), path.string())); }

namespace {

std::vector<fs::path> json_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void admit(Corpus& corpus, const Json& j, const std::string& where, const LoadOptions& options) {
  Passage p;
  try {
    p = passage_from_json(j);
    if (!p.graph && !options.allow_unannotated) throw Error(passage_where(j, where) + ": no graph");
    if (p.graph) {
      const auto report = validate_graph(*p.graph, p.size());
      if (!report.ok()) throw Error(passage_where(j, where) + " is invalid: " + report.summary());
    }
  } catch (const Error& e) {
    if (!options.lenient) throw;
    corpus.warnings.push_back(e.what());
    ++corpus.skipped;
    return;
  }
  if (options.language && p.language != *options.language) return;
  corpus.passages.push_back(std::move(p));
}

void admit_document(Corpus& corpus, const Json& doc, const std::string& where, const LoadOptions& options) {
  if (doc.is_object() && doc.contains("passages")) {
    check_format(doc, where);
    if (!doc.at("passages").is_array()) throw Error(where + ": passages must be a list");
    for (const auto& j : doc.at("passages")) admit(corpus, j, where, options);
  } else {
    admit(corpus, doc, where, options);
  }
}

}  // namespace

Corpus load_corpus(const fs::path& path, const LoadOptions& options) {
  if (!fs::exists(path)) throw Error("no such corpus: " + path.string());
  Corpus corpus;
  if (fs::is_directory(path)) {
    const auto files = json_files(path);
    if (files.empty()) corpus.warnings.push_back("corpus " + path.string() + " is empty");
    for (const auto& f : files) admit_document(corpus, parse_json(read_file(f), f.string()), f.string(), options);
  } else {
    admit_document(corpus, parse_json(read_file(path), path.string()), path.string(), options);
  }
  std::set<std::string> ids;
  for (const auto& p : corpus.passages) {
    if (!ids.insert(p.id).second) {
      const std::string msg = "duplicate passage id '" + p.id + "' in " + path.string();
      if (!options.lenient) throw Error(msg);
      corpus.warnings.push_back(msg);
    }
  }
  return corpus;
}

void save_corpus(const std::vector<Passage>& passages, const fs::path& path) {
  if (path.extension() == ".json") {
    Json bundle = {{"format", kFormatVersion}, {"passages", Json::array()}};
    for (const auto& p : passages) bundle["passages"].push_back(passage_to_json(p));
    write_file(path, dump_json(bundle));
    return;
  }
  fs::create_directories(path);
  for (const auto& p : passages) {
    if (p.id.empty() || p.id.find('/') != std::string::npos) throw Error("passage id '" + p.id + "' is not a file name");
    save_passage(p, path / (p.id + ".json"));
  }
}

namespace {

void add_stats(SplitStats& s, const Passage& p) {
  ++s.passages;
  s.tokens += p.size();
  ++s.languages[p.language];
  if (!p.graph) return;
  s.nodes += static_cast<long>(p.graph->nodes.size());
  bool remote = false;
  for (const auto& e : p.graph->edges) {
    if (e.remote) {
      ++s.remote_edges;
      remote = true;
    } else {
      ++s.primary_edges;
    }
  }
  if (remote) ++s.with_remotes;
  const auto yields = all_yields(*p.graph);
  if (std::any_of(yields.begin(), yields.end(), [](const auto& kv) { return !is_contiguous(kv.second); })) {
    ++s.discontinuous;
  }
}

}  // namespace

CorpusStats corpus_stats(const fs::path& path, const LoadOptions& options) {
  CorpusStats stats;
  const std::vector<std::pair<std::string, std::string>> splits = {
      {"train", "train"}, {"validation", "validation"}, {"dev", "validation"}, {"test", "test"}};
  bool split_layout = false;
  if (fs::is_directory(path)) {
    for (const auto& [dir, name] : splits) {
      if (!fs::is_directory(path / dir)) continue;
      split_layout = true;
      auto& s = stats.splits[name];
      for (const auto& p : load_corpus(path / dir, options).passages) add_stats(s, p);
    }
  }
  if (!split_layout) {
    auto& s = stats.splits["all"];
    for (const auto& p : load_corpus(path, options).passages) add_stats(s, p);
  }
  return stats;
}

Json stats_to_json(const CorpusStats& stats) {
  Json out = Json::object();
  for (const auto& [name, s] : stats.splits) {
    out[name] = {{"passages", s.passages},         {"tokens", s.tokens},           {"nodes", s.nodes},
                 {"primary_edges", s.primary_edges}, {"remote_edges", s.remote_edges}, {"with_remotes", s.with_remotes},
                 {"discontinuous", s.discontinuous}, {"languages", s.languages}};
  }
  return out;
}

std::string format_stats_table(const CorpusStats& stats) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "split" << std::right << std::setw(10) << "passages" << std::setw(10)
      << "tokens" << std::setw(10) << "primary" << std::setw(10) << "remote" << std::setw(14) << "discontinuous"
      << "\n";
  std::vector<std::string> order = {"train", "validation", "test", "all"};
  for (const auto& name : order) {
    auto it = stats.splits.find(name);
    if (it == stats.splits.end()) continue;
    const auto& s = it->second;
    out << std::left << std::setw(12) << name << std::right << std::setw(10) << s.passages << std::setw(10)
        << s.tokens << std::setw(10) << s.primary_edges << std::setw(10) << s.remote_edges << std::setw(14)
        << s.discontinuous << "\n";
  }
  return out.str();
}

ExternalVectors load_external_vectors(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  int dim = -1;
  int line_no = 0;
  std::map<std::string, std::map<int, std::vector<double>>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (dim < 0) {
      std::string key;
      if (!(ls >> key >> dim) || key != "dim" || dim < 1) throw Error(where + ": expected a 'dim <k>' header");
      continue;
    }
    std::string id;
    int position = 0;
    if (!(ls >> id >> position) || position < 1) throw Error(where + ": expected '<passage> <position> values'");
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (!ls.eof()) throw Error(where + ": unreadable value");
    if (static_cast<int>(values.size()) != dim) {
      throw Error(where + ": " + std::to_string(values.size()) + " values, header declares " + std::to_string(dim));
    }
    if (!rows[id].emplace(position, std::move(values)).second) throw Error(where + ": repeated position");
  }
  if (dim < 0) throw Error(path.string() + ": missing 'dim <k>' header");
  ExternalVectors out(dim);
  for (auto& [id, by_position] : rows) {
    Matrix m(static_cast<Eigen::Index>(by_position.size()), dim);
    int expected = 1;
    for (const auto& [position, values] : by_position) {
      if (position != expected) throw Error(path.string() + ": passage '" + id + "' lacks position " + std::to_string(expected));
      for (int c = 0; c < dim; ++c) m(position - 1, c) = values[static_cast<std::size_t>(c)];
      ++expected;
    }
    out.set(id, std::move(m));
  }
  return out;
}

void save_external_vectors(const ExternalVectors& vectors, const fs::path& path) {
  std::ostringstream out;
  out << std::setprecision(17) << "dim " << vectors.dim() << "\n";
  for (const auto& [id, m] : vectors.all()) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      out << id << ' ' << r + 1;
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << ' ' << m(r, c);
      out << "\n";
    }
  }
  write_file(path, out.str());
}

Json tree_entry_to_json(const TreeEntry& e) {
  Json spans = Json::array();
  for (const auto& s : e.conversion.tree.spans) spans.push_back(Json::array({s.i, s.j, s.label}));
  Json remotes = Json::array();
  for (const auto& r : e.conversion.remotes) {
    remotes.push_back({{"parent", r.parent_yield},
                       {"child", r.child_yield},
                       {"category", to_string(r.category)},
                       {"parent_depth", r.parent_depth},
                       {"child_depth", r.child_depth}});
  }
  Json lifts = Json::array();
  for (const auto& d : e.conversion.discontinuities) {
    lifts.push_back({{"moved", d.moved_child_yield}, {"parent", d.original_parent_yield}, {"tag", d.augmentation_tag}});
  }
  return {{"id", e.id},
          {"language", e.language},
          {"tokens", terminals_to_json(e.terminals)},
          {"tree", {{"n", e.conversion.tree.n}, {"spans", spans}}},
          {"remotes", remotes},
          {"discontinuities", lifts}};
}

TreeEntry tree_entry_from_json(const Json& j) {
  const std::string where = passage_where(j, "tree entry");
  TreeEntry e;
  e.id = field<std::string>(j, "id", where);
  e.language = optional_field<std::string>(j, "language", "", where);
  e.terminals = terminals_from_json(j.contains("tokens") ? j.at("tokens") : Json::array(), where);
  const Json tree = field<Json>(j, "tree", where);
  e.conversion.tree.n = field<int>(tree, "n", where);
  for (const auto& s : field<Json>(tree, "spans", where)) {
    if (!s.is_array() || s.size() != 3) throw Error(where + ": spans are [i, j, label] triples");
    e.conversion.tree.spans.push_back({s[0].get<int>(), s[1].get<int>(), s[2].get<std::string>()});
  }
  for (const auto& r : optional_field<Json>(j, "remotes", Json::array(), where)) {
    e.conversion.remotes.push_back({field<std::vector<int>>(r, "parent", where), field<std::vector<int>>(r, "child", where),
                                    category_from(field<std::string>(r, "category", where), where),
                                    optional_field<int>(r, "parent_depth", 0, where),
                                    optional_field<int>(r, "child_depth", 0, where)});
  }
  for (const auto& d : optional_field<Json>(j, "discontinuities", Json::array(), where)) {
    e.conversion.discontinuities.push_back({field<std::vector<int>>(d, "moved", where),
                                            field<std::vector<int>>(d, "parent", where),
                                            field<std::string>(d, "tag", where)});
  }
  if (!e.terminals.empty() && static_cast<int>(e.terminals.size()) != e.conversion.tree.n) {
    throw Error(where + ": tree length differs from the token count");
  }
  return e;
}

void save_tree_file(const std::vector<TreeEntry>& entries, const fs::path& path) {
  Json doc = {{"format", kFormatVersion}, {"trees", Json::array()}};
  for (const auto& e : entries) doc["trees"].push_back(tree_entry_to_json(e));
  write_file(path, dump_json(doc));
}

std::vector<TreeEntry> load_tree_file(const fs::path& path) {
  const Json doc = parse_json(read_file(path), path.string());
  check_format(doc, path.string());
  std::vector<TreeEntry> out;
  for (const auto& j : field<Json>(doc, "trees", path.string())) out.push_back(tree_entry_from_json(j));
  return out;
}

}  // namespace ucca
