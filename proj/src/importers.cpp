#include <algorithm>
#include <array>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <map>
#include <set>
#include <sstream>

#include "ucca/io.hpp"

namespace ucca {

namespace {

namespace pt = boost::property_tree;

struct RawEdge {
  std::string child;
  std::string type;
  bool remote = false;
};

struct RawUnit {
  std::string type;
  bool implicit = false;
  std::vector<RawEdge> edges;
};

// Shared by both importers: units over positioned terminals.
struct RawPassage {
  std::string id;
  std::vector<Terminal> terminals;
  std::map<std::string, int> terminal_of;  // raw terminal id -> position
  std::vector<std::string> order;           // unit ids in document order
  std::map<std::string, RawUnit> units;
};

Passage build_passage(const RawPassage& raw, const std::string& language, ImportReport* report, const std::string& where) {
  auto warn = [&](const std::string& msg) {
    if (report) report->warnings.push_back(where + ": " + msg);
  };
  std::set<std::string> dropped;
  for (const auto& id : raw.order) {
    const auto& u = raw.units.at(id);
    if (u.implicit) {
      dropped.insert(id);
      if (report) ++report->implicit_units;
      warn("implicit unit " + id + " dropped");
    }
  }

  // A unit with one terminal and nothing else is that terminal.
  std::map<std::string, std::string> alias;
  for (const auto& id : raw.order) {
    const auto& u = raw.units.at(id);
    int terminals = 0, others = 0;
    std::string only;
    for (const auto& e : u.edges) {
      if (e.type == "Terminal") {
        ++terminals;
        only = e.child;
      } else if (!e.remote) {
        ++others;
      }
    }
    if (terminals == 1 && others == 0) {
      auto t = raw.terminal_of.find(only);
      if (t == raw.terminal_of.end()) throw Error(where + ": unit " + id + " points to unknown terminal " + only);
      alias[id] = terminal_id(t->second);
    }
  }
  auto resolve = [&](const std::string& id) -> std::string {
    if (auto a = alias.find(id); a != alias.end()) return a->second;
    if (auto t = raw.terminal_of.find(id); t != raw.terminal_of.end()) return terminal_id(t->second);
    return id;
  };

  std::set<std::string> has_parent;
  for (const auto& id : raw.order) {
    for (const auto& e : raw.units.at(id).edges) {
      if (!e.remote && e.type != "Terminal") has_parent.insert(e.child);
    }
  }
  std::string root;
  for (const auto& id : raw.order) {
    if (!has_parent.count(id) && !dropped.count(id)) {
      root = id;
      break;
    }
  }
  if (root.empty()) throw Error(where + ": no root unit");

  UccaGraph g;
  g.root = root;
  for (const auto& id : raw.order) {
    if (dropped.count(id) || (alias.count(id) && id != root)) continue;
    g.nodes.push_back(id);
  }
  for (std::size_t k = 0; k < raw.terminals.size(); ++k) g.nodes.push_back(terminal_id(static_cast<int>(k) + 1));
  for (const auto& id : raw.order) {
    if (dropped.count(id) || (alias.count(id) && id != root)) continue;
    const auto& u = raw.units.at(id);
    for (const auto& e : u.edges) {
      if (dropped.count(e.child)) continue;
      if (e.type == "Terminal") {
        if (alias.count(id) && id != root) continue;
        auto t = raw.terminal_of.find(e.child);
        if (t == raw.terminal_of.end()) throw Error(where + ": unit " + id + " points to unknown terminal " + e.child);
        g.edges.push_back({id, terminal_id(t->second), u.type == "PNCT" ? Category::U : Category::C, false});
        continue;
      }
      auto cat = try_parse_category(e.type);
      if (!cat) throw Error(where + ": unknown category code '" + e.type + "'");
      if (!raw.units.count(e.child) && !raw.terminal_of.count(e.child)) {
        throw Error(where + ": edge to unknown unit " + e.child);
      }
      g.edges.push_back({id, resolve(e.child), *cat, e.remote});
    }
  }
  // Units left without terminals once implicit children are gone.
  for (bool changed = true; changed;) {
    changed = false;
    const auto yields = all_yields(g);
    for (const auto& [node, y] : yields) {
      if (!y.empty() || node == g.root || terminal_position(node)) continue;
      warn("unit " + node + " has no terminals and is dropped");
      g.nodes.erase(std::remove(g.nodes.begin(), g.nodes.end(), node), g.nodes.end());
      g.edges.erase(std::remove_if(g.edges.begin(), g.edges.end(),
                                   [&](const Edge& e) { return e.parent == node || e.child == node; }),
                    g.edges.end());
      changed = true;
      break;
    }
  }

  Passage p;
  p.id = raw.id;
  p.language = language;
  p.terminals = raw.terminals;
  p.graph = std::move(g);
  if (report) ++report->passages;
  return p;
}

int id_suffix(const std::string& id) {
  const auto dot = id.find('.');
  try {
    return std::stoi(id.substr(dot == std::string::npos ? 0 : dot + 1));
  } catch (const std::exception&) {
    throw Error("unexpected node id '" + id + "'");
  }
}

bool truthy(const std::string& v) { return v == "True" || v == "true" || v == "1"; }

Passage passage_from_xml(const fs::path& path, const std::string& language, ImportReport* report) {
  pt::ptree tree;
  try {
    pt::read_xml(path.string(), tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error("malformed XML in " + path.string() + ": " + e.what());
  }
  const auto root_it = tree.find("root");
  if (root_it == tree.not_found()) throw Error(path.string() + ": no <root> element");
  const pt::ptree& root = root_it->second;
  RawPassage raw;
  raw.id = root.get<std::string>("<xmlattr>.passageID", path.stem().string());
  std::vector<std::pair<int, std::pair<std::string, std::string>>> words;
  for (const auto& [tag, layer] : root) {
    if (tag != "layer") continue;
    const auto layer_id = layer.get<std::string>("<xmlattr>.layerID", "");
    for (const auto& [ntag, node] : layer) {
      if (ntag != "node") continue;
      const auto id = node.get<std::string>("<xmlattr>.ID", "");
      const auto type = node.get<std::string>("<xmlattr>.type", "");
      if (layer_id == "0") {
        words.push_back({id_suffix(id), {id, node.get<std::string>("attributes.<xmlattr>.text", "")}});
        continue;
      }
      if (layer_id != "1") continue;
      if (type == "LKG") {
        if (report) ++report->linkage_nodes;
        continue;
      }
      RawUnit u;
      u.type = type;
      u.implicit = truthy(node.get<std::string>("attributes.<xmlattr>.implicit", ""));
      for (const auto& [etag, edge] : node) {
        if (etag != "edge") continue;
        RawEdge e;
        e.child = edge.get<std::string>("<xmlattr>.toID", "");
        e.type = edge.get<std::string>("<xmlattr>.type", "");
        e.remote = truthy(edge.get<std::string>("attributes.<xmlattr>.remote", ""));
        if (e.type == "LA" || e.type == "LR") continue;
        u.edges.push_back(std::move(e));
      }
      raw.order.push_back(id);
      raw.units.emplace(id, std::move(u));
    }
  }
  std::sort(words.begin(), words.end());
  for (std::size_t k = 0; k < words.size(); ++k) {
    const int position = static_cast<int>(k) + 1;
    raw.terminal_of[words[k].second.first] = position;
    raw.terminals.push_back({position, words[k].second.second, "", "", "", "O"});
  }
  if (raw.terminals.empty()) throw Error(path.string() + ": no terminals");
  return build_passage(raw, language, report, path.string());
}

}  // namespace

std::vector<Passage> import_ucca_xml(const fs::path& path, const std::string& language, ImportReport* report) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".xml") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<Passage> out;
  for (const auto& f : files) out.push_back(passage_from_xml(f, language, report));
  return out;
}

std::vector<Passage> import_mrp(const fs::path& path, const std::string& language, ImportReport* report) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<Passage> out;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error("malformed JSON in " + where + ": " + e.what());
    }
    try {
      if (j.value("framework", "ucca") != "ucca") continue;
      const std::string input = j.at("input").get<std::string>();
      RawPassage raw;
      raw.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      // Token anchors of leaf nodes, ordered by offset.
      std::map<int, std::pair<int, std::vector<std::string>>> anchors;  // from -> (to, owning nodes)
      std::map<std::string, std::vector<int>> node_anchors;
      for (const auto& n : j.at("nodes")) {
        const std::string id = n.at("id").dump();
        raw.order.push_back(id);
        RawUnit u;
        if (n.contains("properties")) {
          const auto& props = n.at("properties");
          for (std::size_t k = 0; k < props.size(); ++k) {
            if (props[k] == "implicit" && n.contains("values") && n.at("values")[k] == true) u.implicit = true;
          }
        }
        raw.units.emplace(id, std::move(u));
        if (!n.contains("anchors")) continue;
        for (const auto& a : n.at("anchors")) {
          const int from = a.at("from").get<int>();
          anchors[from].first = a.at("to").get<int>();
          anchors[from].second.push_back(id);
          node_anchors[id].push_back(from);
        }
      }
      std::map<int, std::string> token_id;
      for (const auto& [from, info] : anchors) {
        const int position = static_cast<int>(raw.terminals.size()) + 1;
        const std::string tid = "tok" + std::to_string(from);
        token_id[from] = tid;
        raw.terminal_of[tid] = position;
        const auto to = std::min<std::size_t>(static_cast<std::size_t>(info.first), input.size());
        raw.terminals.push_back({position, input.substr(static_cast<std::size_t>(from), to - static_cast<std::size_t>(from)), "", "", "", "O"});
      }
      for (const auto& [id, froms] : node_anchors) {
        for (int from : froms) raw.units.at(id).edges.push_back({token_id.at(from), "Terminal", false});
      }
      for (const auto& e : j.value("edges", Json::array())) {
        RawEdge edge;
        const std::string source = e.at("source").dump();
        edge.child = e.at("target").dump();
        edge.type = e.value("label", "");
        if (e.contains("attributes")) {
          const auto& attrs = e.at("attributes");
          for (std::size_t k = 0; k < attrs.size(); ++k) {
            if (attrs[k] == "remote" && e.contains("values") && e.at("values")[k] == true) edge.remote = true;
          }
        }
        auto it = raw.units.find(source);
        if (it == raw.units.end()) throw Error(where + ": edge from unknown node " + source);
        it->second.edges.push_back(std::move(edge));
      }
      // Leaf units without anchors stand for implicit material.
      for (auto& [id, u] : raw.units) {
        if (u.edges.empty() && !node_anchors.count(id)) u.implicit = true;
      }
      if (raw.terminals.empty()) throw Error(where + ": no anchored tokens");
      out.push_back(build_passage(raw, j.value("language", language), report, where));
    } catch (const Json::exception& e) {
      throw Error(where + ": schema violation: " + e.what());
    }
  }
  return out;
}

void apply_conllu(std::vector<Passage>& passages, const fs::path& path) {
  struct Sentence {
    std::string id;
    std::vector<std::array<std::string, 4>> tokens;  // form, upos, deprel, misc
  };
  std::vector<Sentence> sentences;
  std::istringstream in(read_file(path));
  std::string line;
  Sentence current;
  auto flush = [&] {
    if (!current.tokens.empty()) sentences.push_back(std::move(current));
    current = Sentence{};
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      const std::string key = "# sent_id = ";
      if (line.rfind(key, 0) == 0) current.id = line.substr(key.size());
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string col;
    while (std::getline(ls, col, '\t')) cols.push_back(col);
    if (cols.size() != 10) throw Error(path.string() + ": CoNLL-U lines need 10 tab-separated columns");
    if (cols[0].find_first_of("-.") != std::string::npos) continue;
    current.tokens.push_back({cols[1], cols[3], cols[7], cols[9]});
  }
  flush();

  std::map<std::string, const Sentence*> by_id;
  for (const auto& s : sentences) {
    if (!s.id.empty()) by_id[s.id] = &s;
  }
  for (std::size_t k = 0; k < passages.size(); ++k) {
    auto& p = passages[k];
    const Sentence* s = nullptr;
    if (auto it = by_id.find(p.id); it != by_id.end()) {
      s = it->second;
    } else if (by_id.empty() && k < sentences.size()) {
      s = &sentences[k];
    }
    if (!s) throw Error(path.string() + ": no sentence for passage '" + p.id + "'");
    if (s->tokens.size() != p.terminals.size()) {
      throw Error(path.string() + ": passage '" + p.id + "' has " + std::to_string(p.terminals.size()) +
                  " tokens, the sentence " + std::to_string(s->tokens.size()));
    }
    for (std::size_t t = 0; t < s->tokens.size(); ++t) {
      auto& term = p.terminals[t];
      const auto& [form, upos, deprel, misc] = s->tokens[t];
      term.pos_tag = upos;
      term.dep_label = deprel;
      term.entity_type.clear();
      term.entity_iob = "O";
      std::stringstream ms(misc);
      std::string item;
      while (std::getline(ms, item, '|')) {
        if (item.rfind("NER=", 0) != 0) continue;
        const std::string value = item.substr(4);
        if (value.size() > 2 && (value[0] == 'B' || value[0] == 'I') && value[1] == '-') {
          term.entity_iob = value.substr(0, 1);
          term.entity_type = value.substr(2);
        }
      }
    }
  }
}

}  // namespace ucca
