#include "convert.hpp"

#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nmdps/error.hpp"

namespace nmdps::tools {

namespace {

std::ifstream open(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  return in;
}

void add_event(ConvertResult& r, const std::string& id, Label label, std::vector<Post> posts) {
  try {
    r.events.push_back(make_event(id, label, std::move(posts), &r.stats));
  } catch (const ValidationError& e) {
    r.skipped.push_back(e.what());  // already names the event
  }
}

std::string json_id(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error("id is neither a string nor an integer");
}

}  // namespace

ConvertResult convert_weibo(const std::filesystem::path& labels, const std::filesystem::path& dir) {
  ConvertResult r;
  std::ifstream in = open(labels);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string eid_tok, label_tok;
    ls >> eid_tok >> label_tok;
    if (eid_tok.rfind("eid:", 0) != 0 || label_tok.rfind("label:", 0) != 0) {
      throw ParseError("expected 'eid:<id> label:<0|1> ...'", lineno);
    }
    const std::string id = eid_tok.substr(4);
    const std::string lab = label_tok.substr(6);
    if (lab != "0" && lab != "1") throw ParseError("label must be 0 or 1", lineno);

    const auto path = dir / (id + ".json");
    std::ifstream ev(path);
    if (!ev) {
      r.skipped.push_back(id + ": missing " + path.filename().string());
      continue;
    }
    std::vector<Post> posts;
    try {
      const auto arr = nlohmann::json::parse(ev);
      if (!arr.is_array()) throw Error("not a JSON array");
      for (const auto& p : arr) {
        Post post;
        post.id = json_id(p.at("mid"));
        if (p.contains("parent") && !p["parent"].is_null()) post.parent_id = json_id(p["parent"]);
        post.timestamp = p.at("t").get<double>();
        if (p.contains("text") && p["text"].is_string()) post.text = p["text"].get<std::string>();
        posts.push_back(std::move(post));
      }
    } catch (const std::exception& e) {
      r.skipped.push_back(id + ": " + e.what());
      continue;
    }
    add_event(r, id, lab == "1" ? Label::rumor : Label::non_rumor, std::move(posts));
  }
  return r;
}

ConvertResult convert_twitter_tree(const std::filesystem::path& labels,
                                   const std::filesystem::path& dir) {
  ConvertResult r;
  std::ifstream in = open(labels);
  std::string line;
  std::size_t lineno = 0;
  static const std::regex node(R"(\[\s*'([^']*)'\s*,\s*'([^']*)'\s*,\s*'([^']*)'\s*\])");
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ParseError("expected '<label>:<event id>'", lineno);
    const std::string lab = line.substr(0, colon);
    const std::string id = line.substr(colon + 1);
    Label label;
    if (lab == "non-rumor" || lab == "0") label = Label::non_rumor;
    else if (lab == "false" || lab == "true" || lab == "unverified" || lab == "1") label = Label::rumor;
    else throw ParseError("unknown label '" + lab + "'", lineno);

    const auto path = dir / (id + ".txt");
    std::ifstream tree(path);
    if (!tree) {
      r.skipped.push_back(id + ": missing " + path.filename().string());
      continue;
    }
    std::vector<Post> posts;
    std::set<std::string> seen;
    std::string edge;
    bool bad = false;
    while (std::getline(tree, edge)) {
      auto begin = std::sregex_iterator(edge.begin(), edge.end(), node);
      std::vector<std::smatch> m(begin, std::sregex_iterator());
      if (m.size() != 2) {
        if (edge.find_first_not_of(" \t\r") == std::string::npos) continue;
        r.skipped.push_back(id + ": malformed edge '" + edge + "'");
        bad = true;
        break;
      }
      const std::string child = m[1][1].str() + "/" + m[1][2].str();
      if (!seen.insert(child).second) continue;  // the dumps repeat edges
      Post p;
      p.id = child;
      if (m[0][1].str() != "ROOT") {
        p.parent_id = m[0][1].str() + "/" + m[0][2].str();
        p.kind = PostKind::repost;
      }
      try {
        p.timestamp = std::stod(m[1][3].str()) * 60.0;
      } catch (const std::exception&) {
        r.skipped.push_back(id + ": bad delay '" + m[1][3].str() + "'");
        bad = true;
        break;
      }
      posts.push_back(std::move(p));
    }
    if (!bad) add_event(r, id, label, std::move(posts));
  }
  return r;
}

}  // namespace nmdps::tools
