#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nmdps/dataset.hpp"

namespace nmdps::tools {

struct ConvertResult {
  std::vector<Event> events;
  std::vector<std::string> skipped;  // "<event id>: <reason>"
  LoadStats stats;
};

// Weibo dump: a label file of lines "eid:<id> label:<0|1> <post ids...>" and a
// directory of <id>.json arrays of posts {"mid", "parent", "t", "text"}.
ConvertResult convert_weibo(const std::filesystem::path& labels, const std::filesystem::path& dir);

// Twitter tree dump: a label file of "<label>:<id>" lines (label non-rumor,
// false, true, unverified, 0 or 1) and tree/<id>.txt files of edges
// "['uid', 'tweet', 'delay_min']->['uid', 'tweet', 'delay_min']". Nodes are
// identified by uid/tweet; only non-rumor maps to label 0.
ConvertResult convert_twitter_tree(const std::filesystem::path& labels,
                                   const std::filesystem::path& dir);

}  // namespace nmdps::tools
