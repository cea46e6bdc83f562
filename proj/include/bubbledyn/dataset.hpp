#pragma once

#include <string>
#include <vector>

#include "bubbledyn/depth_map.hpp"

namespace bubbledyn {

// On-disk dataset: a directory with manifest.json plus one TensorFile per
// field. The manifest records task, object names, transition count, and the
// field name -> (filename, dims) table.
struct Dataset {
  std::string task;
  std::vector<std::string> objects;
  std::vector<Transition> transitions;

  size_t size() const { return transitions.size(); }
};

void save_dataset(const Dataset& d, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace bubbledyn
