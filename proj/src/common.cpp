#include "boostforest/common.hpp"

namespace boostforest {

std::string to_string(Task t) {
  switch (t) {
    case Task::regression:
      return "reg";
    case Task::binary:
      return "binary";
    case Task::multiclass:
      return "multiclass";
  }
  return "reg";
}

Task task_from_string(const std::string& s) {
  if (s == "reg") return Task::regression;
  if (s == "binary") return Task::binary;
  if (s == "multiclass") return Task::multiclass;
  throw ConfigError("unknown task '" + s +
                    "' (expected reg, binary, or multiclass)");
}

std::string to_string(BaseKind k) {
  switch (k) {
    case BaseKind::boosttree_ridge:
      return "boosttree-ridge";
    case BaseKind::boosttree_elm:
      return "boosttree-elm";
    case BaseKind::boosttree_svr:
      return "boosttree-svr";
    case BaseKind::cart:
      return "cart";
  }
  return "boosttree-ridge";
}

BaseKind base_kind_from_string(const std::string& s) {
  if (s == "boosttree-ridge") return BaseKind::boosttree_ridge;
  if (s == "boosttree-elm") return BaseKind::boosttree_elm;
  if (s == "boosttree-svr") return BaseKind::boosttree_svr;
  if (s == "cart") return BaseKind::cart;
  throw ConfigError("unknown base learner '" + s +
                    "' (expected boosttree-ridge, boosttree-elm, "
                    "boosttree-svr, or cart)");
}

NodeKind node_kind_of(BaseKind k) {
  switch (k) {
    case BaseKind::boosttree_elm:
      return NodeKind::elm;
    case BaseKind::boosttree_svr:
      return NodeKind::svr;
    default:
      return NodeKind::ridge;
  }
}

}  // namespace boostforest
