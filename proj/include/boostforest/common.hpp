#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace boostforest {

enum class Task { regression, binary, multiclass };

// Family of regression function fitted at each tree node.
enum class NodeKind { ridge, elm, svr };

// Base learner selectable at the ensemble level.
enum class BaseKind { boosttree_ridge, boosttree_elm, boosttree_svr, cart };

// Invalid user-supplied configuration (flags, pools, hyper-parameters).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (CSV parsing, shape mismatches).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable, corrupt, or incompatible model file.
struct ModelIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Logistic function, safe against overflow for large |x|.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string to_string(Task t);
Task task_from_string(const std::string& s);

std::string to_string(BaseKind k);
BaseKind base_kind_from_string(const std::string& s);

// Node-model family implied by the base learner; cart has none.
NodeKind node_kind_of(BaseKind k);

}  // namespace boostforest
