#ifndef DANCE_NN_CHECKPOINT_HPP
#define DANCE_NN_CHECKPOINT_HPP

#include <map>
#include <string>

#include "dance/nn/graph.hpp"

namespace dance::nn {

// Versioned binary container: named f64 tensors plus named string blobs
// (metadata, rng state). Round trips are byte-stable: loading and saving
// again reproduces the file exactly.
class TensorStore {
 public:
  void put(const std::string& name, const Mat& tensor);
  const Mat& get(const std::string& name) const;
  bool has(const std::string& name) const { return tensors_.count(name) > 0; }

  void put_string(const std::string& name, const std::string& text);
  const std::string& get_string(const std::string& name) const;
  bool has_string(const std::string& name) const { return strings_.count(name) > 0; }

  void save(const std::string& path) const;
  static TensorStore load(const std::string& path);

 private:
  std::map<std::string, Mat> tensors_;
  std::map<std::string, std::string> strings_;
};

}  // namespace dance::nn

#endif
