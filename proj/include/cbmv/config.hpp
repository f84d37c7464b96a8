#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbmv/confidence.hpp"
#include "cbmv/forest.hpp"
#include "cbmv/matchers.hpp"
#include "cbmv/optimize.hpp"
#include "cbmv/postprocess.hpp"

namespace cbmv {

/// Every tunable of the pipeline in one place.
///
/// Serialized as flat `section.key=value` lines; `#` starts a comment.
/// Unknown keys are rejected.
struct PipelineConfig {
  int d_max = 16;
  std::uint64_t seed = 0;
  MatcherParams matchers;
  ConfidenceParams confidence;
  ForestParams forest;
  bool augment_swapped = false;
  CbcaParams cbca;
  SgmParams sgm;
  PostParams post;

  void validate() const;

  /// Applies one `key=value` assignment. Throws ConfigError on unknown keys
  /// or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  std::string to_string() const;
  static PipelineConfig parse(const std::string& text);
  static PipelineConfig load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace cbmv
