#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbmv/volume.hpp"

namespace cbmv {

enum class MaskKind { all, nonocc };

/// Error statistics of one disparity map against ground truth.
struct EvalReport {
  double bad_05 = 0.0;
  double bad_1 = 0.0;
  double bad_2 = 0.0;
  double avg_err = 0.0;
  double rms_err = 0.0;
  long pixel_count = 0;
  MaskKind mask_kind = MaskKind::all;

  /// Human-readable summary.
  std::string to_text() const;
  /// One `key=value` per line, exact round-trip of every field.
  std::string to_key_values() const;
  static EvalReport from_key_values(const std::string& text);
};

/// Fraction of evaluated pixels with |pred - gt| > tau.
///
/// Pixels with an invalid ground truth are skipped; when `nonocc` is given,
/// only pixels where it is true are evaluated. An invalid prediction counts
/// as disparity 0. Throws DataError when nothing is evaluated.
EvalReport evaluate(const DisparityMap& pred, const DisparityMap& gt,
                    const std::optional<Mask>& nonocc = std::nullopt);

/// bad-tau for arbitrary thresholds, under the same pixel selection rules.
std::vector<double> bad_fractions(const DisparityMap& pred, const DisparityMap& gt,
                                  const std::vector<double>& taus,
                                  const std::optional<Mask>& nonocc = std::nullopt);

}  // namespace cbmv
