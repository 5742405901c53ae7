#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include "talfuse/core.hpp"

namespace talfuse {

enum class AlignMethod { paired, dup_trim, avg_trim };

std::string_view to_string(AlignMethod method);
/// Accepts both the CLI spellings (paired, duptrim, avgtrim) and the trace
/// spellings (dup_trim, avg_trim).
AlignMethod align_method_from_string(std::string_view name);

/// How two sequences were brought to a common length.
struct AlignmentTrace {
  AlignMethod method = AlignMethod::paired;
  /// Replication factor (dup_trim) or group size (avg_trim); 1 for paired.
  std::size_t factor = 1;
  /// Ceiling of the real length ratio; avg_trim only.
  std::optional<std::size_t> ceil_factor;
  /// Common length both outputs were trimmed to.
  std::size_t common_length = 1;
  /// Length of the longer sequence after group averaging; avg_trim only.
  std::optional<std::size_t> pooled_length;

  bool operator==(const AlignmentTrace&) const = default;
};

/// Video and audio features of equal length, ready for column-wise fusion.
class AlignedPair {
 public:
  AlignedPair(FeatureSequence video, FeatureSequence audio, AlignmentTrace trace);

  const FeatureSequence& video() const { return video_; }
  const FeatureSequence& audio() const { return audio_; }
  const AlignmentTrace& trace() const { return trace_; }
  std::size_t length() const { return video_.length(); }

 private:
  FeatureSequence video_;
  FeatureSequence audio_;
  AlignmentTrace trace_;
};

inline constexpr double kDefaultPairWindow = 1.2;

/// Resamples audio onto the video snippet grid. Output row i is the mean of
/// every audio row whose window overlaps a `window`-second span centred on
/// video snippet i with positive measure, or zeros when nothing overlaps.
AlignedPair pair_by_window_centering(const FeatureSequence& audio,
                                     const FeatureSequence& video,
                                     double window = kDefaultPairWindow);

/// Repeats each element of the shorter sequence k = max(1, floor(L_long /
/// L_short)) times, then keeps the common prefix of length min(L_long, k *
/// L_short). Both outputs carry the longer input's timing.
AlignedPair dup_trim(const FeatureSequence& audio, const FeatureSequence& video);

/// Averages consecutive groups of k' = ceil(L_long / L_short) elements of the
/// longer sequence (the last group over its actual size), then keeps the
/// common prefix of length min(ceil(L_long / k'), L_short). Both outputs carry
/// the shorter input's timing.
AlignedPair avg_trim(const FeatureSequence& audio, const FeatureSequence& video);

AlignedPair align(AlignMethod method, const FeatureSequence& audio,
                  const FeatureSequence& video, double window = kDefaultPairWindow);

}  // namespace talfuse
