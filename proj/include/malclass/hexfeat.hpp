#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "malclass/hexparse.hpp"

namespace malclass {

using FeatureVector = std::vector<double>;

/// Byte-value frequencies; `??` bytes are not counted.
FeatureVector extract_1g(const HexDump& dump);

/// [file size in bytes, first line address].
FeatureVector extract_md1(const HexDump& dump);

inline constexpr std::size_t kEntropyWindow = 10000;
/// A trailing partial window shorter than this is dropped.
inline constexpr std::size_t kMinPartialWindow = 256;

struct EntropySeries {
  std::vector<double> window_entropies;
  std::size_t window_size = kEntropyWindow;
  double whole_file_entropy = 0.0;
};

/// Shannon entropy (bits) of a byte sequence; 0 for an empty one.
double shannon_entropy(std::span<const std::uint8_t> bytes);

/// Entropy over consecutive non-overlapping windows of usable bytes.
EntropySeries entropy_series(const HexDump& dump, std::size_t window_size = kEntropyWindow);

/// Nearest-rank percentile of sorted values, p in (0, 100].
double nearest_rank_percentile(std::span<const double> sorted, double p);

/// [whole-file entropy, window count, mean, variance, min, max, p1..p99].
FeatureVector entropy_features(const EntropySeries& series);
FeatureVector extract_ent(const HexDump& dump);

/// 8-bit grayscale image, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  GrayImage transposed() const;
};

inline constexpr std::size_t kImageWidth = 256;

/// One pixel per byte (`??` as 0), 256 pixels per row, last row zero-padded.
/// Throws DataError when the dump has no usable byte.
GrayImage to_image(const HexDump& dump);

inline constexpr std::size_t kGlcmLevels = 16;
inline constexpr std::size_t kHaralickFeatureCount = 13;

/// Co-occurrence directions in the IMG1 layout: 0, 45, 90, 135 degrees.
struct PixelOffset {
  int dr;
  int dc;
};
inline constexpr PixelOffset kGlcmOffsets[4] = {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}};

/// Symmetric normalized co-occurrence matrix (kGlcmLevels^2, row-major) at
/// the given offset, gray levels quantized as value / 16. All zeros if the
/// image has no pixel pair at that offset.
std::vector<double> cooccurrence_matrix(const GrayImage& image, PixelOffset offset);

/// The 13 Haralick statistics of a normalized levels x levels matrix, in the
/// order: ASM, contrast, correlation, sum of squares variance, inverse
/// difference moment, sum average, sum variance, sum entropy, entropy,
/// difference variance, difference entropy, IMC1, IMC2. Statistics with a zero
/// denominator are 0.
std::vector<double> haralick_statistics(std::span<const double> glcm, std::size_t levels);

/// 13 statistics for each of the four directions, direction-major.
FeatureVector extract_img1(const GrayImage& image);

inline constexpr std::size_t kLbpPatterns = 36;
inline constexpr int kLbpRadii[3] = {1, 2, 3};

/// Index (0..35) of the rotation-invariant class of an 8-bit LBP code.
std::size_t lbp_rotation_class(std::uint8_t code);

/// Normalized rotation-invariant LBP histograms for radii 1, 2, 3.
FeatureVector extract_img2(const GrayImage& image);

inline constexpr std::size_t kMinStringLength = 2;
inline constexpr std::size_t kMaxBinnedStringLength = 116;

/// Histogram of printable-ASCII run lengths: bins for 2..116, then overflow.
FeatureVector extract_str(const HexDump& dump);

}  // namespace malclass
