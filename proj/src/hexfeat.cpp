#include "malclass/hexfeat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "malclass/categories.hpp"
#include "malclass/errors.hpp"

namespace malclass {

FeatureVector extract_1g(const HexDump& dump) {
  FeatureVector v(kDim1G, 0.0);
  for (auto b : dump.bytes)
    if (b != kMissingByte) v[b] += 1.0;
  return v;
}

FeatureVector extract_md1(const HexDump& dump) {
  return {static_cast<double>(dump.file_size_bytes), static_cast<double>(dump.first_address)};
}

double shannon_entropy(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) return 0.0;
  std::array<std::size_t, 256> counts{};
  for (auto b : bytes) ++counts[b];
  const double n = static_cast<double>(bytes.size());
  double e = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    e -= p * std::log2(p);
  }
  // Rounding can leave -0.0 or a hair below zero for a single symbol.
  return std::clamp(e, 0.0, 8.0);
}

EntropySeries entropy_series(const HexDump& dump, std::size_t window_size) {
  if (window_size < 2) throw DataError("entropy window must hold at least 2 bytes");
  const auto usable = dump.usable_bytes();
  EntropySeries series;
  series.window_size = window_size;
  series.whole_file_entropy = shannon_entropy(usable);
  const std::span<const std::uint8_t> all(usable);
  for (std::size_t start = 0; start < usable.size(); start += window_size) {
    const std::size_t len = std::min(window_size, usable.size() - start);
    if (len < window_size && len < kMinPartialWindow) break;
    series.window_entropies.push_back(shannon_entropy(all.subspan(start, len)));
  }
  return series;
}

double nearest_rank_percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

FeatureVector entropy_features(const EntropySeries& series) {
  FeatureVector v(kDimENT, 0.0);
  const auto& e = series.window_entropies;
  if (e.empty()) return v;
  std::vector<double> sorted(e);
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(e.size());
  const double mean = std::accumulate(e.begin(), e.end(), 0.0) / n;
  double var = 0.0;
  for (double x : e) var += (x - mean) * (x - mean);
  var /= n;
  v[0] = series.whole_file_entropy;
  v[1] = n;
  v[2] = mean;
  v[3] = var;
  v[4] = sorted.front();
  v[5] = sorted.back();
  for (int q = 1; q <= 99; ++q) v[5 + static_cast<std::size_t>(q)] = nearest_rank_percentile(sorted, q);
  return v;
}

FeatureVector extract_ent(const HexDump& dump) { return entropy_features(entropy_series(dump)); }

GrayImage GrayImage::transposed() const {
  GrayImage t{height, width, std::vector<std::uint8_t>(pixels.size())};
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) t.pixels[c * height + r] = at(r, c);
  return t;
}

GrayImage to_image(const HexDump& dump) {
  const bool any_usable =
      std::any_of(dump.bytes.begin(), dump.bytes.end(), [](std::uint16_t b) { return b != kMissingByte; });
  if (!any_usable) throw DataError("cannot build an image from a dump without usable bytes");
  GrayImage img;
  img.width = kImageWidth;
  img.height = (dump.bytes.size() + kImageWidth - 1) / kImageWidth;
  img.pixels.assign(img.width * img.height, 0);
  for (std::size_t i = 0; i < dump.bytes.size(); ++i)
    img.pixels[i] = dump.bytes[i] == kMissingByte ? 0 : static_cast<std::uint8_t>(dump.bytes[i]);
  return img;
}

std::vector<double> cooccurrence_matrix(const GrayImage& image, PixelOffset offset) {
  constexpr std::size_t L = kGlcmLevels;
  std::vector<double> glcm(L * L, 0.0);
  std::vector<std::size_t> counts(L * L, 0);
  const auto H = static_cast<long>(image.height);
  const auto W = static_cast<long>(image.width);
  std::size_t pairs = 0;
  const long r0 = std::max(0L, -static_cast<long>(offset.dr));
  const long r1 = std::min(H, H - offset.dr);
  const long c0 = std::max(0L, -static_cast<long>(offset.dc));
  const long c1 = std::min(W, W - offset.dc);
  for (long r = r0; r < r1; ++r) {
    for (long c = c0; c < c1; ++c) {
      const std::size_t a = image.pixels[static_cast<std::size_t>(r * W + c)] / 16;
      const std::size_t b = image.pixels[static_cast<std::size_t>((r + offset.dr) * W + c + offset.dc)] / 16;
      ++counts[a * L + b];
      ++counts[b * L + a];
      pairs += 2;
    }
  }
  if (pairs == 0) return glcm;
  for (std::size_t i = 0; i < glcm.size(); ++i) glcm[i] = static_cast<double>(counts[i]) / static_cast<double>(pairs);
  return glcm;
}

std::vector<double> haralick_statistics(std::span<const double> p, std::size_t levels) {
  const std::size_t L = levels;
  std::vector<double> f(kHaralickFeatureCount, 0.0);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (total <= 0.0) return f;

  std::vector<double> px(L, 0.0), py(L, 0.0), psum(2 * L - 1, 0.0), pdiff(L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const double v = p[i * L + j];
      px[i] += v;
      py[j] += v;
      psum[i + j] += v;
      pdiff[i > j ? i - j : j - i] += v;
    }
  }
  double mux = 0, muy = 0;
  for (std::size_t i = 0; i < L; ++i) {
    mux += static_cast<double>(i) * px[i];
    muy += static_cast<double>(i) * py[i];
  }
  double varx = 0, vary = 0;
  for (std::size_t i = 0; i < L; ++i) {
    varx += (static_cast<double>(i) - mux) * (static_cast<double>(i) - mux) * px[i];
    vary += (static_cast<double>(i) - muy) * (static_cast<double>(i) - muy) * py[i];
  }

  auto plog = [](double v) { return v > 0.0 ? v * std::log2(v) : 0.0; };

  double asm_ = 0, contrast = 0, cross = 0, sumsq = 0, idm = 0, entropy = 0, hxy1 = 0, hxy2 = 0;
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const double v = p[i * L + j];
      const double d = static_cast<double>(i) - static_cast<double>(j);
      asm_ += v * v;
      contrast += d * d * v;
      cross += static_cast<double>(i) * static_cast<double>(j) * v;
      sumsq += (static_cast<double>(i) - mux) * (static_cast<double>(i) - mux) * v;
      idm += v / (1.0 + d * d);
      entropy -= plog(v);
      const double q = px[i] * py[j];
      if (q > 0.0) {
        if (v > 0.0) hxy1 -= v * std::log2(q);
        hxy2 -= q * std::log2(q);
      }
    }
  }

  double sum_avg = 0, sum_entropy = 0;
  for (std::size_t k = 0; k < psum.size(); ++k) {
    sum_avg += static_cast<double>(k) * psum[k];
    sum_entropy -= plog(psum[k]);
  }
  double sum_var = 0;
  for (std::size_t k = 0; k < psum.size(); ++k)
    sum_var += (static_cast<double>(k) - sum_avg) * (static_cast<double>(k) - sum_avg) * psum[k];

  double diff_mean = 0, diff_entropy = 0;
  for (std::size_t k = 0; k < L; ++k) {
    diff_mean += static_cast<double>(k) * pdiff[k];
    diff_entropy -= plog(pdiff[k]);
  }
  double diff_var = 0;
  for (std::size_t k = 0; k < L; ++k)
    diff_var += (static_cast<double>(k) - diff_mean) * (static_cast<double>(k) - diff_mean) * pdiff[k];

  double hx = 0, hy = 0;
  for (std::size_t i = 0; i < L; ++i) {
    hx -= plog(px[i]);
    hy -= plog(py[i]);
  }

  const double sigma = std::sqrt(varx) * std::sqrt(vary);
  const double hmax = std::max(hx, hy);

  f[0] = asm_;
  f[1] = contrast;
  f[2] = sigma > 0.0 ? (cross - mux * muy) / sigma : 0.0;
  f[3] = sumsq;
  f[4] = idm;
  f[5] = sum_avg;
  f[6] = sum_var;
  f[7] = sum_entropy;
  f[8] = entropy;
  f[9] = diff_var;
  f[10] = diff_entropy;
  f[11] = hmax > 0.0 ? (entropy - hxy1) / hmax : 0.0;
  f[12] = std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - entropy))));
  return f;
}

FeatureVector extract_img1(const GrayImage& image) {
  FeatureVector v;
  v.reserve(kDimIMG1);
  for (const auto& off : kGlcmOffsets) {
    const auto stats = haralick_statistics(cooccurrence_matrix(image, off), kGlcmLevels);
    v.insert(v.end(), stats.begin(), stats.end());
  }
  return v;
}

namespace {

struct LbpTable {
  std::array<std::uint8_t, 256> cls{};
  LbpTable() {
    std::array<std::uint8_t, 256> minrot{};
    std::vector<std::uint8_t> reps;
    for (unsigned code = 0; code < 256; ++code) {
      unsigned best = code;
      unsigned x = code;
      for (int k = 0; k < 8; ++k) {
        x = ((x >> 1) | (x << 7)) & 0xFF;
        best = std::min(best, x);
      }
      minrot[code] = static_cast<std::uint8_t>(best);
      reps.push_back(static_cast<std::uint8_t>(best));
    }
    std::sort(reps.begin(), reps.end());
    reps.erase(std::unique(reps.begin(), reps.end()), reps.end());
    for (unsigned code = 0; code < 256; ++code)
      cls[code] = static_cast<std::uint8_t>(std::lower_bound(reps.begin(), reps.end(), minrot[code]) - reps.begin());
  }
};

const LbpTable& lbp_table() {
  static const LbpTable table;
  return table;
}

}  // namespace

std::size_t lbp_rotation_class(std::uint8_t code) { return lbp_table().cls[code]; }

FeatureVector extract_img2(const GrayImage& image) {
  FeatureVector v(kDimIMG2, 0.0);
  const auto& table = lbp_table();
  for (std::size_t ri = 0; ri < std::size(kLbpRadii); ++ri) {
    const int radius = kLbpRadii[ri];
    const auto R = static_cast<std::size_t>(radius);
    if (image.height <= 2 * R || image.width <= 2 * R) continue;

    std::array<int, 8> dr{}, dc{};
    for (int p = 0; p < 8; ++p) {
      const double theta = 2.0 * M_PI * p / 8.0;
      dc[p] = static_cast<int>(std::lround(radius * std::cos(theta)));
      dr[p] = -static_cast<int>(std::lround(radius * std::sin(theta)));
    }

    std::array<double, kLbpPatterns> hist{};
    std::size_t pixels = 0;
    const auto W = static_cast<long>(image.width);
    for (std::size_t r = R; r + R < image.height; ++r) {
      for (std::size_t c = R; c + R < image.width; ++c) {
        const std::uint8_t center = image.at(r, c);
        unsigned code = 0;
        for (int p = 0; p < 8; ++p) {
          const long idx = (static_cast<long>(r) + dr[p]) * W + static_cast<long>(c) + dc[p];
          if (image.pixels[static_cast<std::size_t>(idx)] >= center) code |= 1u << p;
        }
        hist[table.cls[code]] += 1.0;
        ++pixels;
      }
    }
    for (std::size_t k = 0; k < kLbpPatterns; ++k) v[ri * kLbpPatterns + k] = hist[k] / static_cast<double>(pixels);
  }
  return v;
}

FeatureVector extract_str(const HexDump& dump) {
  FeatureVector v(kDimSTR, 0.0);
  std::size_t run = 0;
  auto flush = [&] {
    if (run >= kMinStringLength) {
      const std::size_t bin = run <= kMaxBinnedStringLength ? run - kMinStringLength : kDimSTR - 1;
      v[bin] += 1.0;
    }
    run = 0;
  };
  for (auto b : dump.bytes) {
    if (b == kMissingByte) continue;
    if (b >= 0x20 && b <= 0x7E) {
      ++run;
    } else {
      flush();
    }
  }
  flush();
  return v;
}

}  // namespace malclass
