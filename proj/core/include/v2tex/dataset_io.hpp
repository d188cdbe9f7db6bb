#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "v2tex/image.hpp"

namespace v2tex {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Image files
// ---------------------------------------------------------------------------

/// Loads an 8/16-bit PGM (P2 or P5) or PNG (gray, gray+alpha, RGB, RGBA) and
/// maps it linearly to [0,1]. RGB is converted with 0.299/0.587/0.114 weights.
Image load_grayscale(const fs::path& path);

/// Writes a binary 16-bit PGM (P5, maxval 65535). Values are clamped to
/// [0,1] and rounded; returns the number of pixels that needed clamping.
std::size_t save_pgm16(const Image& image, const fs::path& path);

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

/// Rotates counterclockwise by k quarter turns (k taken modulo 4).
Image rotate_quarter(const Image& image, int k);

/// Randomizes Fourier phases while keeping every spectral magnitude. The
/// output is real by construction (Hermitian symmetry is mirrored explicitly)
/// and the DC coefficient, hence the mean, is left untouched.
Image phase_scramble(const Image& image, std::uint64_t seed);

namespace detail {
/// Complex spatial field produced by the scrambler before the real part is
/// taken. Exposed so callers can verify the imaginary residue.
std::vector<std::complex<double>> phase_scrambled_field(const Image& image, std::uint64_t seed);
}  // namespace detail

/// Fraction of the window radius occupied by the cosine roll-off.
inline constexpr double kApertureTransitionFraction = 0.25;

/// Window value at distance `radius_px` from the centre for a window of the
/// given full diameter: 1 in the flat core, 0.5(1+cos(pi t)) across the
/// transition band, 0 outside.
double raised_cosine_window(double radius_px, double diameter_px);

/// Multiplies the image by a centred raised-cosine window whose diameter is
/// diameter_fraction * min(height, width).
Image raised_cosine_aperture(const Image& image, double diameter_fraction);

/// Bilinear resampling with pixel-centre alignment.
Image resize_bilinear(const Image& image, int height, int width);

/// Crops the centred height x width region.
Image center_crop(const Image& image, int height, int width);

/// Centre-crops to a square and resizes to size x size.
Image fit_square(const Image& image, int size);

// ---------------------------------------------------------------------------
// Dataset manifests
// ---------------------------------------------------------------------------

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view token);

struct ManifestEntry {
  fs::path path;  // as written in the manifest; relative paths resolve against base_dir
  std::string label;
  Split split = Split::train;
};

/// Labelled list of image files (`path,label,split` CSV).
class DatasetManifest {
 public:
  DatasetManifest() = default;
  explicit DatasetManifest(fs::path base_dir) : base_dir_(std::move(base_dir)) {}

  /// Throws ValidationError on a duplicate path.
  void add(ManifestEntry entry);

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const fs::path& base_dir() const { return base_dir_; }
  void set_base_dir(fs::path dir) { base_dir_ = std::move(dir); }

  fs::path resolve(const ManifestEntry& entry) const;

  std::vector<ManifestEntry> split(Split which) const;

  /// Sorted unique labels.
  std::vector<std::string> labels() const;

  static DatasetManifest read_csv(const fs::path& path);
  void write_csv(const fs::path& path) const;

 private:
  fs::path base_dir_;
  std::vector<ManifestEntry> entries_;
};

/// Loads every image listed for a split, in manifest order.
std::vector<Image> load_split(const DatasetManifest& manifest, Split which);

// ---------------------------------------------------------------------------
// Synthetic textures
// ---------------------------------------------------------------------------

struct SynthOptions {
  int families = 4;
  int samples_per_family = 100;
  int size = 224;
  std::uint64_t seed = 0;
  double train_fraction = 0.6;
  double val_fraction = 0.2;

  void validate() const;
};

struct SynthSet {
  DatasetManifest manifest;
  std::vector<Image> images;  // parallel to manifest.entries()
};

/// Family names in generation order. The structural kinds cycle through
/// plaid, crossed, dots, oriented; later cycles use a lower carrier frequency.
std::vector<std::string> synth_family_names(int families);

/// Renders a single texture sample of the given family index.
Image synth_texture(int family, int size, std::uint64_t seed);

/// Procedural texture families with equalized mean luminance (0.5) and RMS
/// contrast, stratified into train/val/test splits.
SynthSet synth_texture_set(const SynthOptions& options);

/// Writes images as 16-bit PGM plus `manifest.csv` into `dir`.
void write_synth_set(const SynthSet& set, const fs::path& dir);

}  // namespace v2tex
