#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "fft.hpp"
#include "v2tex/random.hpp"
#include "v2tex/dataset_io.hpp"
#include "v2tex/error.hpp"

namespace v2tex {

namespace {

using detail::Complex;
using detail::Rng;

constexpr double kPi = std::numbers::pi;
constexpr double kMeanLuminance = 0.5;
constexpr double kRmsContrast = 0.1;

enum class Kind { plaid, crossed, dots, oriented };
constexpr int kKinds = 4;

Kind kind_of(int family) { return static_cast<Kind>(family % kKinds); }

// Carrier frequency (radians/pixel); each further cycle of kinds drops by a
// half octave.
double carrier_of(int family) { return (kPi / 4.0) * std::pow(2.0, -0.5 * (family / kKinds)); }

std::vector<double> white_noise(int size, Rng& rng) {
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  for (auto& v : out) v = rng.normal();
  return out;
}

// Filters a real field in the frequency domain with a real, even gain.
template <class Gain>
std::vector<double> filter(const std::vector<double>& field, int size, Gain gain) {
  std::vector<Complex> spec(field.begin(), field.end());
  detail::fft2d(spec, size, size, false);
  for (int ky = 0; ky < size; ++ky) {
    const double wy = 2.0 * kPi * (ky <= size / 2 ? ky : ky - size) / size;
    for (int kx = 0; kx < size; ++kx) {
      const double wx = 2.0 * kPi * (kx <= size / 2 ? kx : kx - size) / size;
      spec[static_cast<std::size_t>(ky) * size + kx] *= gain(wx, wy);
    }
  }
  detail::fft2d(spec, size, size, true);
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = spec[i].real();
  return out;
}

void standardize(std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (double& x : v) x = (x - mean) * inv;
}

double radial_gain(double r, double carrier) {
  if (r <= 0.0) return 0.0;
  const double octaves = std::log2(r / carrier);
  return std::exp(-octaves * octaves / (2.0 * 0.35 * 0.35));
}

// Narrow-band noise around `carrier` with orientation theta (frequency
// direction), unit variance.
std::vector<double> oriented_noise(int size, double carrier, double theta, Rng& rng) {
  constexpr double kAngularSigma = 12.0 * kPi / 180.0;
  auto gain = [&](double wx, double wy) {
    const double r = std::hypot(wx, wy);
    if (r <= 0.0) return 0.0;
    double d = std::remainder(std::atan2(wy, wx) - theta, kPi);
    return radial_gain(r, carrier) * std::exp(-d * d / (2.0 * kAngularSigma * kAngularSigma));
  };
  auto out = filter(white_noise(size, rng), size, gain);
  standardize(out);
  return out;
}

// Smooth positive modulation field, correlation length ~ 40 pixels.
std::vector<double> envelope(int size, Rng& rng) {
  constexpr double kCutoff = 2.0 * kPi / 40.0;
  auto gain = [&](double wx, double wy) {
    const double r2 = wx * wx + wy * wy;
    return std::exp(-r2 / (2.0 * kCutoff * kCutoff));
  };
  auto g = filter(white_noise(size, rng), size, gain);
  standardize(g);
  for (double& v : g) v = std::exp(0.8 * v);
  return g;
}

// Sparse signed impulses shaped by an isotropic band around `carrier`.
std::vector<double> dot_field(int size, double carrier, Rng& rng) {
  constexpr double kDensity = 0.004;
  std::vector<double> impulses(static_cast<std::size_t>(size) * size, 0.0);
  for (auto& v : impulses) {
    if (rng.uniform() < kDensity) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
  }
  auto out = filter(impulses, size, [&](double wx, double wy) {
    return radial_gain(std::hypot(wx, wy), carrier);
  });
  standardize(out);
  return out;
}

std::string kind_name(Kind kind) {
  switch (kind) {
    case Kind::plaid:
      return "plaid";
    case Kind::crossed:
      return "crossed";
    case Kind::dots:
      return "dots";
    case Kind::oriented:
      return "oriented";
  }
  return "unknown";
}

}  // namespace

void SynthOptions::validate() const {
  if (families < 2) throw ValidationError("synth: families must be >= 2");
  if (samples_per_family < 1) throw ValidationError("synth: samples_per_family must be >= 1");
  if (size < 16) throw ValidationError("synth: image size must be >= 16");
  if (!(train_fraction > 0.0) || !(val_fraction >= 0.0) || train_fraction + val_fraction > 1.0) {
    throw ValidationError("synth: split fractions must be positive and sum to at most 1");
  }
}

std::vector<std::string> synth_family_names(int families) {
  std::vector<std::string> names;
  for (int f = 0; f < families; ++f) {
    std::string name = kind_name(kind_of(f));
    if (f >= kKinds) name += "_" + std::to_string(f / kKinds);
    names.push_back(std::move(name));
  }
  return names;
}

Image synth_texture(int family, int size, std::uint64_t seed) {
  Rng rng(seed);
  const double carrier = carrier_of(family);
  const double theta = rng.uniform(0.0, kPi);
  const std::size_t n = static_cast<std::size_t>(size) * size;
  std::vector<double> field(n, 0.0);

  switch (kind_of(family)) {
    case Kind::plaid: {
      // One envelope drives both orientations: local energies co-vary.
      auto a = oriented_noise(size, carrier, theta, rng);
      auto b = oriented_noise(size, carrier, theta + kPi / 2, rng);
      auto e = envelope(size, rng);
      for (std::size_t i = 0; i < n; ++i) field[i] = e[i] * (a[i] + b[i]);
      break;
    }
    case Kind::crossed: {
      // Same spectrum and marginal energy statistics as plaid, but the two
      // orientations are modulated independently.
      auto a = oriented_noise(size, carrier, theta, rng);
      auto b = oriented_noise(size, carrier, theta + kPi / 2, rng);
      auto ea = envelope(size, rng);
      auto eb = envelope(size, rng);
      for (std::size_t i = 0; i < n; ++i) field[i] = ea[i] * a[i] + eb[i] * b[i];
      break;
    }
    case Kind::dots:
      field = dot_field(size, carrier, rng);
      break;
    case Kind::oriented: {
      auto a = oriented_noise(size, carrier, theta, rng);
      auto e = envelope(size, rng);
      for (std::size_t i = 0; i < n; ++i) field[i] = e[i] * a[i];
      break;
    }
  }

  standardize(field);
  std::vector<double> pixels(n);
  for (std::size_t i = 0; i < n; ++i) {
    pixels[i] = std::clamp(kMeanLuminance + kRmsContrast * field[i], 0.0, 1.0);
  }
  return Image(size, size, std::move(pixels));
}

SynthSet synth_texture_set(const SynthOptions& options) {
  options.validate();
  const auto names = synth_family_names(options.families);
  const int n = options.samples_per_family;
  const int n_train = std::max(1, static_cast<int>(std::lround(options.train_fraction * n)));
  const int n_val = std::min(n - n_train, static_cast<int>(std::lround(options.val_fraction * n)));

  SynthSet set;
  for (int f = 0; f < options.families; ++f) {
    for (int i = 0; i < n; ++i) {
      const Split split = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
      char file[64];
      std::snprintf(file, sizeof(file), "%s_%04d.pgm", names[f].c_str(), i);
      set.manifest.add({fs::path(names[f]) / file, names[f], split});
      set.images.push_back(synth_texture(
          f, options.size,
          detail::derive_seed(options.seed, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(i))));
    }
  }
  return set;
}

void write_synth_set(const SynthSet& set, const fs::path& dir) {
  if (set.images.size() != set.manifest.size()) {
    throw ValidationError("synth set: image count does not match manifest");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    const auto path = dir / set.manifest.entries()[i].path;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
    save_pgm16(set.images[i], path);
  }
  set.manifest.write_csv(dir / "manifest.csv");
}

}  // namespace v2tex
