// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "stemit/error.hpp"
#include "stemit/geo.hpp"
#include "stemit/record.hpp"
#include "stemit/rng.hpp"

namespace stemit::graph {

/// Parameters of the synthetic stratigraphy generator.
///
/// Layer ℓ (0 = shallowest) at node v:
///
///   thickness = b_ℓ + A·g(v) + κ·w_ℓ·s_ℓ(v) + ε,   floored at 0.1
///
/// where g is a smooth per-record spatial field with length scale λ_s,
/// s_ℓ(v) = u_ℓ·q(v) is the per-year physical driver (q a second smooth
/// field, u_ℓ a per-record year factor), w_ℓ ramps linearly from
/// `shallow_coupling` at the surface to 1 at the deepest layer, and
/// ε ~ N(0, σ²). The physical fields are affine views of s_ℓ plus their own
/// noise, so with κ = 0 they carry no information about thickness.
struct SynthConfig {
  std::size_t count = 120;
  std::size_t width = 64;
  std::size_t layers = 20;
  double coupling = 0.8;       // κ
  double noise = 0.3;          // σ
  double length_scale = 0.3;   // λ_s, fraction of the track length
  double amplitude = 2.0;      // A
  double shallow_coupling = 0.2;
  int first_year = 2011;
  /// Fraction of records given one absent thickness value (for exercising
  /// the completeness filter).
  double incomplete_fraction = 0.0;
  /// Identifier prefix; record i gets id "<prefix><i>".
  std::string id_prefix = "synth-";

  void validate() const {
    if (count == 0) throw ConfigError("synth: count must be >= 1");
    if (width < 2) throw ConfigError("synth: width must be >= 2");
    if (layers < 1) throw ConfigError("synth: layers must be >= 1");
    if (!(coupling >= 0.0)) throw ConfigError("synth: coupling must be >= 0");
    if (!(noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");
    if (!(length_scale > 0.0)) throw ConfigError("synth: length_scale must be > 0");
    if (!(amplitude >= 0.0)) throw ConfigError("synth: amplitude must be >= 0");
    if (!(shallow_coupling >= 0.0 && shallow_coupling <= 1.0))
      throw ConfigError("synth: shallow_coupling must lie in [0, 1]");
    if (!(incomplete_fraction >= 0.0 && incomplete_fraction <= 1.0))
      throw ConfigError("synth: incomplete_fraction must lie in [0, 1]");
  }
};

inline constexpr double kMinThickness = 0.1;

/// Mean thickness of layer ℓ before spatial and climate terms.
inline double base_thickness(std::size_t layer) { return 12.0 * std::exp(-0.03 * static_cast<double>(layer)); }

/// Sum of a few random cosines over t ∈ [0, 1], plus an offset; unit scale.
class SmoothField {
 public:
  SmoothField(SeededRng& rng, double length_scale) : offset_(rng.normal()) {
    for (int k = 0; k < kTerms; ++k) {
      amp_[k] = rng.normal() / std::sqrt(static_cast<double>(kTerms));
      freq_[k] = rng.uniform(0.5, 1.0) / length_scale;
      phase_[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
  }

  double operator()(double t) const {
    double v = offset_;
    for (int k = 0; k < kTerms; ++k) v += amp_[k] * std::cos(2.0 * std::numbers::pi * freq_[k] * t + phase_[k]);
    return v;
  }

 private:
  static constexpr int kTerms = 4;
  double offset_;
  double amp_[kTerms]{};
  double freq_[kTerms]{};
  double phase_[kTerms]{};
};

/// Deterministic smooth part of a record when κ = 0 and σ = 0, i.e.
/// b_ℓ + A·g(v). Exposed so tests can check the noiseless case exactly.
struct SynthTruth {
  LayerGrid base;    // b_ℓ + A·g(v), before flooring
  LayerGrid driver;  // s_ℓ(v)
};

inline LayerSequenceRecord synth_record(const SynthConfig& cfg, std::uint64_t seed, std::size_t index,
                                        SynthTruth* truth = nullptr) {
  SeededRng rng(derive_seed(seed, index));
  const std::size_t w = cfg.width, L = cfg.layers;
  LayerSequenceRecord r;
  r.id = cfg.id_prefix + std::to_string(index);

  // Smoothed random walk along the flight track.
  double lat = rng.uniform(68.0, 78.0);
  double lon = rng.uniform(-50.0, -30.0);
  double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double turn = 0.0;
  const double step = 0.004;  // degrees of latitude per node
  r.lat.resize(w);
  r.lon.resize(w);
  for (std::size_t v = 0; v < w; ++v) {
    r.lat[v] = lat;
    r.lon[v] = lon;
    turn = 0.8 * turn + 0.05 * rng.normal();
    heading += turn;
    lat += step * std::cos(heading);
    lon += step * std::sin(heading) / std::cos(deg2rad(lat));
  }

  const SmoothField g(rng, cfg.length_scale);
  const SmoothField q(rng, cfg.length_scale);
  std::vector<double> year_factor(L);
  for (double& u : year_factor) u = 1.0 + 0.2 * rng.normal();

  r.years.resize(L);
  for (std::size_t l = 0; l < L; ++l) r.years[l] = cfg.first_year - static_cast<int>(l);

  r.thickness.assign(L, std::vector<double>(w));
  LayerGrid driver(L, std::vector<double>(w));
  LayerGrid base(L, std::vector<double>(w));
  for (std::size_t l = 0; l < L; ++l) {
    const double ramp = L > 1 ? cfg.shallow_coupling +
                                    (1.0 - cfg.shallow_coupling) * static_cast<double>(l) / static_cast<double>(L - 1)
                              : 1.0;
    for (std::size_t v = 0; v < w; ++v) {
      const double t = w > 1 ? static_cast<double>(v) / static_cast<double>(w - 1) : 0.0;
      driver[l][v] = year_factor[l] * q(t);
      base[l][v] = base_thickness(l) + cfg.amplitude * g(t);
      double h = base[l][v] + cfg.coupling * ramp * driver[l][v];
      if (cfg.noise > 0.0) h += cfg.noise * rng.normal();
      r.thickness[l][v] = std::max(h, kMinThickness);
    }
  }

  // Physical fields: affine views of the driver with independent noise.
  auto view = [&](double offset, double gain, double jitter) {
    LayerGrid f(L, std::vector<double>(w));
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t v = 0; v < w; ++v) f[l][v] = offset + gain * driver[l][v] + jitter * rng.normal();
    return f;
  };
  r.phys["smb"] = view(350.0, 120.0, 10.0);
  r.phys["refreeze"] = view(0.15, 0.04, 0.01);
  r.phys["melt"] = view(0.4, -0.1, 0.02);
  r.phys["temp"] = view(255.0, 0.3, 1.5);
  r.phys["snowpack"] = view(1.2, 0.3, 0.05);

  if (cfg.incomplete_fraction > 0.0 && rng.uniform() < cfg.incomplete_fraction) {
    const std::size_t l = rng.below(L), v = rng.below(w);
    r.thickness[l][v] = kAbsent;
  }
  if (truth) *truth = {std::move(base), std::move(driver)};
  return r;
}

inline std::vector<LayerSequenceRecord> synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<LayerSequenceRecord> out;
  out.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) out.push_back(synth_record(cfg, seed, i));
  return out;
}

}  // namespace stemit::graph
