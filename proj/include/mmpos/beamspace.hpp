// Beam-swept OFDM data containers shared by the simulator (raw received
// symbols) and the channel estimator (per-bin channel estimates).

#pragma once

#include <complex>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mmpos {

using cd = std::complex<double>;

/// Index order is (ue_beam, bs_el_beam, bs_az_beam, subcarrier), row-major.
struct BeamTensorDims {
  int n_ue = 0;
  int n_bs_el = 0;
  int n_bs_az = 0;
  int n_subc = 0;

  std::size_t beam_count() const {
    return std::size_t(n_ue) * n_bs_el * n_bs_az;
  }
  std::size_t size() const { return beam_count() * n_subc; }
  std::size_t beam_index(int g1, int g2, int g3) const {
    return (std::size_t(g1) * n_bs_el + g2) * n_bs_az + g3;
  }
  std::size_t index(int g1, int g2, int g3, int k) const {
    return beam_index(g1, g2, g3) * n_subc + k;
  }
};

/// Raw beam-sweep output: received symbols and the pilots they carried,
/// one complex value per (beam triple, active subcarrier).
struct RawBeamspace {
  BeamTensorDims dims;
  std::vector<int> active_subcarriers;   // kappa values, strictly increasing
  double subcarrier_spacing_hz = 0.0;
  std::vector<cd> symbols;
  std::vector<cd> pilots;

  const cd& symbol(int g1, int g2, int g3, int k) const {
    return symbols[dims.index(g1, g2, g3, k)];
  }
  const cd& pilot(int g1, int g2, int g3, int k) const {
    return pilots[dims.index(g1, g2, g3, k)];
  }
};

/// Delay window over which the subcarrier phase law is unambiguous:
/// 1 / (gcd of index steps * subcarrier spacing).
inline double unambiguous_delay_range(const std::vector<int>& active,
                                      double spacing_hz) {
  if (active.size() < 2) throw std::invalid_argument("underdetermined delay");
  int g = 0;
  for (std::size_t i = 1; i < active.size(); ++i)
    g = std::gcd(g, active[i] - active[0]);
  return 1.0 / (double(g) * spacing_hz);
}

}  // namespace mmpos
