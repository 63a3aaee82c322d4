#pragma once

#include "fft.hpp"

namespace okpattern {

struct ShiftMatch {
  double distance = 0.0;
  std::array<long, 3> shift{0, 0, 0};
};

namespace detail {
// argmax over grid shifts t of sum_x a(x) b(x - t), via FFT correlation.
inline std::pair<std::array<long, 3>, double> best_correlation(const ScalarField& a, const ScalarField& b) {
  if (!(a.spec == b.spec)) throw ConfigError("alpha_distance: fields live on different grids");
  RealFft fft(a.spec);
  fft.forward(a.values);
  std::vector<std::complex<double>> ca(fft.coeffs(), fft.coeffs() + fft.complex_size());
  fft.forward(b.values);
  auto* cb = fft.coeffs();
  for (std::size_t i = 0; i < fft.complex_size(); ++i) cb[i] = ca[i] * std::conj(cb[i]);
  std::vector<double> corr;
  fft.backward(corr);
  std::size_t best = 0;
  for (std::size_t i = 1; i < corr.size(); ++i)
    if (corr[i] > corr[best] + 1e-9) best = i;
  auto j = a.spec.unravel(best);
  return {{static_cast<long>(j[0]), static_cast<long>(j[1]), static_cast<long>(j[2])}, corr[best]};
}
}  // namespace detail

// min over grid translations t of |E symdiff (t + F)|.
inline ShiftMatch alpha_match(const ScalarField& E, const ScalarField& F) {
  if (E.kind != FieldKind::indicator || F.kind != FieldKind::indicator)
    throw ConfigError("alpha_distance: indicator fields required");
  auto [t, c] = detail::best_correlation(E, F);
  const double n = static_cast<double>(E.size());
  double differing = std::round((n - std::round(c)) / 2.0);
  return {differing * E.spec.cell_volume(), t};
}

inline double alpha_distance(const ScalarField& E, const ScalarField& F) { return alpha_match(E, F).distance; }

// Translation-reduced L1 distance (1/2) int |u - v(. - t)| for general fields,
// taken at the L2-optimal grid shift.  Equals alpha_distance on indicators.
inline double l1_translation_distance(const ScalarField& u, const ScalarField& v) {
  auto [t, c] = detail::best_correlation(u, v);
  ScalarField vs = shift(v, t);
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += std::abs(u[i] - vs[i]);
  return 0.5 * acc * u.spec.cell_volume();
}

}  // namespace okpattern
