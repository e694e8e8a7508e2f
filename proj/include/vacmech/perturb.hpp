#ifndef VACMECH_PERTURB_HPP
#define VACMECH_PERTURB_HPP

#include <cmath>
#include <string>

#include "model.hpp"

namespace vacmech {

// Effective coupling Omega between the named bare states; the observable
// avoided-crossing splitting is 2|Omega|.
struct CouplingEstimate {
    double omega_eff = 0.0;
    std::string formula_id;
    ModelParams inputs;
};

namespace detail {
inline void check_denominator(double den, const char* which) {
    if (std::abs(den) < 1e-6)
        throw SingularDenominator(std::string(which) + " resonant denominator smaller than 1e-6");
}
}  // namespace detail

// Coupling between |g,1,0> and |e,0,1>: photon-pair path through |g,0,2>
// plus the direct counterrotating path.
inline CouplingEstimate rate_g10_e01(const ModelParams& p) {
    if (p.kind != ModelKind::SingleAtomSingleMode) throw WrongModel("single-atom single-mode rate");
    const double w = omega_m, g = p.g, lam = p.lambda;
    const double den = w - 2.0 * p.omega_c + 4.0 * g * g / w;
    detail::check_denominator(den, "pair-creation path");
    const double s2 = std::sqrt(2.0);
    const double t1 = lam * g * (s2 - s2 * g * g / (2.0 * w * w)) * (s2 / 2.0 + s2 * g * g / (w * w)) / den;
    return {t1 - lam * g / w + lam * g * g * g / (2.0 * w * w * w), "rate_g10_e01", p};
}

// Coupling between |g,2,0> and |e,0,1>: two second-order pair-creation paths
// plus the direct term.
inline CouplingEstimate rate_g20_e01(const ModelParams& p) {
    if (p.kind != ModelKind::SingleAtomSingleMode) throw WrongModel("single-atom single-mode rate");
    const double w = omega_m, g = p.g, lam = p.lambda;
    const double d1 = w - p.omega_c + 2.0 * g * g / w;
    const double d2 = w - 2.0 * p.omega_c + 4.0 * g * g / w;
    detail::check_denominator(d1, "single-phonon path");
    detail::check_denominator(d2, "two-phonon path");
    const double s2 = std::sqrt(2.0);
    const double pref = (g * g * lam / w) * (s2 - s2 * g * g / (2.0 * w * w));
    return {-pref / d1 + pref / d2 + s2 * lam * g * g / (2.0 * w * w), "rate_g20_e01", p};
}

// Coupling between (1/sqrt2)(|g,1,0,0> - |g,0,0,2>) and |e,0,1,0> in the
// two-mode model, including the intermode scattering contribution.
inline CouplingEstimate rate_freq_conversion(const ModelParams& p) {
    if (p.kind != ModelKind::SingleAtomTwoModes) throw WrongModel("two-mode rate");
    const double w = omega_m, g = p.g, lam = p.lambda;
    const double c2 = p.omega_c2 / p.omega_c1;
    const double opc = 1.0 + c2;
    const double s2 = std::sqrt(2.0);
    const double den = 2.0 * (p.omega_c2 - p.omega_c1) - 4.0 * g * g * (c2 * c2 - 1.0) / w;
    detail::check_denominator(den, "mode-conversion path");
    const double num = -lam * (1.0 - opc * g * g / (2.0 * w * w)) *
                       (2.0 * g * g * c2 / w + s2 * g / 2.0 + opc * opc * g * g * g * s2 / (w * w));
    const double t2 = -(1.0 / s2) * (-g * lam / w + opc * opc * lam * g * g * g / (2.0 * w * w * w));
    return {num / den + t2, "rate_freq_conversion", p};
}

// Coupling between |g,g,1,0> and |e,e,0,0>: four paths through |e,g,0,1>,
// |g,e,0,1> and the photon-pair chains.
inline CouplingEstimate rate_two_atom(const ModelParams& p) {
    if (p.kind != ModelKind::TwoAtomsSingleMode) throw WrongModel("two-atom rate");
    const double w = omega_m, g = p.g;
    const double d1 = w - p.omega_c - p.omega_a1 + g * g / w;
    const double d2 = w - p.omega_c - p.omega_a2 + g * g / w;
    const double d3 = w - 2.0 * p.omega_c + 4.0 * g * g / w;
    detail::check_denominator(d1, "atom-1 path");
    detail::check_denominator(d2, "atom-2 path");
    detail::check_denominator(d3, "pair-creation path");
    const double A = (g * p.lambda1 * p.lambda2 / w) * (1.0 - g * g / (2.0 * w * w)) *
                     (-1.0 + g * g / (2.0 * w * w));
    const double B = 2.0 * g * p.lambda1 * p.lambda2 * std::pow(1.0 - g * g / (2.0 * w * w), 2) *
                     (0.5 + g * g / (w * w));
    return {A / d1 + A / d2 + B / (d1 * d3) + B / (d2 * d3), "rate_two_atom", p};
}

// <k_out| exp(alpha (b - b^dag)) |k_in> for real alpha, via associated
// Laguerre polynomials. The k_out < k_in branch follows from transposing the
// (real, orthogonal) displacement matrix: D^T(alpha) = D(-alpha).
inline double displacement_element(int k_out, int k_in, double alpha) {
    if (k_out < 0 || k_in < 0) throw IndexOutOfRange("Fock labels must be >= 0");
    if (k_out < k_in) return displacement_element(k_in, k_out, -alpha);
    const int d = k_out - k_in;
    double ratio = 1.0;  // k_in! / k_out!
    for (int i = k_in + 1; i <= k_out; ++i) ratio /= i;
    return std::sqrt(ratio) * std::pow(-alpha, d) * std::exp(-alpha * alpha / 2.0) *
           std::assoc_laguerre(static_cast<unsigned>(k_in), static_cast<unsigned>(d), alpha * alpha);
}

enum class RabiMethod {
    DCE_only_displaced,     // pair-creation path with displaced-oscillator matrix elements
    DCE_only_polaron,       // pair-creation path of the polaron-frame series
    two_photon_corrected,   // both paths with displaced-oscillator matrix elements
    two_photon_polaron,     // both paths from the polaron-frame series
};

inline RabiMethod rabi_method_from_string(const std::string& s) {
    if (s == "DCE_only_displaced") return RabiMethod::DCE_only_displaced;
    if (s == "DCE_only_polaron") return RabiMethod::DCE_only_polaron;
    if (s == "two_photon_corrected") return RabiMethod::two_photon_corrected;
    if (s == "two_photon_polaron") return RabiMethod::two_photon_polaron;
    throw UnknownMethod("'" + s + "'");
}

inline std::string to_string(RabiMethod m) {
    switch (m) {
        case RabiMethod::DCE_only_displaced: return "DCE_only_displaced";
        case RabiMethod::DCE_only_polaron: return "DCE_only_polaron";
        case RabiMethod::two_photon_corrected: return "two_photon_corrected";
        case RabiMethod::two_photon_polaron: return "two_photon_polaron";
    }
    throw UnknownMethod("unmapped method enum");
}

// The four alternative closed forms for the |g,1,0>/|e,0,1> coupling that the
// method-comparison study contrasts.
inline CouplingEstimate rate_rabi_comparison(const ModelParams& p, RabiMethod method) {
    if (p.kind != ModelKind::SingleAtomSingleMode) throw WrongModel("single-atom single-mode rate");
    const double w = omega_m, g = p.g, lam = p.lambda;
    const double beta = p.beta();
    const double den2 = w - 2.0 * p.omega_c + 4.0 * g * g / w;
    const double s2 = std::sqrt(2.0);
    auto D = displacement_element;
    switch (method) {
        case RabiMethod::DCE_only_displaced: {
            detail::check_denominator(den2, "pair-creation path");
            const double v = s2 * lam * D(0, 0, beta) *
                             (s2 / 2.0 * g * D(0, 0, -2.0 * beta) + g * D(0, 2, -2.0 * beta)) / den2;
            return {v, "rate_dce_displaced", p};
        }
        case RabiMethod::DCE_only_polaron: {
            detail::check_denominator(den2, "pair-creation path");
            const double v =
                lam * g * (s2 - s2 * g * g / (2.0 * w * w)) * (s2 / 2.0 + s2 * g * g / (w * w)) / den2;
            return {v, "rate_dce_polaron", p};
        }
        case RabiMethod::two_photon_corrected: {
            const double den1 = -p.omega_a - 2.0 * p.omega_c + 4.0 * g * g / w;
            detail::check_denominator(den1, "counterrotating path");
            detail::check_denominator(den2, "pair-creation path");
            const double t1 = ((g * lam * D(0, 0, 2.0 * beta) - 2.0 * g * lam * beta * D(0, 1, 2.0 * beta)) *
                               D(1, 1, -2.0 * beta)) /
                              den1;
            const double t2 = lam * g * D(0, 0, 2.0 * beta) * D(0, 0, -2.0 * beta) / den2;
            return {t1 + t2, "rate_two_photon_corrected", p};
        }
        case RabiMethod::two_photon_polaron: {
            const double den1 = -p.omega_a - 2.0 * p.omega_c + 4.0 * g * g / w;
            detail::check_denominator(den1, "counterrotating path");
            detail::check_denominator(den2, "pair-creation path");
            const double t1 = (lam * g - 6.0 * lam * g * g * g / (w * w)) / den1;
            const double t2 = (lam * g + 2.0 * lam * g * g * g / (w * w)) / den2;
            return {t1 + t2, "rate_two_photon_polaron", p};
        }
    }
    throw UnknownMethod("unmapped method enum");
}

}  // namespace vacmech

#endif
